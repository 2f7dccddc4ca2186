#ifndef CERTBOX_H
#define CERTBOX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CertboxStatus {
  CERTBOX_STATUS_OK = 0,
  CERTBOX_STATUS_NULL_POINTER = 1,
  CERTBOX_STATUS_INVALID_UTF8 = 2,
  CERTBOX_STATUS_PARSE = 3,
  CERTBOX_STATUS_DIMENSION = 4,
  CERTBOX_STATUS_INVALID_ARGUMENT = 5,
  CERTBOX_STATUS_SOLVER = 6,
  CERTBOX_STATUS_BUFFER_TOO_SMALL = 7,
  CERTBOX_STATUS_PANIC = 8,
} CertboxStatus;

typedef enum CertboxDenominator {
  CERTBOX_DENOMINATOR_ONE = 0,
  CERTBOX_DENOMINATOR_NORM_Y = 1,
} CertboxDenominator;

typedef enum CertboxOutcome {
  /**
   * The box provably holds no feasible point.
   */
  CERTBOX_OUTCOME_EXCLUDED = 0,
  /**
   * A feasible point was found.
   */
  CERTBOX_OUTCOME_FEASIBLE = 1,
  /**
   * Neither within the iteration budget.
   */
  CERTBOX_OUTCOME_UNKNOWN = 2,
} CertboxOutcome;

/**
 * The outcome of a certificate search.
 */
typedef struct CertboxFindResult CertboxFindResult;

/**
 * A parsed problem.
 */
typedef struct CertboxProblem CertboxProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL.
 *
 * The pointer stays valid until the next call into this library on the same
 * thread.
 */
const char *certbox_last_error(void);

/**
 * Parses a problem from NUL-terminated JSON text.
 *
 * # Safety
 *
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 * The handle written to `out` must be released with `certbox_problem_free`.
 */
enum CertboxStatus certbox_problem_parse(const char *json,
                                         bool fold_upper,
                                         struct CertboxProblem **out);

/**
 * Releases a problem. Passing NULL is a no-op.
 *
 * # Safety
 *
 * `problem` must come from `certbox_problem_parse` and not be used afterwards.
 */
void certbox_problem_free(struct CertboxProblem *problem);

/**
 * Writes the number of variables and of constraints.
 *
 * # Safety
 *
 * All pointers must be valid.
 */
enum CertboxStatus certbox_problem_dims(const struct CertboxProblem *problem, size_t *n, size_t *m);

/**
 * Evaluates all constraint functions at `x` (length `n`) into `out`
 * (length `m`).
 *
 * # Safety
 *
 * `x` must point to `n` doubles and `out` to `m` writable doubles.
 */
enum CertboxStatus certbox_problem_eval(const struct CertboxProblem *problem,
                                        const double *x,
                                        size_t n,
                                        double *out,
                                        size_t m);

/**
 * Searches for a certificate on the whole domain. With `variable_box` the
 * box may shrink to a quarter of the domain width and the search stops at the
 * first negative value; otherwise the box is the domain and the certificate
 * is minimized for at most `max_iter` iterations.
 *
 * # Safety
 *
 * `problem` and `out` must be valid. The handle written to `out` must be
 * released with `certbox_find_result_free`.
 */
enum CertboxStatus certbox_find(const struct CertboxProblem *problem,
                                enum CertboxDenominator denominator,
                                bool variable_box,
                                size_t max_iter,
                                struct CertboxFindResult **out);

/**
 * Releases a search result. Passing NULL is a no-op.
 *
 * # Safety
 *
 * `result` must come from `certbox_find` and not be used afterwards.
 */
void certbox_find_result_free(struct CertboxFindResult *result);

/**
 * # Safety
 *
 * `result` and `out` must be valid.
 */
enum CertboxStatus certbox_find_result_outcome(const struct CertboxFindResult *result,
                                               enum CertboxOutcome *out);

/**
 * Certificate value for `Excluded`, best value reached for `Unknown`, NaN
 * for `Feasible`.
 *
 * # Safety
 *
 * `result` and `out` must be valid.
 */
enum CertboxStatus certbox_find_result_f_value(const struct CertboxFindResult *result, double *out);

/**
 * Number of certificate evaluations spent.
 *
 * # Safety
 *
 * `result` and `out` must be valid.
 */
enum CertboxStatus certbox_find_result_calls(const struct CertboxFindResult *result, uint64_t *out);

/**
 * Copies the box (the excluded box, or the domain otherwise) into `lo` and
 * `hi`, each of length `n`.
 *
 * # Safety
 *
 * `lo` and `hi` must point to `n` writable doubles.
 */
enum CertboxStatus certbox_find_result_box(const struct CertboxFindResult *result,
                                           double *lo,
                                           double *hi,
                                           size_t n);

/**
 * Copies the feasible point, or the witness center of a certificate, into
 * `out` (length `n`). Fails for `Unknown`.
 *
 * # Safety
 *
 * `out` must point to `n` writable doubles.
 */
enum CertboxStatus certbox_find_result_point(const struct CertboxFindResult *result,
                                             double *out,
                                             size_t n);

/**
 * Covers `outer` minus the interior of `inner` with at most `2n` boxes.
 * Piece `i` is written to `out_lo[i*n..(i+1)*n]` and `out_hi[i*n..(i+1)*n]`;
 * `capacity` is the number of pieces the buffers hold. `count` receives the
 * number of pieces, also when the buffers are too small.
 *
 * # Safety
 *
 * Input arrays must hold `n` doubles, output arrays `capacity * n`.
 */
enum CertboxStatus certbox_split_complement(const double *outer_lo,
                                            const double *outer_hi,
                                            const double *inner_lo,
                                            const double *inner_hi,
                                            size_t n,
                                            double *out_lo,
                                            double *out_hi,
                                            size_t capacity,
                                            size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CERTBOX_H */
