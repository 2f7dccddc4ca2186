//! Seeded generators of random problem instances.

use nalgebra::DMatrix;
use rand::Rng;

use crate::interval::{BoxVec, Interval};
use crate::model::QuadraticCsp;

/// A quadratic CSP with `n` variables and `m` constraints. Coefficients are
/// uniform in `[-2, 2]`, the domain is a box around the origin with sides in
/// `[0.5, 3]`, and each range is a finite interval anchored near the value at
/// a random point, with one side occasionally infinite. Roughly half of the
/// instances are infeasible on parts of the domain.
pub fn random_csp<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> QuadraticCsp {
    let linear: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let quad: Vec<DMatrix<f64>> = (0..m)
        .map(|_| {
            let mut c = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    c[(i, j)] = rng.random_range(-2.0..2.0);
                }
            }
            c
        })
        .collect();
    let lo: Vec<f64> = (0..n).map(|_| -rng.random_range(0.5..3.0)).collect();
    let hi: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
    let domain = BoxVec::from_bounds(&lo, &hi).expect("valid domain");
    let probe: Vec<f64> = (0..n).map(|i| rng.random_range(lo[i]..hi[i])).collect();
    let mut ranges = Vec::with_capacity(m);
    for k in 0..m {
        let fk = linear[k].iter().zip(&probe).map(|(c, x)| c * x).sum::<f64>() + {
            let mut q = 0.0;
            for i in 0..n {
                for j in 0..n {
                    q += probe[i] * quad[k][(i, j)] * probe[j];
                }
            }
            q
        };
        let a = fk + rng.random_range(-4.0..2.0);
        let b = a + rng.random_range(0.2..3.0);
        let range = match rng.random_range(0..6) {
            0 => Interval::new(f64::NEG_INFINITY, b),
            1 => Interval::new(a, f64::INFINITY),
            _ => Interval::new(a, b),
        };
        ranges.push(range.expect("valid range"));
    }
    QuadraticCsp::new(linear, quad, ranges, domain).expect("consistent dimensions")
}
