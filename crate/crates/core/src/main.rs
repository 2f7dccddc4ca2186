use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use certbox::certificate::{Certificate, TChoice};
use certbox::exclusion::{
    box_measure, enlarge_exclusion_box, find_exclusion_box, prune, split_complement, BoxMeasure, EnlargeOptions,
    FindOptions, FindOutcome, FindResult, PruneBudget, PruneOptions, WeightMode,
};
use certbox::interval::{BoxVec, Rounding};
use certbox::model::{parse_problem_with, ParseOptions, QuadraticCsp};
use certbox::random::random_csp;
use certbox::report::{emit_csv, fmt_g};
use certbox::solver::{rp_cost, EvalCounters, SolveOptions};
use certbox::startpoint::{starting_point, StartOptions, StartOutcome};

const EXIT_CERTIFICATE: u8 = 2;
const EXIT_FEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "certbox",
    version,
    about = "Exclusion boxes for quadratic constraint satisfaction problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Show the starting point and whether the box midpoint is feasible
    Check {
        problem: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Search for a certificate that the domain holds no feasible point
    Find {
        problem: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Let the box shrink (down to r) instead of keeping the domain
        #[arg(long)]
        variable_box: bool,
    },
    /// Find a certificate on an inner box, then grow the box
    Enlarge {
        problem: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Certificate level to keep; defaults to half the found value
        #[arg(long, allow_negative_numbers = true)]
        delta: Option<f64>,
        /// neg-l1, neg-half-l2sq, neg-linf, pos-l1, pos-half-l2sq or pos-linf
        #[arg(long, default_value = "neg-l1")]
        measure: BoxMeasure,
    },
    /// Split the domain into excluded and remaining boxes
    Prune {
        problem: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        max_boxes: usize,
        #[arg(long, default_value_t = 1e-6)]
        min_width: f64,
        /// Grow each exclusion box before splitting
        #[arg(long)]
        enlarge: bool,
        /// Write the CSV report here instead of stdout
        #[arg(long)]
        report: Option<PathBuf>,
        /// Record wall-clock milliseconds per box
        #[arg(long)]
        timing: bool,
    },
    /// Compare the two denominators on a directory of problems or random ones
    Bench {
        /// Directory of problem files
        dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Generate this many random problems instead of reading a directory
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the boxes covering OUTER minus INNER, e.g. [0,3]x[0,3] [1,2]x[1,2]
    Split { outer: String, inner: String },
}

#[derive(Args, Clone)]
struct Common {
    /// Certificate denominator
    #[arg(long = "t", value_enum, default_value_t = TArg::NormY)]
    t: TArg,
    /// Minimum box size as a fraction of the region width
    #[arg(long, default_value_t = 0.25)]
    r_fraction: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Treatment of the augmentation matrices R and S
    #[arg(long, value_enum, default_value_t = WeightArg::Start)]
    weights: WeightArg,
    /// Verify certificates with outward rounding
    #[arg(long)]
    rigorous: bool,
    /// Fold entries above the diagonal of C into the lower triangle
    #[arg(long)]
    fold_upper: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum TArg {
    One,
    NormY,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Start,
    Zero,
    Optimize,
}

impl TArg {
    fn choice(self) -> TChoice {
        match self {
            TArg::One => TChoice::one(),
            TArg::NormY => TChoice::norm_y(),
        }
    }

    fn other(self) -> TArg {
        match self {
            TArg::One => TArg::NormY,
            TArg::NormY => TArg::One,
        }
    }

    fn name(self) -> &'static str {
        match self {
            TArg::One => "one",
            TArg::NormY => "norm-y",
        }
    }
}

impl Common {
    fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.r_fraction) {
            return Err(format!("--r-fraction must lie in [0, 1), got {}", self.r_fraction));
        }
        if !(self.tol > 0.0) {
            return Err(format!("--tol must be positive, got {}", self.tol));
        }
        Ok(())
    }

    fn rounding(&self) -> Rounding {
        if self.rigorous {
            Rounding::Outward
        } else {
            Rounding::Fast
        }
    }

    fn weights(&self) -> WeightMode {
        match self.weights {
            WeightArg::Start => WeightMode::Start,
            WeightArg::Zero => WeightMode::Zero,
            WeightArg::Optimize => WeightMode::Optimize,
        }
    }

    fn solve(&self) -> SolveOptions {
        SolveOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            ..SolveOptions::default()
        }
    }

    fn find(&self) -> FindOptions {
        FindOptions {
            t: self.t.choice(),
            weights: self.weights(),
            r_fraction: self.r_fraction,
            rounding: self.rounding(),
            solve: self.solve(),
            ..FindOptions::default()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &Path, fold_upper: bool) -> Result<QuadraticCsp, String> {
    let resolved = if !path.exists() && path.extension().is_none() {
        path.with_extension("json")
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&resolved).map_err(|e| format!("{}: {e}", resolved.display()))?;
    let parsed =
        parse_problem_with(&text, ParseOptions { fold_upper }).map_err(|e| format!("{}: {e}", resolved.display()))?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed.csp)
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(","))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<u8, String> {
    match command {
        Command::Check { problem, common } => {
            common.validate()?;
            let csp = load(&problem, common.fold_upper)?;
            check(&csp, &common)
        }
        Command::Find {
            problem,
            common,
            variable_box,
        } => {
            common.validate()?;
            let csp = load(&problem, common.fold_upper)?;
            let mut opts = common.find();
            if variable_box {
                opts = FindOptions {
                    fixed_box: false,
                    strict_interior: true,
                    early_exit: true,
                    ..opts
                };
            }
            let res = find_exclusion_box(&csp, csp.domain(), &opts).map_err(|e| e.to_string())?;
            Ok(print_find(&res))
        }
        Command::Enlarge {
            problem,
            common,
            delta,
            measure,
        } => {
            common.validate()?;
            let csp = load(&problem, common.fold_upper)?;
            enlarge(&csp, &common, delta, measure)
        }
        Command::Prune {
            problem,
            common,
            max_boxes,
            min_width,
            enlarge,
            report,
            timing,
        } => {
            common.validate()?;
            let csp = load(&problem, common.fold_upper)?;
            let opts = PruneOptions {
                budget: PruneBudget {
                    max_boxes,
                    max_iter_per_box: common.max_iter,
                    min_width,
                    enlarge,
                },
                t: common.t.choice(),
                r_fraction: common.r_fraction,
                weights: common.weights(),
                rounding: common.rounding(),
                tol: common.tol,
                enlarge: EnlargeOptions {
                    weights: common.weights(),
                    rounding: common.rounding(),
                    solve: common.solve(),
                    ..EnlargeOptions::default()
                },
                timing,
                ..PruneOptions::default()
            };
            let res = prune(&csp, &opts).map_err(|e| e.to_string())?;
            write_out(report.as_deref(), &emit_csv(&res.rows, csp.n()))?;
            let excluded: f64 = res.excluded.iter().map(|c| c.box_vec().volume()).sum();
            let remaining: f64 = res.remaining.iter().map(BoxVec::volume).sum();
            eprintln!(
                "boxes={} excluded={} excluded_volume={} remaining={} remaining_volume={} feasible_points={}",
                res.rows.len(),
                res.excluded.len(),
                fmt_g(excluded),
                res.remaining.len(),
                fmt_g(remaining),
                res.feasible_points.len()
            );
            Ok(0)
        }
        Command::Bench {
            dir,
            common,
            random,
            seed,
            report,
        } => {
            common.validate()?;
            let problems = bench_problems(dir.as_deref(), random, seed, common.fold_upper)?;
            bench(&problems, &common, report.as_deref())
        }
        Command::Split { outer, inner } => {
            let outer: BoxVec = outer.parse()?;
            let inner: BoxVec = inner.parse()?;
            for piece in split_complement(&outer, &inner).map_err(|e| e.to_string())? {
                println!("{piece}");
            }
            Ok(0)
        }
    }
}

fn check(csp: &QuadraticCsp, common: &Common) -> Result<u8, String> {
    println!("domain={}", csp.domain());
    match starting_point(csp, &StartOptions::default()).map_err(|e| e.to_string())? {
        StartOutcome::Feasible(z) => {
            println!("FEASIBLE point={}", fmt_point(&z));
            Ok(EXIT_FEASIBLE)
        }
        StartOutcome::Start(p) => {
            let fz: Vec<f64> = (0..csp.m()).map(|k| csp.eval_k(k, &p.z)).collect();
            println!("z0={}", fmt_point(&p.z));
            println!("F(z0)={}", fmt_point(&fz));
            println!("y0={}", fmt_point(&p.y));
            let r_diag: Vec<f64> = (0..p.n()).map(|i| p.r[(i, i)]).collect();
            println!("R0_diag={}", fmt_point(&r_diag));
            match Certificate::new(csp, common.t.choice()).value(&p) {
                Ok(v) => println!("START f0={:.6}", v.f),
                Err(e) => println!("START f0 undefined: {e}"),
            }
            Ok(0)
        }
    }
}

fn print_find(res: &FindResult) -> u8 {
    let calls = res.report.as_ref().map_or(0, |r| r.counters.n_calls);
    match &res.outcome {
        FindOutcome::Excluded(cert) => {
            println!("EXCLUDED f={:.6} box={}", cert.f_value, cert.box_vec());
            println!(
                "witness y={} z={} calls={calls}",
                fmt_point(&cert.witness.y),
                fmt_point(&cert.witness.z)
            );
            EXIT_CERTIFICATE
        }
        FindOutcome::FeasibleFound(z) => {
            println!("FEASIBLE point={}", fmt_point(z));
            EXIT_FEASIBLE
        }
        FindOutcome::Unknown => {
            let best = res.report.as_ref().map_or(f64::NAN, |r| r.best_value);
            println!("UNKNOWN best={best:.6} calls={calls}");
            0
        }
    }
}

fn enlarge(csp: &QuadraticCsp, common: &Common, delta: Option<f64>, measure: BoxMeasure) -> Result<u8, String> {
    let opts = FindOptions {
        strict_interior: true,
        ..common.find()
    };
    let res = find_exclusion_box(csp, csp.domain(), &opts).map_err(|e| e.to_string())?;
    let FindOutcome::Excluded(cert) = &res.outcome else {
        let code = print_find(&res);
        return Ok(if code == EXIT_FEASIBLE { code } else { 0 });
    };
    let eopts = EnlargeOptions {
        delta,
        measure,
        weights: common.weights(),
        rounding: common.rounding(),
        solve: common.solve(),
        ..EnlargeOptions::default()
    };
    let (big, _) = enlarge_exclusion_box(csp, cert, csp.domain(), &eopts).map_err(|e| e.to_string())?;
    let m = |u: &[f64], v: &[f64]| box_measure(measure, u, v, csp.domain()).map_err(|e| e.to_string());
    println!(
        "BEFORE box={} f={:.6} {}={}",
        cert.box_vec(),
        cert.f_value,
        measure.name(),
        fmt_g(m(&cert.u, &cert.v)?)
    );
    println!(
        "AFTER box={} f={:.6} {}={}",
        big.box_vec(),
        big.f_value,
        measure.name(),
        fmt_g(m(&big.u, &big.v)?)
    );
    Ok(0)
}

fn bench_problems(
    dir: Option<&Path>,
    random: Option<usize>,
    seed: u64,
    fold_upper: bool,
) -> Result<Vec<(String, QuadraticCsp)>, String> {
    if let Some(count) = random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok((0..count)
            .map(|i| {
                let n = rng.random_range(1..=3);
                let m = rng.random_range(1..=3);
                (format!("random{i}"), random_csp(&mut rng, n, m))
            })
            .collect());
    }
    let dir = dir.ok_or("bench needs a directory or --random")?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            load(p, fold_upper).map(|csp| (name, csp))
        })
        .collect()
}

fn bench(problems: &[(String, QuadraticCsp)], common: &Common, report: Option<&Path>) -> Result<u8, String> {
    let variants = [common.t, common.t.other()];
    let mut text = format!(
        "problem,status_{a},f_{a},nCalls_{a},cost_{a},status_{b},f_{b},nCalls_{b},cost_{b},rp\n",
        a = variants[0].name(),
        b = variants[1].name()
    );
    let mut rp_total = 0.0;
    for (name, csp) in problems {
        text.push_str(name);
        let mut counters = [EvalCounters::default(); 2];
        for (i, t) in variants.iter().enumerate() {
            let opts = FindOptions {
                t: t.choice(),
                early_exit: true,
                ..common.find()
            };
            let res = find_exclusion_box(csp, csp.domain(), &opts).map_err(|e| format!("{name}: {e}"))?;
            let (status, f) = match &res.outcome {
                FindOutcome::Excluded(c) => ("excluded", c.f_value),
                FindOutcome::FeasibleFound(_) => ("feasible", f64::NAN),
                FindOutcome::Unknown => ("unknown", res.report.as_ref().map_or(f64::NAN, |r| r.best_value)),
            };
            if let Some(r) = &res.report {
                counters[i] = r.counters;
            }
            text.push_str(&format!(
                ",{status},{},{},{}",
                fmt_g(f),
                counters[i].n_calls,
                fmt_g(counters[i].cost())
            ));
        }
        let rp = rp_cost(&counters[0], &counters[1]);
        rp_total += rp;
        text.push_str(&format!(",{}\n", fmt_g(rp)));
    }
    write_out(report, &text)?;
    eprintln!("problems={} rp_total={}", problems.len(), fmt_g(rp_total));
    Ok(0)
}
