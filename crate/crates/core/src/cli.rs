//! Command-line front end.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{RngExt, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde_json::{json, Value};

use crate::ecr::{EcrSolver, SeparableSystem, Solution};
use crate::error::{Error, Result};
use crate::matrices::{scale_into_conditions, MatrixKind};
use crate::tridiag::{TridiagonalMatrix, UNIT_ROUNDOFF};
use crate::verify::{self, ErrorModel, ErrorReport};
use crate::zeros::{build_zero_table, level_count, ZeroTable};

/// Identity checks pass at or below this discrepancy.
pub const CHECK_TOLERANCE: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(name = "ecr", version, about = "Extended cyclic reduction for separable block-tridiagonal systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute and store the zero table of Rn.
    BuildZeros(RunArgs),
    /// Solve (B ⊗ I + I ⊗ Rn) X = Y for a random right-hand side.
    Solve(RunArgs),
    /// Run the determinant identity checks and the certification conditions.
    Verify(RunArgs),
    /// Time preprocessing and solve over several repeats.
    Bench(RunArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MatrixArg {
    M1,
    M2,
    Poisson,
    File,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long, value_enum, default_value = "m1")]
    pub matrix: MatrixArg,
    /// Level count; Rn has order 2^k - 1.
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    /// Block order of B.
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    /// Bisection tolerance.
    #[arg(long, default_value_t = UNIT_ROUNDOFF)]
    pub kappa: f64,
    /// Check the conditions first and attach the forward-error bounds.
    #[arg(long)]
    pub certify: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rn as JSON {"order", "diag", "sub", "super"}.
    #[arg(long)]
    pub rn_file: Option<PathBuf>,
    /// B in the same format.
    #[arg(long)]
    pub b_file: Option<PathBuf>,
    /// Precomputed zero table.
    #[arg(long)]
    pub zeros: Option<PathBuf>,
    /// Zero table (build-zeros) or solution (solve) output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Worker threads; falls back to ECR_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Rescale both matrices so max |b_i ± (|a_i|+|a_i+1|)| is just below 1.
    #[arg(long)]
    pub normalize: bool,
    /// Bench repeats.
    #[arg(long, default_value_t = 5)]
    pub repeat: usize,
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ConditionViolation(_) => 2,
                _ => 1,
            }
        }
    }
}

fn thread_count(args: &RunArgs) -> Option<usize> {
    args.threads.or_else(|| {
        std::env::var("ECR_THREADS")
            .ok()
            .and_then(|v| v.trim().parse().ok())
    })
}

pub fn run(cmd: &Command) -> Result<i32> {
    let args = match cmd {
        Command::BuildZeros(a) | Command::Solve(a) | Command::Verify(a) | Command::Bench(a) => a,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(args) {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Io(format!("thread pool: {e}")))?;
    pool.install(|| match cmd {
        Command::BuildZeros(a) => build_zeros_cmd(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Bench(a) => bench_cmd(a),
    })
}

fn load_matrix(path: &Path) -> Result<TridiagonalMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn kind(arg: MatrixArg) -> Option<MatrixKind> {
    match arg {
        MatrixArg::M1 => Some(MatrixKind::M1),
        MatrixArg::M2 => Some(MatrixKind::M2),
        MatrixArg::Poisson => Some(MatrixKind::Poisson),
        MatrixArg::File => None,
    }
}

/// `(B, Rₙ)` from the named builders or from files.
pub fn build_matrices(args: &RunArgs) -> Result<(TridiagonalMatrix, TridiagonalMatrix)> {
    let (b, rn) = match kind(args.matrix) {
        Some(kd) => {
            if args.k == 0 || args.k > 24 {
                return Err(Error::DimensionMismatch(format!("k = {} out of range 1..=24", args.k)));
            }
            let rn = match &args.rn_file {
                Some(p) => load_matrix(p)?,
                None => kd.build((1usize << args.k) - 1)?,
            };
            let b = match &args.b_file {
                Some(p) => load_matrix(p)?,
                None => kd.build(args.m)?,
            };
            (b, rn)
        }
        None => {
            let rn = args
                .rn_file
                .as_deref()
                .ok_or_else(|| Error::Io("--matrix file needs --rn-file".into()))?;
            let b = args
                .b_file
                .as_deref()
                .ok_or_else(|| Error::Io("--matrix file needs --b-file".into()))?;
            (load_matrix(b)?, load_matrix(rn)?)
        }
    };
    if args.normalize {
        Ok((scale_into_conditions(&b), scale_into_conditions(&rn)))
    } else {
        Ok((b, rn))
    }
}

/// Uniform `[-1, 1]` blocks from SplitMix64.
pub fn random_rhs(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

fn config_json(command: &str, args: &RunArgs, b: &TridiagonalMatrix, rn: &TridiagonalMatrix) -> Value {
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    json!({
        "command": command,
        "matrix": format!("{:?}", args.matrix).to_lowercase(),
        "k": level_count(rn.order()).ok(),
        "m": b.order(),
        "n": rn.order(),
        "kappa": args.kappa,
        "certify": args.certify,
        "seed": args.seed,
        "normalize": args.normalize,
        "threads": thread_count(args),
        "rn_file": path(&args.rn_file),
        "b_file": path(&args.b_file),
        "zeros": path(&args.zeros),
    })
}

fn bounds_json(rep: Option<&ErrorReport>) -> Value {
    let get = |f: fn(&ErrorReport) -> Option<f64>| rep.and_then(f);
    json!({
        "C1": get(|r| r.bound_c1),
        "C2": get(|r| r.bound_c2),
        "C3": get(|r| r.bound_c3),
        "Q_max": get(|r| r.bound_q_max),
        "xi": get(|r| r.xi),
    })
}

struct Report {
    config: Value,
    timings: serde_json::Map<String, Value>,
    residual: Option<f64>,
    error: Option<ErrorReport>,
    checks: Value,
    certified: Option<bool>,
    extra: serde_json::Map<String, Value>,
}

impl Report {
    fn new(config: Value) -> Self {
        Self {
            config,
            timings: serde_json::Map::new(),
            residual: None,
            error: None,
            checks: json!({
                "main_identity": null,
                "det_lemma": null,
                "appendix": null,
                "conditions": null,
            }),
            certified: None,
            extra: serde_json::Map::new(),
        }
    }

    fn time(&mut self, key: &str, start: Instant) {
        self.timings
            .insert(key.into(), json!(start.elapsed().as_secs_f64() * 1e3));
    }

    fn conditions(&mut self, rep: &ErrorReport) {
        self.checks["conditions"] = json!({
            "pass": rep.conditions_ok,
            "diagnostics": rep.diagnostics,
        });
    }

    fn emit(self, dest: Option<&Path>) -> Result<()> {
        let mut v = json!({
            "config": self.config,
            "timings_ms": Value::Object(self.timings),
            "residual_rel": self.residual,
            "bounds": bounds_json(self.error.as_ref()),
            "checks": self.checks,
            "certified": self.certified,
        });
        if let Some(rep) = &self.error {
            v["error_report"] = serde_json::to_value(rep)?;
        }
        for (key, val) in self.extra {
            v[key] = val;
        }
        let text = serde_json::to_string_pretty(&v)? + "\n";
        match dest {
            Some(p) => std::fs::write(p, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

fn obtain_table(args: &RunArgs, rn: &TridiagonalMatrix, report: &mut Report) -> Result<ZeroTable> {
    let start = Instant::now();
    let table = match &args.zeros {
        Some(p) => ZeroTable::load(p)?,
        None => build_zero_table(rn, level_count(rn.order())?, args.kappa)?,
    };
    if table.n() != rn.order() {
        return Err(Error::DimensionMismatch(format!(
            "zero table is for {} blocks, Rn has order {}",
            table.n(),
            rn.order()
        )));
    }
    report.time("zeros", start);
    Ok(table)
}

fn build_zeros_cmd(args: &RunArgs) -> Result<i32> {
    let (b, rn) = build_matrices(args)?;
    let mut report = Report::new(config_json("build-zeros", args, &b, &rn));
    let start = Instant::now();
    let table = build_zero_table(&rn, level_count(rn.order())?, args.kappa)?;
    report.time("zeros", start);
    report.extra.insert("zero_entries".into(), json!(table.len()));
    report.extra.insert("bisection_work".into(), json!(table.work()));
    match &args.out {
        Some(p) => table.save(p)?,
        None => return Err(Error::Io("build-zeros needs --out".into())),
    }
    report.emit(args.report.as_deref())?;
    Ok(0)
}

fn solution_json(sol: &Solution) -> Result<String> {
    Ok(serde_json::to_string(&json!({ "x": sol.x }))? + "\n")
}

fn solve_cmd(args: &RunArgs) -> Result<i32> {
    let total = Instant::now();
    let (b, rn) = build_matrices(args)?;
    let mut report = Report::new(config_json("solve", args, &b, &rn));
    let rhs = random_rhs(rn.order(), b.order(), args.seed);
    let sys = SeparableSystem::new(b, rn, rhs)?;
    let table = obtain_table(args, sys.rn(), &mut report)?;

    let mut code = 0;
    if args.certify {
        let start = Instant::now();
        let rep = verify::certify(&sys, &table, &ErrorModel::double())?;
        report.time("certify", start);
        report.conditions(&rep);
        report.certified = Some(rep.certified);
        if !rep.conditions_ok {
            code = 2;
        }
        report.error = Some(rep);
    }
    if code == 0 {
        let start = Instant::now();
        let sol = EcrSolver::new(&sys, &table)?.solve()?;
        report.time("solve", start);
        report.residual = Some(sys.residual_rel(&sol.x));
        if let Some(rep) = report.error.as_mut() {
            rep.residual_rel = report.residual;
        }
        if let Some(p) = &args.out {
            std::fs::write(p, solution_json(&sol)?)?;
        }
    }
    report.time("total", total);
    report.emit(args.report.as_deref())?;
    if code == 2 {
        eprintln!("error: certification conditions violated");
    }
    Ok(code)
}

fn verify_cmd(args: &RunArgs) -> Result<i32> {
    let total = Instant::now();
    let (b, rn) = build_matrices(args)?;
    let mut report = Report::new(config_json("verify", args, &b, &rn));
    let k = level_count(rn.order())?;
    let mut all_pass = true;
    let mut check = |v: f64| {
        let pass = v <= CHECK_TOLERANCE;
        all_pass &= pass;
        json!({ "discrepancy": v, "pass": pass })
    };

    let start = Instant::now();
    let sym = rn.is_symmetric();
    if sym {
        let xs = verify::sample_points(&rn, k, (-3.0, -0.01), 10, args.seed, 1e-6)?;
        report.checks["main_identity"] = check(verify::check_main_identity(&rn, k, &xs)?);
        if k >= 3 {
            let (l, r) = verify::check_appendix_identities(&rn, k, &xs)?;
            report.checks["appendix"] = check(l.max(r));
        }
    }
    if rn.order() >= 2 {
        report.checks["det_lemma"] = check(verify::check_det_lemma(&rn)?);
    }
    report.time("identities", start);

    let rhs = random_rhs(rn.order(), b.order(), args.seed);
    let sys = SeparableSystem::new(b, rn, rhs)?;
    let start = Instant::now();
    let table = obtain_table(args, sys.rn(), &mut report)?;
    let rep = verify::certify(&sys, &table, &ErrorModel::double())?;
    report.time("certify", start);
    report.conditions(&rep);
    report.certified = Some(rep.certified);
    report.error = Some(rep);
    report.time("total", total);
    report.emit(args.report.as_deref())?;
    Ok(if all_pass { 0 } else { 1 })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn bench_cmd(args: &RunArgs) -> Result<i32> {
    let (b, rn) = build_matrices(args)?;
    let mut report = Report::new(config_json("bench", args, &b, &rn));
    let rhs = random_rhs(rn.order(), b.order(), args.seed);
    let sys = SeparableSystem::new(b, rn, rhs)?;
    let k = sys.k();
    let repeat = args.repeat.max(1);
    let mut tz = Vec::new();
    let mut ts = Vec::new();
    let mut work = 0;
    let mut residual = 0.0;
    for _ in 0..repeat {
        let start = Instant::now();
        let table = build_zero_table(sys.rn(), k, args.kappa)?;
        tz.push(start.elapsed().as_secs_f64() * 1e3);
        work = table.work();
        let start = Instant::now();
        let sol = EcrSolver::new(&sys, &table)?.solve()?;
        ts.push(start.elapsed().as_secs_f64() * 1e3);
        residual = sys.residual_rel(&sol.x);
    }
    report.timings.insert("zeros".into(), json!(median(tz)));
    report.timings.insert("solve".into(), json!(median(ts)));
    report.residual = Some(residual);
    report.extra.insert("repeat".into(), json!(repeat));
    report.extra.insert("bisection_work".into(), json!(work));
    report.emit(args.report.as_deref())?;
    Ok(0)
}
