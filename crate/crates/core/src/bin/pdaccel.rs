//! Command-line front end: `gen`, `solve`, `bench`, `check`, `rate`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 solver failure,
//! 3 certificate violation found by `check`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pdaccel::format::to_json;
use pdaccel::harness::{
    audit_rows, prepare_instance, rate_fit, run_experiment, run_suite, ExperimentConfig, RunStatus,
    Suite,
};
use pdaccel::problems::io::InstanceFile;
use pdaccel::problems::{NnqpDist, ProblemSpec};
use pdaccel::record::{read_csv_file, RunRecord};

const USAGE: u8 = 1;
const SOLVER: u8 = 2;
const VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pdaccel",
    version,
    about = "Accelerated primal-dual solvers with rate certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen {
        /// ecqp, nnqp, two_block_qp, tv or svm.
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        /// NNQP distribution of B: gaussian or uniform.
        #[arg(long, default_value = "gaussian")]
        dist: NnqpDist,
        /// TV image side length.
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0.04)]
        mu: f64,
        /// SVM feature count.
        #[arg(long)]
        p: Option<usize>,
        /// SVM number of informative features.
        #[arg(long, default_value_t = 50)]
        s: usize,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long, default_value_t = 0.01)]
        mu1: f64,
        #[arg(long, default_value_t = 0.01)]
        mu2: f64,
        /// Compute and embed a reference solution.
        #[arg(long)]
        reference: bool,
        #[arg(long, default_value_t = 1e-9)]
        reference_tol: f64,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run one experiment configuration (JSON).
    Solve {
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run a suite of experiments concurrently.
    Bench {
        suite: PathBuf,
        /// Overrides `output_dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Audit the certificates recorded in a CSV trace.
    Check {
        trace: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Fit the log-log slope of a trace column.
    Rate {
        trace: PathBuf,
        #[arg(long, default_value = "obj_err")]
        field: String,
        #[arg(long, default_value_t = 10)]
        k_lo: usize,
        #[arg(long, default_value_t = 300)]
        k_hi: usize,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn spec_from_args(cmd: &Command) -> Result<ProblemSpec, String> {
    let Command::Gen {
        family,
        seed,
        m,
        n,
        dist,
        size,
        noise,
        mu,
        p,
        s,
        rho,
        mu1,
        mu2,
        ..
    } = cmd
    else {
        unreachable!()
    };
    let need = |v: Option<usize>, name: &str| v.ok_or(format!("--{name} is required for {family}"));
    let seed = *seed;
    Ok(match family.as_str() {
        "ecqp" => ProblemSpec::Ecqp {
            m: need(*m, "m")?,
            n: need(*n, "n")?,
            seed,
        },
        "nnqp" => ProblemSpec::Nnqp {
            m: need(*m, "m")?,
            n: need(*n, "n")?,
            seed,
            dist: *dist,
        },
        "two_block_qp" => ProblemSpec::TwoBlockQp {
            m: need(*m, "m")?,
            n: need(*n, "n")?,
            seed,
        },
        "tv" => ProblemSpec::Tv {
            size: *size,
            noise: *noise,
            mu: *mu,
            seed,
        },
        "svm" => ProblemSpec::Svm {
            m: need(*m, "m")?,
            p: need(*p, "p")?,
            s: *s,
            rho: *rho,
            mu1: *mu1,
            mu2: *mu2,
            seed,
        },
        other => return Err(format!("unknown family {other:?}")),
    })
}

fn gen(cmd: &Command) -> ExitCode {
    let Command::Gen {
        reference,
        reference_tol,
        out,
        ..
    } = cmd
    else {
        unreachable!()
    };
    let spec = match spec_from_args(cmd) {
        Ok(s) => s,
        Err(e) => return fail(USAGE, e),
    };
    let built = if *reference {
        prepare_instance(&spec, *reference_tol, None).map_err(|e| (SOLVER, e))
    } else {
        spec.build().map_err(|e| (USAGE, e))
    };
    let instance = match built {
        Ok(i) => i,
        Err((code, e)) => return fail(code, e),
    };
    let text = match InstanceFile::from_instance(&spec, &instance).and_then(|f| f.to_json()) {
        Ok(t) => t,
        Err(e) => return fail(USAGE, e),
    };
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                return fail(USAGE, e);
            }
        }
        None => println!("{text}"),
    }
    ExitCode::SUCCESS
}

fn solve(config: &Path, out_dir: &Option<PathBuf>) -> ExitCode {
    let mut cfg = match ExperimentConfig::read(config) {
        Ok(c) => c,
        Err(e) => return fail(USAGE, format!("{}: {e}", config.display())),
    };
    if out_dir.is_some() {
        cfg.output.dir = out_dir.clone();
    }
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(SOLVER, e),
    };
    match to_json(&outcome.summary, true) {
        Ok(s) => println!("{s}"),
        Err(e) => return fail(SOLVER, e),
    }
    match outcome.summary.status {
        RunStatus::Ok => ExitCode::SUCCESS,
        RunStatus::ConfigError => ExitCode::from(USAGE),
        RunStatus::SolverError => ExitCode::from(SOLVER),
    }
}

fn bench(suite: &Path, out_dir: &Option<PathBuf>) -> ExitCode {
    let mut s: Suite = match std::fs::read_to_string(suite)
        .map_err(pdaccel::Error::from)
        .and_then(|t| Ok(serde_json::from_str(&t)?))
    {
        Ok(s) => s,
        Err(e) => return fail(USAGE, format!("{}: {e}", suite.display())),
    };
    if out_dir.is_some() {
        s.output_dir = out_dir.clone();
    }
    let summaries = match run_suite(&s) {
        Ok(v) => v,
        Err(e) => return fail(SOLVER, e),
    };
    for r in &summaries {
        println!(
            "{:<60} {:?} iters={} obj_err={}",
            r.name,
            r.status,
            r.iterations,
            r.final_obj_err.map_or("-".into(), |v| format!("{v:e}"))
        );
    }
    if summaries.iter().any(|r| r.status == RunStatus::ConfigError) {
        ExitCode::from(USAGE)
    } else if summaries.iter().any(|r| r.status == RunStatus::SolverError) {
        ExitCode::from(SOLVER)
    } else {
        ExitCode::SUCCESS
    }
}

fn check(trace: &Path, tol: f64) -> ExitCode {
    let rows = match read_csv_file(trace) {
        Ok(r) => r,
        Err(e) => return fail(USAGE, format!("{}: {e}", trace.display())),
    };
    let report = audit_rows(&rows, tol);
    for v in &report.violations {
        println!("VIOLATION k={} {}: {}", v.k, v.kind, v.detail);
    }
    println!(
        "{} rows, {} checks, {} violations",
        report.rows,
        report.checks,
        report.violations.len()
    );
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(VIOLATION)
    }
}

fn rate(trace: &Path, field: &str, k_lo: usize, k_hi: usize) -> ExitCode {
    let rows = match read_csv_file(trace) {
        Ok(r) => r,
        Err(e) => return fail(USAGE, format!("{}: {e}", trace.display())),
    };
    let record = RunRecord {
        rows,
        ..Default::default()
    };
    match rate_fit(&record, k_lo, k_hi, field) {
        Ok(s) => {
            println!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(USAGE, e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match &cli.command {
        cmd @ Command::Gen { .. } => gen(cmd),
        Command::Solve { config, out_dir } => solve(config, out_dir),
        Command::Bench { suite, out_dir } => bench(suite, out_dir),
        Command::Check { trace, tol } => check(trace, *tol),
        Command::Rate {
            trace,
            field,
            k_lo,
            k_hi,
        } => rate(trace, field, *k_lo, *k_hi),
    }
}
