//! `kfan`: command-line access to projections, directional derivatives, graph
//! checks, KKT residuals, second-order and constraint qualification checks, and
//! error-bound experiments.
//!
//! Exit codes: 0 ok, 1 negative verdict, 2 usage or parse error, 3 numeric failure.

mod commands;
mod json;

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kyfan::harness::{write_csv, SampleMode};
use kyfan::kkt::KktTriple;
use kyfan::{ConePoint, KyFanCone};
use serde::de::DeserializeOwned;

use commands::Report;
use json::{InstanceJson, Loaded, PointJson, TripleJson};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
}

impl From<kyfan::Error> for CliError {
    fn from(e: kyfan::Error) -> Self {
        match e {
            kyfan::Error::InvalidInput(_) | kyfan::Error::Dimension(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "kfan", version, about = "Ky Fan k-norm cone calculus and KKT diagnostics")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Random seed (flag > KFAN_SEED > 0).
    #[arg(long, global = true, env = "KFAN_SEED", default_value_t = 0)]
    seed: u64,
    /// Numerical tolerance (flag > KFAN_TOL > 1e-9).
    #[arg(long, global = true, env = "KFAN_TOL", default_value_t = 1e-9)]
    tol: f64,
    /// Number of samples or starts; each command has its own default.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Write the primary output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

/// Where a KKT-type command gets its problem from.
#[derive(Args)]
struct InstanceArgs {
    /// Instance JSON (inline, @file or - for stdin).
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    instance: Option<String>,
    /// Built-in fixture: scalar-nls, rank-deficient or random-nls:<seed>.
    #[arg(long)]
    fixture: Option<String>,
    /// KKT triple JSON (inline, @file or -); defaults to the fixture reference or a solve.
    #[arg(long)]
    triple: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Perturbed,
    Jitter,
}

#[derive(Subcommand)]
enum Command {
    /// Project a point onto the cone.
    Project {
        /// Point JSON {"t": .., "x": {"rows", "cols", "data"}} (inline, @file or -).
        #[arg(long)]
        point: String,
        #[arg(long)]
        k: usize,
    },
    /// Directional derivative of the projection with consistency checks.
    Dirderiv {
        /// Base point JSON (inline, @file or -).
        #[arg(long)]
        point: String,
        /// Direction JSON (inline, @file or -).
        #[arg(long)]
        direction: String,
        #[arg(long)]
        k: usize,
    },
    /// Compare the two graph-membership tests on generated pairs.
    GphCheck {
        /// Fixed base point JSON; random base points when absent.
        #[arg(long)]
        point: Option<String>,
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    /// KKT residual of a triple.
    Kkt(InstanceArgs),
    /// Sampled second-order sufficient condition.
    Sosc(InstanceArgs),
    /// Multi-start search for a certificate refuting the strict constraint qualification.
    Srcq(InstanceArgs),
    /// Multi-start search for a nonzero direction with vanishing KKT derivative.
    Calmness(InstanceArgs),
    /// Error-bound experiment on a least-squares instance (CSV output).
    ErrorBound {
        #[command(flatten)]
        source: InstanceArgs,
        /// Perturbation norms, ascending.
        #[arg(long, value_delimiter = ',', default_value = "1e-4,1e-3,1e-2")]
        scales: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Mode::Perturbed)]
        mode: Mode,
        /// Solver stopping tolerance for perturbed solves.
        #[arg(long, default_value_t = 1e-12)]
        stop_tol: f64,
        /// Write the summary JSON here; otherwise it goes to standard error.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

fn read_arg(arg: &str) -> Result<String, CliError> {
    if arg == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Usage(format!("stdin: {e}")))?;
        Ok(s)
    } else if let Some(path) = arg.strip_prefix('@') {
        std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{path}: {e}")))
    } else {
        Ok(arg.to_string())
    }
}

fn parse<T: DeserializeOwned>(arg: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(&read_arg(arg)?).map_err(|e| CliError::Usage(format!("{what}: {e}")))
}

fn point(arg: &str, what: &str) -> Result<ConePoint<f64>, CliError> {
    parse::<PointJson>(arg, what)?.to_point(what)
}

fn load(a: &InstanceArgs) -> Result<(Loaded, Option<KktTriple<f64>>), CliError> {
    let inst = match (&a.instance, &a.fixture) {
        (Some(s), None) => parse::<InstanceJson>(s, "instance")?.load()?,
        (None, Some(f)) => json::fixture(f)?,
        _ => return Err(CliError::Usage("give exactly one of --instance and --fixture".into())),
    };
    let triple = a.triple.as_deref().map(|s| parse::<TripleJson>(s, "triple")?.to_triple()).transpose()?;
    if let Some(t) = &triple {
        let d = kyfan::kkt::ProblemInstance::dims(&inst.qp);
        if t.x.x.shape() != (d.m, d.n) || t.y.x.shape() != (d.m, d.n) || t.lambda.len() != d.p {
            return Err(CliError::Usage(format!(
                "triple does not match the instance dimensions {}x{} with p = {}",
                d.m, d.n, d.p
            )));
        }
    }
    Ok((inst, triple))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Numeric(format!("{}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            writeln!(so, "{text}").map_err(|e| CliError::Numeric(format!("stdout: {e}")))
        }
    }
}

fn emit_report(out: &Option<PathBuf>, r: &Report) -> Result<(), CliError> {
    emit(out, &serde_json::to_string_pretty(&r.json).expect("json values serialize"))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let c = &cli.common;
    if !(c.tol > 0.0) || !c.tol.is_finite() {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let report = match &cli.command {
        Command::Project { point: p, k } => {
            let p = point(p, "point")?;
            commands::project(KyFanCone::new(p.m(), p.n(), *k)?, &p, kyfan::cone::BOUNDARY_TOL)?
        }
        Command::Dirderiv { point: p, direction, k } => {
            let p = point(p, "point")?;
            let d = point(direction, "direction")?;
            commands::dirderiv(KyFanCone::new(p.m(), p.n(), *k)?, &p, &d, c.tol)?
        }
        Command::GphCheck { point: p, m, n, k } => {
            let base = p.as_deref().map(|s| point(s, "point")).transpose()?;
            let (m, n) = base.as_ref().map_or((*m, *n), |b| (b.m(), b.n()));
            commands::gph_check(KyFanCone::new(m, n, *k)?, base.as_ref(), c.samples.unwrap_or(100), c.tol, c.seed)?
        }
        Command::Kkt(a) => {
            let (inst, t) = load(a)?;
            commands::kkt(&inst, t, c.tol)?
        }
        Command::Sosc(a) => {
            let (inst, t) = load(a)?;
            commands::sosc(&inst, t, c.samples.unwrap_or(200), c.tol, c.seed)?
        }
        Command::Srcq(a) => {
            let (inst, t) = load(a)?;
            commands::srcq(&inst, t, c.samples.unwrap_or(50), c.tol, c.seed)?
        }
        Command::Calmness(a) => {
            let (inst, t) = load(a)?;
            commands::calmness(&inst, t, c.samples.unwrap_or(50), c.tol.max(1e-6), c.seed)?
        }
        Command::ErrorBound { source, scales, mode, stop_tol, summary } => {
            let (inst, _) = load(source)?;
            let mode = match mode {
                Mode::Perturbed => SampleMode::Perturbed,
                Mode::Jitter => SampleMode::Jitter,
            };
            let run = commands::error_bound(&inst, scales.clone(), c.samples.unwrap_or(50), mode, c.seed, *stop_tol)?;
            let mut buf = Vec::new();
            write_csv(&run.output.records, &mut buf)?;
            let csv = String::from_utf8(buf).expect("csv output is utf-8");
            match &c.out {
                Some(p) => std::fs::write(p, &csv).map_err(|e| CliError::Numeric(format!("{}: {e}", p.display())))?,
                None => print!("{csv}"),
            }
            let text = serde_json::to_string_pretty(&run.report.json).expect("json values serialize");
            match summary {
                Some(p) => std::fs::write(p, &text).map_err(|e| CliError::Numeric(format!("{}: {e}", p.display())))?,
                None => eprintln!("{text}"),
            }
            eprintln!("{}", run.report.summary);
            return Ok(run.report.positive);
        }
    };
    emit_report(&c.out, &report)?;
    eprintln!("{}", report.summary);
    Ok(report.positive)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
