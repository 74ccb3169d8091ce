//! The `adabatch` command line.
//!
//! Exit codes: 0 on success, 1 on a usage error, 2 when an experiment or a
//! verification check fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::batch::{
    inner_orth_batch_sizes, norm_test_batch_size, optimal_split, rate_bound, BatchLimits,
    ToleranceConfig,
};
use crate::error::{Error, Result};
use crate::experiment::{
    csv_string, parse_config, parse_controllers, parse_mode, run_experiment, worker_threads,
    write_csv, write_svg, Case, ExperimentSpec, ObjectiveKind, RunConfig,
};
use crate::linalg::Vector;
use crate::verify::{run_all, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "adabatch",
    version,
    about = "Adaptive batch-size SGD experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a replicated experiment and write the aggregated curves.
    Run(RunArgs),
    /// Run the numerical checks and print one pass/fail line each.
    Verify(VerifyArgs),
    /// Print the optimal (θ, ν) split and the resulting batch sizes at a point.
    Split(SplitArgs),
    /// Print the linear rate bound for k = 0..=K.
    Rate(RateArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// quad3 or quad2.
    #[arg(long)]
    objective: Option<String>,
    /// Condition-number parameter of quad2.
    #[arg(long)]
    kappa: Option<f64>,
    /// Built-in tolerance cases, e.g. `3` or `1,2,3`.
    #[arg(long, value_delimiter = ',')]
    case: Vec<u32>,
    /// Comma-separated subset of norm, innerOrth, innerOrthOptimalSplit.
    #[arg(long)]
    controllers: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Gradient evaluations per run.
    #[arg(long)]
    budget: Option<u64>,
    /// oracle or plugin.
    #[arg(long)]
    mode: Option<String>,
    /// CSV output; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Directory for the experiment CSV fixtures.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// quad3 or quad2.
    #[arg(long, default_value = "quad3")]
    objective: String,
    #[arg(long, default_value_t = 100.0)]
    kappa: f64,
    /// The point, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        required = true
    )]
    xi: Vec<f64>,
    #[arg(long)]
    epsilon: f64,
}

#[derive(Debug, Args)]
struct RateArgs {
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    epsilon: f64,
    /// Last iteration of the table.
    #[arg(long, default_value_t = 30)]
    k: u32,
}

/// Applies the flags on top of a config file (or the defaults).
fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => parse_config("")?,
    };
    let spec = &mut cfg.spec;
    if args.objective.is_some() || args.kappa.is_some() {
        let kappa = args.kappa.unwrap_or(match spec.objective {
            ObjectiveKind::Quad2 { kappa } => kappa,
            ObjectiveKind::Quad3 => 100.0,
        });
        let objective = ObjectiveKind::parse(
            args.objective.as_deref().unwrap_or(spec.objective.name()),
            kappa,
        )?;
        if objective.name() != spec.objective.name() {
            spec.xi0 = objective.default_xi0();
        }
        spec.objective = objective;
    }
    if !args.case.is_empty() {
        spec.cases = args
            .case
            .iter()
            .map(|&c| Case::table(c))
            .collect::<Result<_>>()?;
    }
    if let Some(c) = &args.controllers {
        spec.controllers = parse_controllers(c)?;
    }
    if let Some(r) = args.reps {
        spec.replications = r;
    }
    if let Some(s) = args.seed {
        spec.base_seed = s;
    }
    if let Some(b) = args.budget {
        spec.budget = b;
    }
    if let Some(m) = &args.mode {
        spec.mode = parse_mode(m)?;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if args.svg.is_some() {
        cfg.svg = args.svg.clone();
    }
    cfg.spec.validate()?;
    Ok(cfg)
}

fn describe(spec: &ExperimentSpec) -> String {
    format!(
        "{} | cases {:?} | controllers {:?} | {} replications | budget {} | {}",
        spec.objective.name(),
        spec.cases.iter().map(|c| c.label).collect::<Vec<_>>(),
        spec.controllers
            .iter()
            .map(|k| k.as_str())
            .collect::<Vec<_>>(),
        spec.replications,
        spec.budget,
        spec.mode.as_str()
    )
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = match run_config(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return Ok(EXIT_USAGE);
        }
    };
    let _ = writeln!(err, "{}", describe(&cfg.spec));
    let result = run_experiment(&cfg.spec)?;
    for ((kind, case), curve) in &result.curves {
        let failed = result
            .failed_runs
            .get(&(*kind, *case))
            .copied()
            .unwrap_or(0);
        let _ = writeln!(
            err,
            "{:>22} #{case}: final median gap {:.4e} [{:.4e}, {:.4e}], {failed} failed runs",
            kind.as_str(),
            curve.median.last().copied().unwrap_or(f64::NAN),
            curve.lo95.last().copied().unwrap_or(f64::NAN),
            curve.hi95.last().copied().unwrap_or(f64::NAN),
        );
    }
    match &cfg.out {
        Some(path) => write_csv(&result.curves, path)?,
        None => out.write_all(csv_string(&result.curves)?.as_bytes())?,
    }
    if let Some(path) = &cfg.svg {
        write_svg(&result.curves, path)?;
    }
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let opts = VerifyOptions {
        seed: args.seed,
        replications: args.reps,
        threads: worker_threads()?,
        out_dir: args.out_dir.clone(),
    };
    let outcomes = run_all(&opts, |o| {
        let _ = writeln!(out, "{}", o.line());
        let _ = out.flush();
    })?;
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let _ = writeln!(
        out,
        "{} of {} checks passed",
        outcomes.len() - failed,
        outcomes.len()
    );
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_split(args: &SplitArgs, out: &mut dyn Write) -> Result<i32> {
    let objective = ObjectiveKind::parse(&args.objective, args.kappa)?.build()?;
    let xi = Vector::new(args.xi.clone())?;
    let sigma = objective.exact_covariance(&xi)?;
    let grad = objective.exact_gradient(&xi)?;
    let (theta, nu) = optimal_split(&sigma, &grad, args.epsilon)?;
    let limits = BatchLimits::default();
    let b_norm = norm_test_batch_size(&sigma, &grad, args.epsilon, &limits)?;
    let (b_inner, b_orth) = inner_orth_batch_sizes(&sigma, &grad, theta, nu, &limits)?;
    let _ = writeln!(out, "theta   {theta:.17e}");
    let _ = writeln!(out, "nu      {nu:.17e}");
    let _ = writeln!(out, "b_norm  {b_norm}");
    let _ = writeln!(out, "b_inner {b_inner}");
    let _ = writeln!(out, "b_orth  {b_orth}");
    Ok(EXIT_OK)
}

fn cmd_rate(args: &RateArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = ToleranceConfig::from_epsilon(args.epsilon)?;
    if !(args.kappa >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "kappa must be >= 1, got {}",
            args.kappa
        )));
    }
    let _ = writeln!(out, "k,bound");
    for k in 0..=args.k {
        let _ = writeln!(out, "{k},{:.16e}", rate_bound(args.kappa, &cfg, k));
    }
    Ok(EXIT_OK)
}

/// Runs the command line `argv` (including the program name) and returns the
/// exit code.
pub fn main_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out, err),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Split(a) => cmd_split(a, out),
        Command::Rate(a) => cmd_rate(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e @ (Error::InvalidConfig(_) | Error::DimensionMismatch { .. })) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}
