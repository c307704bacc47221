//! `hyperfrac`: batch experiment runner.
//!
//! `hyperfrac <kind> --config <path> [--out <dir>] [--seed <u64>] [--threads <k>]`
//! runs one experiment and writes its data files and `summary.json`.
//! `hyperfrac validate --config <path>` reports schema problems without running.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure or a missed tolerance.

mod config;
mod error;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_config, validate_value, Kind};
use error::{CliError, EXIT_CONFIG, EXIT_OK};
use output::Outputs;

#[derive(Parser)]
#[command(name = "hyperfrac", version, about = "Fractional operators, exterior problems and DN maps on hyperbolic space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plancherel identity for radial bumps.
    TransformCheck(RunArgs),
    /// Multiplier, semigroup and kernel routes for (−Δ)^s (or the two FEM DN routes).
    OperatorEquivalence(RunArgs),
    /// Heat kernel against its two-sided global bound.
    HeatkernelBounds(RunArgs),
    /// One exterior-value problem.
    Solve(RunArgs),
    /// DN matrix by the bilinear-form and kernel routes.
    Dn(RunArgs),
    /// Integral identity over a sweep of potential pairs.
    IntegralIdentity(RunArgs),
    /// Moment decoupling for a set of exponents.
    Entangle(RunArgs),
    /// Runge approximation under control enrichment.
    Runge(RunArgs),
    /// Potential recovery from two-mesh DN data.
    Recover(RunArgs),
    /// Check a configuration file without running it.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's `out`, else `out/<kind>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the numerical core.
    #[arg(long, env = "HYPERFRAC_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Kind to validate against when the file has no `kind` field.
    #[arg(long)]
    kind: Option<Kind>,
}

fn run(kind: Kind, args: &RunArgs) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = parse_config(&text, kind)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(k) = args.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {k} threads: {e}")))?;
    }
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| Path::new("out").join(kind.as_str()));
    let mut out = Outputs::new(&dir);
    experiments::run(&cfg, &mut out)?;
    match out.finish(&cfg)? {
        0 => Ok(dir),
        n => Err(CliError::Checks(n)),
    }
}

fn validate(args: &ValidateArgs) -> i32 {
    let report = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).map_err(|e| format!("invalid JSON: {e}")))
        .map(|v| validate_value(&v, args.kind));
    match report {
        Ok(r) => {
            println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            if r.is_empty() {
                EXIT_OK
            } else {
                EXIT_CONFIG
            }
        }
        Err(e) => {
            eprintln!("hyperfrac: {e}");
            EXIT_CONFIG
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Validate(a) => return ExitCode::from(validate(a) as u8),
        Command::TransformCheck(a) => (Kind::TransformCheck, a),
        Command::OperatorEquivalence(a) => (Kind::OperatorEquivalence, a),
        Command::HeatkernelBounds(a) => (Kind::HeatkernelBounds, a),
        Command::Solve(a) => (Kind::Solve, a),
        Command::Dn(a) => (Kind::Dn, a),
        Command::IntegralIdentity(a) => (Kind::IntegralIdentity, a),
        Command::Entangle(a) => (Kind::Entangle, a),
        Command::Runge(a) => (Kind::Runge, a),
        Command::Recover(a) => (Kind::Recover, a),
    };
    match run(kind, args) {
        Ok(dir) => {
            println!("{kind}: all checks passed; results in {}", dir.display());
            ExitCode::from(EXIT_OK as u8)
        }
        Err(e) => {
            eprintln!("hyperfrac {kind}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
