//! Command-line driver: reads a JSON run configuration, runs one of the
//! `verify`, `sweep`, `product` or `fractal` commands and writes JSON and
//! CSV reports.
//!
//! Exit codes: 0 when every check passes, 1 on a mathematical failure,
//! 2 on a usage or configuration error.

pub mod commands;
pub mod config;
pub mod suite;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

pub use commands::{cmd_fractal, cmd_product, cmd_sweep, cmd_verify, Outcome};
pub use config::{CommandKind, RunConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "MODKK_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("failure: {0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "modkk",
    version,
    about = "Verify modular cycles, their lifts and Kasparov products"
)]
pub struct Args {
    /// Command to run; falls back to `command` in the config file.
    #[arg(value_enum)]
    pub command: Option<CommandKind>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run a single named check (verify) or estimate (sweep).
    #[arg(long)]
    pub only: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tolerance for every selected check.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Merges the config file and the flags.
pub fn resolve(args: &Args) -> Result<(CommandKind, RunConfig), CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    let command = match (args.command, cfg.command) {
        (Some(a), Some(c)) if a != c => {
            return Err(CliError::Usage(format!(
                "command {a:?} conflicts with config command {c:?}"
            )))
        }
        (Some(a), _) => a,
        (None, Some(c)) => c,
        (None, None) => return Err(CliError::Usage("no command given".into())),
    };
    cfg.command = Some(command);
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    if let Some(only) = &args.only {
        match command {
            CommandKind::Verify => cfg.verify.only = Some(only.clone()),
            CommandKind::Sweep => cfg.sweep.estimates = vec![only.clone()],
            _ => return Err(CliError::Usage("--only applies to verify and sweep".into())),
        }
    }
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::Usage(format!(
                "--tol must be positive, got {tol}"
            )));
        }
        let names: Vec<&str> = match &cfg.verify.only {
            Some(n) => vec![n.as_str()],
            None => suite::check_names(),
        };
        for n in names {
            cfg.tolerances.insert(n.to_string(), tol);
        }
    }
    Ok((command, cfg))
}

pub fn execute(command: CommandKind, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match command {
        CommandKind::Verify => cmd_verify(cfg),
        CommandKind::Sweep => cmd_sweep(cfg),
        CommandKind::Product => cmd_product(cfg),
        CommandKind::Fractal => cmd_fractal(cfg),
    }
}

/// Writes `report.json` and the auxiliary files into `dir`.
pub fn write_outputs(dir: &std::path::Path, outcome: &Outcome) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Usage(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join("report.json"), outcome.report_text()).map_err(io)?;
    for (name, contents) in &outcome.files {
        std::fs::write(dir.join(name), contents).map_err(io)?;
    }
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))
        })?;
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Parses arguments, runs the command and prints the report; returns the
/// exit code.
pub fn run<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{e}");
            return EXIT_PASS;
        }
    };
    let result = configure_threads()
        .and_then(|_| resolve(&args))
        .and_then(|(command, cfg)| {
            let outcome = execute(command, &cfg)?;
            if let Some(dir) = &cfg.output_dir {
                write_outputs(dir, &outcome)?;
            }
            Ok(outcome)
        });
    match result {
        Ok(outcome) => {
            let _ = stdout.write_all(outcome.report_text().as_bytes());
            if outcome.passed {
                EXIT_PASS
            } else {
                EXIT_FAILURE
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}
