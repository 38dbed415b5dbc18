//! Command-line front end: config loading, command dispatch and output.

pub mod commands;
pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{execute, CliError, CommandKind, Outcome};
pub use config::{parse_config, parse_config_with_overrides, RunConfig};

/// Environment variable that sizes the worker pool; `0` or unset uses every core.
pub const THREADS_ENV: &str = "COXPRICER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "coxpricer", version, about = "Monte Carlo pricing and deltas under a CIR-driven jump intensity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long, global = true)]
    pub paths: Option<u64>,
    /// Delta method: wiener, jump_region, jump_smooth, fd, pathwise, mixed.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// csv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Output file; `-` for stdout.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Convergence target: asset, price, delta.
    #[arg(long, global = true)]
    pub target: Option<String>,
    /// Price through the Wiener weight.
    #[arg(long, global = true)]
    pub weighted: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Check the model inequalities and report each one.
    Validate,
    /// Estimate the call or sigmoid price.
    Price,
    /// Estimate the delta with the configured method.
    Delta,
    /// Strong-convergence study over the configured levels.
    Converge,
    /// Conditional closed-form price and delta averaged over intensity paths.
    Oracle,
}

impl From<Command> for CommandKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Validate => CommandKind::Validate,
            Command::Price => CommandKind::Price,
            Command::Delta => CommandKind::Delta,
            Command::Converge => CommandKind::Converge,
            Command::Oracle => CommandKind::Oracle,
        }
    }
}

impl Cli {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut o = Vec::new();
        if let Some(s) = self.seed {
            o.push(("run.seed", s.to_string()));
        }
        if let Some(p) = self.paths {
            o.push(("run.n_paths", p.to_string()));
        }
        if let Some(m) = &self.method {
            o.push(("run.method", m.clone()));
        }
        if let Some(f) = &self.format {
            o.push(("output.format", f.clone()));
        }
        if let Some(p) = &self.out {
            o.push(("output.path", p.clone()));
        }
        if let Some(t) = &self.target {
            o.push(("run.target", t.clone()));
        }
        if self.weighted {
            o.push(("run.weighted", "true".into()));
        }
        o
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| CliError::Threads(raw.clone()))?;
    // a pool that already exists is left alone
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|source| CliError::ReadConfig { path: path.display().to_string(), source })?,
        None => String::new(),
    };
    Ok(parse_config_with_overrides(&text, &cli.overrides())?)
}

fn write_artifact(cfg: &RunConfig, artifact: &str) -> Result<(), CliError> {
    let path = &cfg.output.path;
    let result = if path == "-" {
        std::io::stdout().lock().write_all(artifact.as_bytes())
    } else {
        std::fs::write(path, artifact)
    };
    result.map_err(|source| CliError::Write { path: path.clone(), source })
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = configure_threads().and_then(|_| load(&cli)).and_then(|cfg| {
        let outcome = execute(cli.command.into(), &cfg)?;
        write_artifact(&cfg, &outcome.artifact)?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            for note in &outcome.notes {
                eprintln!("{note}");
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
