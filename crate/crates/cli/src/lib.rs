//! Config-driven front end: `solve`, `simulate` and `verify <scenario>`.
//!
//! Exit codes: 0 pass, 1 statistical failure, 2 configuration error,
//! 3 numerical or simulation failure, 4 violated precondition.

pub mod commands;
pub mod config;
pub mod output;
pub mod scenarios;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_simulate, cmd_solve, cmd_verify, Outcome};
pub use config::{Config, Format};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error in {field}: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Core(#[from] trimtree::Error),

    #[error("replica {replica}: {source}")]
    Replica { replica: usize, source: trimtree::Error },

    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Output { .. } => 2,
            CliError::Core(e) | CliError::Replica { source: e, .. } => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &trimtree::Error) -> i32 {
    use trimtree::Error as E;
    if e.is_precondition() {
        4
    } else if e.is_numerical() {
        3
    } else {
        match e {
            E::EventCap { .. } | E::PopulationCap { .. } => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "trimtree", version, about = "Superprocess semigroups, simulation and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write U_t f, U_t inf, the survival field and gamma per state.
    Solve(CommonArgs),
    /// Simulate superprocess replicas and write mass paths.
    Simulate(CommonArgs),
    /// Run a named verification scenario.
    Verify(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl CommonArgs {
    /// Loads the config and applies command-line overrides.
    pub fn load(&self) -> Result<Config, CliError> {
        let mut cfg = Config::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(r) = self.replicas {
            cfg.run.replicas = Some(r);
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.to_string_lossy().into_owned();
        }
        if let Some(s) = &self.scenario {
            cfg.scenario = Some(s.clone());
        }
        if let Some(f) = self.format {
            cfg.output.format = match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => a.load().and_then(|c| cmd_solve(&c)),
        Command::Simulate(a) => a.load().and_then(|c| cmd_simulate(&c)),
        Command::Verify(a) => a.load().and_then(|c| cmd_verify(&c)),
    };
    match result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if let Some(summary) = &outcome.summary {
                print!("{summary}");
            }
            if outcome.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
