//! `phylokern`: phylogeny-aware string kernels, kernel two-sample tests and
//! GP host-trait prediction for 16S rRNA datasets.
//!
//! Data goes to the files named on the command line; progress and timing go
//! to standard error. Exit codes: 0 success, 2 usage or configuration,
//! 3 invalid input data, 4 numerical failure.

mod commands;
mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{experiment, gp, kernel, mmd, simulate, tree};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(phylokern::Error),
}

impl From<phylokern::Error> for CliError {
    fn from(e: phylokern::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(e) if e.is_data_error() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => {
                write!(f, "{e}")?;
                let mut src = std::error::Error::source(e);
                while let Some(s) = src {
                    write!(f, ": {s}")?;
                    src = s.source();
                }
                Ok(())
            }
        }
    }
}

#[derive(Parser)]
#[command(name = "phylokern", version, about = "Phylogeny-aware string kernels for 16S rRNA data")]
struct Cli {
    /// Worker threads (results do not depend on this). Defaults to all cores.
    #[arg(long, global = true, env = "PHYLOKERN_THREADS")]
    threads: Option<usize>,

    /// Suppress timing summaries on standard error.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build OTU similarity or sample kernel matrices.
    #[command(subcommand)]
    Kernel(kernel::KernelCommand),
    /// Kernel two-sample test with a permutation p-value.
    MmdTest(mmd::MmdArgs),
    /// Gaussian-process host-trait models on precomputed kernels.
    #[command(subcommand)]
    Gp(gp::GpCommand),
    /// Simulate datasets from the Dirichlet-multinomial protocol.
    #[command(subcommand)]
    Simulate(simulate::SimulateCommand),
    /// Phylogenetic tree utilities.
    #[command(subcommand)]
    Tree(tree::TreeCommand),
    /// Desk-scale simulation studies, one tidy CSV row per replicate.
    Experiment(experiment::ExperimentArgs),
}

/// Prints a timing line unless `--quiet`.
pub struct Reporter {
    quiet: bool,
}

impl Reporter {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    }
    let rep = Reporter { quiet: cli.quiet };
    match cli.command {
        Command::Kernel(c) => kernel::run(c, &rep),
        Command::MmdTest(a) => mmd::run(a, &rep),
        Command::Gp(c) => gp::run(c, &rep),
        Command::Simulate(c) => simulate::run(c, &rep),
        Command::Tree(c) => tree::run(c, &rep),
        Command::Experiment(a) => experiment::run(a, &rep),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
