use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gosurr::commands::{self, Overrides};
use gosurr::config::LevelChoice;
use gosurr::exec::Parallel;
use gosurr::CliError;

/// Goal-oriented adaptive surrogates for Bayesian inversion.
///
/// UQ_THREADS caps the number of worker threads.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the adaptive loop and write a run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave the run unfinished after this many iterations.
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
    /// Estimate the reference integral with a long chain.
    Reference {
        #[arg(long)]
        config: PathBuf,
        /// Post-burn-in chain states.
        #[arg(long)]
        samples: Option<usize>,
        /// Model level, or `exact` for the closed-form QoI.
        #[arg(long)]
        level: Option<LevelChoice>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error table of non-adaptive surrogates on uniform samples.
    Uniform {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        /// Single sample count instead of the configured list.
        #[arg(long)]
        samples: Option<usize>,
        /// Single model level instead of all of them.
        #[arg(long)]
        level: Option<LevelChoice>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continue a run from its checkpoint (file or run directory).
    Resume {
        path: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
    /// Summarize a run directory.
    Report { dir: PathBuf },
}

fn pool() -> Result<Parallel, CliError> {
    Parallel::from_env().map_err(|e| CliError::config(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            stop_after,
        } => pool().and_then(|p| {
            let o = Overrides {
                seed,
                out,
                stop_after,
                ..Default::default()
            };
            commands::run(&config, &o, &p).map(|d| eprintln!("run directory: {}", d.display()))
        }),
        Command::Reference {
            config,
            samples,
            level,
            seed,
            out,
        } => {
            let o = Overrides {
                seed,
                out,
                samples,
                level,
                ..Default::default()
            };
            commands::reference(&config, &o).map(|_| ())
        }
        Command::Uniform {
            config,
            runs,
            samples,
            level,
            seed,
            out,
        } => pool().and_then(|p| {
            let o = Overrides {
                seed,
                out,
                runs,
                samples,
                level,
                ..Default::default()
            };
            commands::uniform(&config, &o, &p).map(|_| ())
        }),
        Command::Resume { path, out, stop_after } => pool().and_then(|p| {
            let o = Overrides {
                out,
                stop_after,
                ..Default::default()
            };
            commands::resume(&path, &o, &p).map(|_| ())
        }),
        Command::Report { dir } => commands::report(&dir).map(|s| print!("{s}")),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
