//! `rubric-bn`: batch front-end for rubric-derived noisy-OR networks.
//!
//! Exit codes: 0 on success, 1 on validation or parse errors, 2 when the
//! evidence of some pupil has zero probability under the model.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "rubric-bn",
    version,
    about = "Compile assessment rubrics into noisy-OR networks and assess pupils"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug, clap::Args)]
struct ModelArgs {
    /// Rubric document (JSON).
    #[arg(long)]
    rubric: PathBuf,
    /// Parameter document (JSON); its file stem names the parameter set.
    #[arg(long)]
    params: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile a rubric and parameter set into a network.
    Compile {
        #[command(flatten)]
        model: ModelArgs,
        /// Write the network here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode pupil records into answer-node evidence.
    Encode {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        pupil: Option<String>,
    },
    /// Posterior skill probabilities per pupil.
    Infer {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        pupil: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Average CAT score, probabilistic score and their correlation.
    Score {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Rank unobserved tasks by expected information gain.
    Suggest {
        #[command(flatten)]
        model: ModelArgs,
        /// Observations so far, in dataset format.
        #[arg(long)]
        evidence: PathBuf,
        /// Pupil to read from the evidence file when it holds several.
        #[arg(long)]
        pupil: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run the assessment service.
    Serve {
        /// Model to register at startup.
        #[arg(long, requires = "params")]
        rubric: Option<PathBuf>,
        #[arg(long, requires = "rubric")]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
        /// Persist models and session logs here.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Compare the engine with the brute-force oracle on random networks.
    OracleCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        cases: usize,
    },
    /// Draw a synthetic cohort from the model's generative process.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the dataset here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RUBRIC_BN_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let impossible = err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<rubric_bn::Error>(),
            Some(rubric_bn::Error::ImpossibleEvidence { .. })
        )
    });
    if impossible {
        2
    } else {
        1
    }
}
