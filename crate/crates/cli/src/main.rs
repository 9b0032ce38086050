//! `hls-lab`: hearing-loss simulation and paired-comparison experiment tool.
//!
//! Data goes to stdout or files; diagnostics go to stderr. Exit status is 0
//! iff the command succeeded.

mod cmd;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommonFlags, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "hls-lab", version, about = "Hearing-loss simulation and listening-test toolkit")]
struct Cli {
    #[command(flatten)]
    common: CommonFlags,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the hearing-loss simulation on a mono WAV file.
    Simulate {
        input: PathBuf,
        output: PathBuf,
        /// Compare against one pass of the static filter (needs no active loss).
        #[arg(long)]
        verify_linear: bool,
    },
    /// Print the active/passive split of the profile's hearing loss.
    Decompose {
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
        /// Extra alpha values, one row each (default: --alpha).
        #[arg(long = "alphas", value_delimiter = ',')]
        alphas: Vec<f64>,
    },
    /// Render every condition of each stimulus and level-match to the reference.
    Prepare(cmd::prepare::PrepareArgs),
    /// Create an experiment store from a prepare manifest and a design file.
    SessionBuild(cmd::session::BuildArgs),
    /// Enroll a participant in an existing store.
    Enroll {
        participant: String,
    },
    /// Serve sessions, audio and response collection over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
    },
    /// Thurstone scores, confidence intervals and HSD from a response log.
    Score(cmd::score::ScoreArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::load(&cli.common)?;
    if cli.common.show_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }
    let Some(command) = cli.command else {
        anyhow::bail!("no subcommand given (see --help)");
    };
    match command {
        Command::Simulate { input, output, verify_linear } => cmd::simulate::run(&cfg, &input, &output, verify_linear),
        Command::Decompose { json, alphas } => cmd::decompose::run(&cfg, &alphas, json),
        Command::Prepare(args) => cmd::prepare::run(&cfg, &args),
        Command::SessionBuild(args) => cmd::session::build(&cfg, &args),
        Command::Enroll { participant } => cmd::session::enroll(&cfg, &participant),
        Command::Serve { bind } => cmd::session::serve(&cfg, &bind),
        Command::Score(args) => cmd::score::run(&cfg, &args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
