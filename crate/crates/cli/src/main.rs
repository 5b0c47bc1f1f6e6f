//! `snax`: scope detection, ADE prediction filtering, evaluation and corpus
//! composition from the command line.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags, bad config,
//! missing input files), 2 for data errors (unparsable files, unknown ids).

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ComposeArgs, CorpusArgs, DetectArgs, EvaluateArgs, PredictionArgs, PrefilterArgs};
use config::{CommonArgs, PipelineConfig, UsageError};

#[derive(Debug, Parser)]
#[command(name = "snax", version, about = "Scope-aware ADE extraction pipeline")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect negation and/or speculation scopes, one record per scope
    Detect(DetectArgs),
    /// Drop predicted ADE spans that overlap a scope
    Filter(PredictionArgs),
    /// Score predictions against the gold annotations
    Evaluate(EvaluateArgs),
    /// Build a training set from the A/X base and the N and S pools
    Compose(ComposeArgs),
    /// Keep only samples containing a scope-opening cue
    Prefilter(PrefilterArgs),
    /// Predict ADE spans with the lexicon baseline
    Extract(CorpusArgs),
    /// Per-class sample counts and percentages
    Distribution(CorpusArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = PipelineConfig::resolve(&cli.common)?;
    match &cli.command {
        Command::Detect(args) => commands::detect(&config, args),
        Command::Filter(args) => commands::filter(&config, args),
        Command::Evaluate(args) => commands::evaluate(&config, args),
        Command::Compose(args) => commands::compose(&config, args),
        Command::Prefilter(args) => commands::prefilter_corpus(&config, args),
        Command::Extract(args) => commands::extract(&config, args),
        Command::Distribution(args) => commands::distribution(&config, args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if err.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
