//! `crydetect`: batch front end for cry detection.
//!
//! Exit codes: 0 on success, 2 for bad arguments, configs or input files,
//! 1 for any other failure.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crydetect::audio_io::{ManifestError, WavError};
use crydetect::features::EmbeddingError;
use crydetect::pipeline::{ModelFileError, PipelineError};

use commands::{AblateArgs, Common, CompareArgs, EvaluateArgs, FeaturesArgs, InputError, PredictArgs, TrainArgs};
use config::ConfigError;

#[derive(Parser)]
#[command(
    name = "crydetect",
    version,
    about = "Infant cry detection from short audio segments"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the unscaled feature matrix as CSV.
    Features(FeaturesArgs),
    /// Train on the manifest's train split and save a model file.
    Train(TrainArgs),
    /// Score segments from a manifest or individual WAV files.
    Predict(PredictArgs),
    /// AUC, per-participant AUC and classification report.
    Evaluate(EvaluateArgs),
    /// Train and test once per feature-block subset.
    Ablate(AblateArgs),
    /// Bayesian signed-rank comparison of per-group AUC files.
    Compare(CompareArgs),
}

fn is_input_error(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        if let Some(p) = cause.downcast_ref::<PipelineError>() {
            return matches!(
                p,
                PipelineError::Audio { .. }
                    | PipelineError::Manifest(_)
                    | PipelineError::ModelFile(_)
                    | PipelineError::EmbeddingsRequired
                    | PipelineError::MissingEmbedding(_)
                    | PipelineError::SchemaMismatch { .. }
                    | PipelineError::EmptySplit(_)
                    | PipelineError::Preprocess(_)
                    | PipelineError::Config(_)
            );
        }
        cause.is::<InputError>()
            || cause.is::<ConfigError>()
            || cause.is::<ManifestError>()
            || cause.is::<WavError>()
            || cause.is::<EmbeddingError>()
            || cause.is::<ModelFileError>()
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Features(a) => commands::features(c, a),
        Command::Train(a) => commands::train(c, a),
        Command::Predict(a) => commands::predict(c, a),
        Command::Evaluate(a) => commands::evaluate(c, a),
        Command::Ablate(a) => commands::ablation(c, a),
        Command::Compare(a) => commands::compare(c, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_input_error(&err) { 2 } else { 1 })
        }
    }
}
