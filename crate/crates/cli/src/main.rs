//! `univperturb`: universal adversarial perturbations for differentiable
//! classifiers, with the evaluation suite around them.
//!
//! Every subcommand reads one JSON config (`--config`) and accepts
//! `--key value` overrides into it; all randomness flows from config
//! seeds, so reruns are byte-identical. Exit codes: 0 success (including
//! non-converged perturbations), 2 config or input error, 3 numerical
//! abort.

mod commands;
mod config;
mod dataset;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use univperturb_core::Error;

#[derive(Parser)]
#[command(name = "univperturb", version, about = "Universal perturbation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommandArgs {
    /// JSON configuration for this run.
    #[arg(long)]
    config: PathBuf,
    /// `--key value` pairs merged over the config (dotted paths allowed,
    /// e.g. `--dataset.noise 0.2`).
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset, train a classifier, save it as JSON.
    Train(CommandArgs),
    /// Compute a universal perturbation for a trained model.
    Universal(CommandArgs),
    /// Evaluation suite: baselines, sweep, transfer, normals, subspace,
    /// graph, sqrtd (pick with the config's "which" field).
    Analyze(CommandArgs),
    /// Fine-tune a model against a pool of universal perturbations.
    Finetune(CommandArgs),
    /// Render a perturbation file as a binary PGM image.
    Export(CommandArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => dispatch(args, commands::train::run),
        Command::Universal(args) => dispatch(args, commands::universal::run),
        Command::Analyze(args) => dispatch(args, commands::analyze::run),
        Command::Finetune(args) => dispatch(args, commands::finetune::run),
        Command::Export(args) => dispatch(args, commands::export::run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn dispatch<C, F>(args: &CommandArgs, run: F) -> univperturb_core::Result<()>
where
    C: serde::de::DeserializeOwned,
    F: FnOnce(C, serde_json::Value) -> univperturb_core::Result<()>,
{
    let (cfg, merged) = config::load_config::<C>(&args.config, &args.overrides)?;
    run(cfg, merged)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numerical(_) => 3,
        _ => 2,
    }
}
