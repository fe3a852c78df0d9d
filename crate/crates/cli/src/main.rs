//! `speckle`: simulate, reconstruct, filter and evaluate from the command line.
//!
//! Every command writes `<command>.json` into `--out` with the tool version
//! and the resolved configuration, and prints the same report to stdout.
//! Failures print `{"error": {"code", "message"}}` to stderr and exit nonzero.

mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use config::PipelineConfig;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "speckle", version, about = "Speckle-field reconstruction pipelines")]
struct Cli {
    /// JSON pipeline configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed for every stochastic step; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Write every compensation stage next to the final map.
    #[arg(long, global = true)]
    dump_stages: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic scene: intensity.pgm, ground_truth.wpcf, simulate.json.
    Simulate,
    /// Recover the object field from a measured intensity.
    Reconstruct {
        /// Intensity image (PGM, PNG or real WPCF).
        intensity: Option<PathBuf>,
    },
    /// Run the frequency compensation pipeline on a feature stack.
    Filter {
        /// Feature stack (WPCF).
        features: Option<PathBuf>,
    },
    /// Score predictions against ground truths (two files or two directories).
    Evaluate {
        predictions: Option<PathBuf>,
        ground_truth: Option<PathBuf>,
    },
    /// Time each pipeline stage on the configured scene.
    Bench {
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
}

fn run(cli: Cli) -> CliResult<serde_json::Value> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    config.resolve_seed(cli.seed);
    let ctx = Context {
        config,
        out: cli.out,
        dump_stages: cli.dump_stages,
    };
    match &cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Reconstruct { intensity } => commands::reconstruct(&ctx, intensity.as_deref()),
        Command::Filter { features } => commands::filter(&ctx, features.as_deref()),
        Command::Evaluate {
            predictions,
            ground_truth,
        } => commands::evaluate_cmd(&ctx, predictions.as_deref(), ground_truth.as_deref()),
        Command::Bench { repeats } => commands::bench(&ctx, *repeats),
    }
}

fn fail(err: &CliError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(std::io::stdout().lock(), "{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.to_string().trim_end().to_string())),
    };
    match run(cli) {
        Ok(report) => {
            // a closed pipe (e.g. `| head`) is not a failure of the command
            let text = serde_json::to_string_pretty(&report).expect("reports serialize");
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
