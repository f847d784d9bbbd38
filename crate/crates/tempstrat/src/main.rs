use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tempstrat::cli::{
    cmd_evaluate, cmd_experiments, cmd_ingest, cmd_predict, cmd_train, CliError, CmdOutput,
    PredictInput,
};
use tempstrat::config::RunConfig;
use tempstrat::strata::StrataDefinition;

/// Temporally stratified daily deterioration prediction over right-aligned
/// clinical time series.
#[derive(Parser)]
#[command(name = "tempstrat", version, about)]
struct Cli {
    /// Run configuration JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel cross-validation repetitions.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the strata cut points, e.g. "-1,-2,-4,-7,-13".
    #[arg(long, global = true, allow_hyphen_values = true)]
    strata: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the cohort from the configured CSV and write the canonical
    /// dump plus a summary.
    Ingest,
    /// Train the stratified predictor and write the model bundle.
    Train,
    /// Score a records CSV (or plain feature rows) with a trained model.
    Predict {
        /// Model bundle written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Input CSV to score.
        #[arg(long)]
        input: PathBuf,
        /// Treat the input as plain feature rows instead of records.
        #[arg(long)]
        features: bool,
    },
    /// Repeated cross-validation of the combined model.
    Evaluate,
    /// Per-stratum, per-day baseline, importance and retrospective tables.
    Experiments,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Input("--config <file> is required".to_string()))?;
    let mut config = RunConfig::from_file(path)?;
    if let Some(seed) = cli.seed {
        config.cv.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(strata) = &cli.strata {
        config.strata = StrataDefinition::parse(strata)?;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<CmdOutput, CliError> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Ingest => cmd_ingest(&config),
        Command::Train => cmd_train(&config),
        Command::Predict {
            model,
            input,
            features,
        } => {
            let mode = if *features {
                PredictInput::Features
            } else {
                PredictInput::Records
            };
            cmd_predict(&config, model, input, mode)
        }
        Command::Evaluate => cmd_evaluate(&config),
        Command::Experiments => cmd_experiments(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore failure: the global pool may already exist in test harnesses.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run(&cli) {
        Ok(output) => {
            for file in output.files {
                println!("{}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
