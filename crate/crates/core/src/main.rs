use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use laserfault::checkpoint::ModelKind;
use laserfault::commands;
use laserfault::metrics::comparison_table;
use laserfault::DegradationMode;

/// Environment variable holding the log filter (e.g. `info`, `debug`).
const LOG_ENV: &str = "LASERFAULT_LOG";

#[derive(Parser)]
#[command(
    name = "laserfault",
    version,
    about = "Laser degradation simulation and failure-mode classification"
)]
struct Cli {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate degradation trajectories.
    Generate {
        #[arg(long)]
        samples_per_mode: Option<usize>,
    },
    /// Window, scale, split and mutate the generated dataset.
    Preprocess,
    /// Fit one model on the training split.
    Train {
        #[arg(long, value_parser = parse_kind)]
        model: ModelKind,
        /// Maximum LSTM epochs.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score checkpoints on the mutated test split.
    Evaluate {
        /// Models to evaluate; every checkpoint found when omitted.
        #[arg(long = "model", value_parser = parse_kind)]
        models: Vec<ModelKind>,
        /// Add the rule-based threshold detector.
        #[arg(long)]
        threshold_baseline: bool,
    },
    /// Run every step and compare all models with the threshold detector.
    Compare,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: laserfault::Error| e.to_string())
}

fn run(cli: Cli) -> laserfault::Result<()> {
    let mut config = commands::load_config(cli.config.as_deref(), cli.seed, cli.out.as_deref())?;
    match cli.command {
        Command::Generate { samples_per_mode } => {
            if let Some(n) = samples_per_mode {
                config.generation.samples_per_mode = n;
                config.validate()?;
            }
            let counts = commands::cmd_generate(&config)?;
            for mode in DegradationMode::ALL {
                println!("{:<8} {}", mode.name(), counts[mode.index()]);
            }
            println!("total    {}", counts.iter().sum::<usize>());
        }
        Command::Preprocess => {
            let s = commands::cmd_preprocess(&config)?;
            println!(
                "train {}  val {}  test {}  (mutated {})",
                s.train, s.validation, s.test, s.mutated
            );
        }
        Command::Train { model, epochs } => {
            if let Some(e) = epochs {
                config.training.max_epochs = e;
                config.validate()?;
            }
            let (path, history) = commands::cmd_train(&config, model)?;
            println!("checkpoint {}", path.display());
            if let Some(h) = history {
                println!("history    {}", h.display());
            }
        }
        Command::Evaluate {
            models,
            threshold_baseline,
        } => {
            let rows = commands::cmd_evaluate(&config, &models, threshold_baseline)?;
            print!("{}", comparison_table(&rows));
        }
        Command::Compare => {
            let rows = commands::cmd_compare(&config)?;
            print!("{}", comparison_table(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
