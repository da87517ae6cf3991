use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cleanse_cli::config::ExperimentConfig;
use cleanse_cli::experiment::{analyze_dir, oracle_csv, run_experiment, write_atomic};
use cleanse_cli::{CliError, CliResult};
use cleanse_core::task_data::generate_dataset;

#[derive(Parser)]
#[command(
    name = "cleanse",
    about = "Remove mislabeled training instances by surrogate-model black-box optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the dataset described by a config file.
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long, default_value = "dataset.csv")]
        out: PathBuf,
        /// Override a config key, e.g. --set b=7.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the experiment over all configured seeds.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for traces and aggregate reports.
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Recompute the aggregate reports from stored traces.
    Analyze {
        /// Directory holding dataset.csv, run.meta and trace_*.csv.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Exhaustively score every training subset (needs n <= 16).
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn load_config(path: &PathBuf, overrides: &[String]) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("read {}: {e}", path.display())))?;
    let mut config = ExperimentConfig::parse_str(&text)?;
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        config.set(key.trim(), value.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen {
            config,
            out,
            overrides,
        } => {
            let config = load_config(&config, &overrides)?;
            let dataset = generate_dataset(
                config.b,
                config.n_real,
                config.n_valid,
                config.n_test,
                config.dataset_seed,
            )
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            write_atomic(&out, &dataset.to_csv_string())?;
            eprintln!(
                "wrote {} ({} train / {} valid / {} test instances)",
                out.display(),
                dataset.train.len(),
                dataset.valid.len(),
                dataset.test.len()
            );
        }
        Command::Run {
            config,
            out,
            overrides,
        } => {
            let config = load_config(&config, &overrides)?;
            let output = run_experiment(&config, &out)?;
            eprintln!(
                "completed {} runs into {} (mean sampling time {:.4} s/step)",
                output.runs.len(),
                out.display(),
                output.summary.sampling_time_mean
            );
        }
        Command::Analyze { input } => {
            let summary = analyze_dir(&input)?;
            eprintln!(
                "analyzed {} runs in {}",
                summary.solutions.len(),
                input.display()
            );
        }
        Command::Oracle {
            config,
            out,
            overrides,
        } => {
            let config = load_config(&config, &overrides)?;
            let csv = oracle_csv(&config)?;
            match out {
                Some(path) => write_atomic(&path, &csv)?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage problems are config errors: exit 1
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
