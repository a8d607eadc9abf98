//! Command-line front end.
//!
//! Verbs: `generate`, `train`, `score`, `fdd`, `report`. Exit codes:
//! 0 success, 1 usage/config error, 2 data error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shmdetect::bundle::ModelBundle;
use shmdetect::config::RunConfig;
use shmdetect::error::Result;
use shmdetect::model_selection::SearchStrategy;
use shmdetect::pipeline::{cmd_fdd, cmd_generate, cmd_report, cmd_score, cmd_train, TrainOptions};

#[derive(Parser)]
#[command(
    name = "shmdetect",
    version,
    about = "Semi-supervised vibration-based structural damage detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(path) => RunConfig::from_file(path),
            None => Ok(RunConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic scenario dataset (CSV per case + manifest).
    Generate {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory for the dataset.
        #[arg(long)]
        out: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train per-sensor models on the undamaged case and persist a bundle.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        /// Dataset directory (expects case_1.csv).
        #[arg(long)]
        data: PathBuf,
        /// Where the model bundle is written.
        #[arg(long)]
        bundle: PathBuf,
        /// Directory for search histories and auxiliary outputs
        /// (defaults to the bundle's directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Use the fixed best-found configuration (the default behaviour;
        /// the flag makes it explicit).
        #[arg(long)]
        fast: bool,
        /// Run hyperparameter search with this trial budget per stage.
        #[arg(long, conflicts_with = "fast")]
        trials: Option<usize>,
        /// Search strategy when --trials is given.
        #[arg(long, value_parser = ["random", "surrogate"])]
        strategy: Option<String>,
        /// Train the deterministic plain-autoencoder baseline.
        #[arg(long = "ae-baseline")]
        ae_baseline: bool,
    },
    /// Score every case CSV against a trained bundle (PoD + KL tables).
    Score {
        /// Trained model bundle.
        #[arg(long)]
        bundle: PathBuf,
        /// Dataset directory with case CSVs.
        #[arg(long)]
        data: PathBuf,
        /// Output directory for the report files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate modal frequencies per case with the FDD baseline.
    Fdd {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score and run the FDD baseline in one invocation.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, out, seed } => {
            let mut config = config.load()?;
            if let Some(seed) = seed {
                config.split_seed = seed;
            }
            let written = cmd_generate(&config, &out)?;
            println!("wrote {} files under {}", written.len(), out.display());
        }
        Command::Train {
            config,
            data,
            bundle,
            out,
            seed,
            fast: _,
            trials,
            strategy,
            ae_baseline,
        } => {
            let config = config.load()?;
            let strategy = match strategy {
                Some(name) => SearchStrategy::from_name(&name)?,
                None => config.strategy,
            };
            let history_dir = out.or_else(|| bundle.parent().map(PathBuf::from));
            let options = TrainOptions {
                search_trials: trials,
                strategy,
                ae_baseline,
                seed_override: seed,
                history_dir,
            };
            let trained = cmd_train(&config, &data, &options)?;
            trained.save(&bundle)?;
            println!(
                "trained {} sensor models ({}), bundle at {}",
                trained.sensors.len(),
                if ae_baseline { "plain AE baseline" } else { "variational" },
                bundle.display()
            );
        }
        Command::Score { bundle, data, out } => {
            let bundle = ModelBundle::load(&bundle)?;
            let (report, _) = cmd_score(&bundle, &data, &out)?;
            print!("{}", report.to_text());
            println!("report files written under {}", out.display());
        }
        Command::Fdd { config, data, out } => {
            let config = config.load()?;
            let table = cmd_fdd(&config, &data, &out)?;
            print!("{}", table.to_text());
            println!("FDD files written under {}", out.display());
        }
        Command::Report { bundle, data, out } => {
            let bundle = ModelBundle::load(&bundle)?;
            let (report, _, fdd) = cmd_report(&bundle, &data, &out)?;
            print!("{}", report.to_text());
            print!("{}", fdd.to_text());
            println!("all report files written under {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help/version requests are not usage errors.
            if err.use_stderr() {
                eprint!("{err}");
                return ExitCode::from(1);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("shmdetect: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
