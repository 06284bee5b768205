use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tif_core::data::{generate_drift, write_csv, CsvSchema, OnError};
use tif_core::harness::{self, Cell, DatasetSource, ExperimentConfig};
use tif_core::losses::LossVariant;
use tif_core::models::Interaction;
use tif_core::Error;

/// Temporal-importance-weighted CTR experiments.
#[derive(Parser)]
#[command(name = "tif", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: config `output`, else ./out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Split a dataset chronologically and write vocabulary and sample artifacts.
    Prepare {
        /// Avazu-style CSV; overrides the config's dataset.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate the synthetic drift stream as CSV.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Train and evaluate a single (model, loss, seed) cell.
    Train {
        #[arg(long, default_value = "dnn")]
        model: String,
        #[arg(long, default_value = "plain")]
        loss: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run the full model x loss x seed grid and write comparison tables.
    Compare {
        /// Cells trained concurrently.
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Re-render comparison tables from stored run records.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> tif_core::Result<ExperimentConfig> {
    match &common.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    }
}

fn out_dir(common: &Common, config: &ExperimentConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> tif_core::Result<bool> {
    match cli.command {
        Command::Prepare { input, common } => {
            let mut config = load_config(&common)?;
            if let Some(path) = input {
                config.dataset = DatasetSource::Csv {
                    path,
                    schema: CsvSchema::default(),
                    on_error: OnError::Abort,
                };
                config.preprocess.get_or_insert_with(Default::default);
            }
            let out = out_dir(&common, &config);
            let seed = common.seed.unwrap_or(config.seeds[0]);
            let ds = harness::prepare(&config, seed, &out)?;
            println!(
                "prepared {} samples ({} train / {} val / {} test), {} training days, vocabulary {} -> {}",
                ds.samples.len(),
                ds.train().len(),
                ds.val().len(),
                ds.test().len(),
                ds.n_days,
                ds.vocab_size(),
                out.display()
            );
        }
        Command::Synth { common } => {
            let config = load_config(&common)?;
            let DatasetSource::Synthetic { mut drift, .. } = config.dataset.clone() else {
                return Err(Error::Config("synth needs a synthetic dataset config".into()));
            };
            if let Some(seed) = common.seed {
                drift.seed = seed;
            }
            let out = out_dir(&common, &config);
            let data = generate_drift(&drift)?;
            write_csv(&data.records, &out.join("synth.csv"))?;
            data.write_coefficients(&out.join("coefficients.csv"))?;
            println!(
                "wrote {} records over {} days to {}",
                data.records.records.len(),
                drift.n_days,
                out.join("synth.csv").display()
            );
        }
        Command::Train { model, loss, common } => {
            let mut config = load_config(&common)?;
            let cell = Cell {
                model: model.parse::<Interaction>()?,
                loss: loss.parse::<LossVariant>()?,
                seed: common.seed.unwrap_or(config.seeds[0]),
            };
            if !config.models.contains(&cell.model) {
                config.models.push(cell.model);
            }
            let out = out_dir(&common, &config);
            let outcome = harness::run_cells(&config, &[cell], &out)?;
            if let Some((id, err)) = outcome.failures.first() {
                eprintln!("{id} failed: {err}");
                return Ok(false);
            }
            let record = harness::read_records(&out)?
                .into_iter()
                .find(|(_, r)| r.cell == cell)
                .map(|(_, r)| r)
                .ok_or_else(|| Error::Internal("run record missing after training".into()))?;
            let status = if outcome.skipped.is_empty() { "trained" } else { "already done" };
            println!(
                "{} {status}: best epoch {}/{}, test logloss {:.4}, test auc {:.4}",
                cell.id(),
                record.run.best_epoch,
                record.run.stopped_epoch,
                record.test.logloss,
                record.test.auc
            );
        }
        Command::Compare { jobs, common } => {
            let mut config = load_config(&common)?;
            if let Some(seed) = common.seed {
                config.seeds = vec![seed];
            }
            if let Some(jobs) = jobs {
                config.jobs = jobs;
            }
            let out = out_dir(&common, &config);
            let outcome = harness::run_experiment(&config, &out)?;
            print!("{}", outcome.table.to_text());
            println!(
                "\n{} trained, {} reused, {} failed; tables in {}",
                outcome.trained.len(),
                outcome.skipped.len(),
                outcome.failures.len(),
                out.display()
            );
            for (id, err) in &outcome.failures {
                eprintln!("{id} failed: {err}");
            }
            return Ok(outcome.failures.is_empty());
        }
        Command::Report { common } => {
            let config = load_config(&common)?;
            let out = out_dir(&common, &config);
            let table = harness::report(&out, common.seed)?;
            print!("{}", table.to_text());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
