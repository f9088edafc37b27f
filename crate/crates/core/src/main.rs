use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ris_beamsel::harness::{self, Dataset, ExperimentConfig, ModelStore};
use ris_beamsel::rng::domain;
use ris_beamsel::{CodebookMode, Result};

#[derive(Parser, Debug)]
#[command(name = "ris-beamsel", version, about = "RIS codeword selection: datasets, training, sweeps and timing")]
struct Cli {
    /// TOML experiment config; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (overrides `experiment.master_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Codebook to use; for sweeps, restricts the compared modes to this one.
    #[arg(long, global = true)]
    codebook: Option<ModeArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Ideal,
    Practical,
}

impl From<ModeArg> for CodebookMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ideal => CodebookMode::Ideal,
            ModeArg::Practical => CodebookMode::Practical,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an ES-labeled dataset file.
    GenDataset {
        #[arg(long, value_enum, default_value = "train")]
        split: Split,
        /// Sample count (defaults to n_train or n_test).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train a classifier and save it under `<out>/models`.
    Train {
        /// Dataset to train on; generated in memory when absent.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Evaluate a trained classifier on fresh held-out realizations.
    Eval,
    /// Per-decision latency of ES and the classifier for each RIS size.
    Benchmark,
    /// Mean rates against RIS size.
    SweepElements,
    /// Mean rates against receiver distance for a model trained at one distance.
    SweepDistance,
}

fn dataset_path(out: &Path, split: Split, cfg: &ExperimentConfig) -> PathBuf {
    let name = match split {
        Split::Train => "train",
        Split::Test => "test",
    };
    out.join(format!("{name}_{}_N{}.risd", cfg.experiment.codebook_mode, cfg.system.n_elements()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| ris_beamsel::Error::Io { path: dir.to_path_buf(), source })
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.master_seed = seed;
    }
    if let Some(mode) = cli.codebook {
        cfg.experiment.codebook_mode = mode.into();
        cfg.experiment.sweep_modes = vec![mode.into()];
    }
    harness::configure_threads()?;
    let out = &cli.out;
    let store = ModelStore::new(out.join("models"));
    let mode = cfg.experiment.codebook_mode;
    let n = cfg.system.n_elements();

    match cli.command {
        Command::GenDataset { split, count } => {
            let (dom, default_count) = match split {
                Split::Train => (domain::TRAIN, cfg.experiment.n_train),
                Split::Test => (domain::TEST, cfg.experiment.n_test),
            };
            let ds = Dataset::generate(&cfg, mode, dom, count.unwrap_or(default_count))?;
            let path = dataset_path(out, split, &cfg);
            create_dir(out)?;
            ds.save(&path)?;
            println!("{}: {} samples, mean ES rate {:.4} bps/Hz", path.display(), ds.len(), ds.mean_es_rate());
        }
        Command::Train { dataset } => {
            let ds = match dataset {
                Some(path) => Dataset::load(&path)?,
                None => Dataset::generate(&cfg, mode, domain::TRAIN, cfg.experiment.n_train)?,
            };
            let (model, log) = harness::train_on(&cfg, mode, &ds, |r| {
                eprintln!(
                    "epoch {:3}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
                    r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
                );
            })?;
            let model_path = store.path(mode, n);
            create_dir(&store.dir)?;
            model.save(&model_path)?;
            let log_path = out.join(format!("training_{mode}_N{n}.csv"));
            harness::experiments::write_output(&log_path, &log.to_csv())?;
            println!("{} (best epoch {})", model_path.display(), log.best_epoch);
        }
        Command::Eval => {
            let model = harness::obtain_model(&cfg, mode, &store)?;
            let s = harness::evaluate_test_set(&cfg, mode, &model)?;
            let csv = format!(
                "N,mode,n_test,accuracy,es_rate,dnn_rate,random_rate,dnn_over_es\n{n},{mode},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                s.count,
                s.accuracy,
                s.es_rate,
                s.dnn_rate,
                s.random_rate,
                s.dnn_over_es()
            );
            let path = out.join(format!("eval_{mode}_N{n}.csv"));
            harness::experiments::write_output(&path, &csv)?;
            print!("{csv}");
        }
        Command::Benchmark => {
            let rows = harness::run_timing_benchmark(&cfg, &store)?;
            let csv = harness::timing_csv(&rows);
            harness::experiments::write_output(&out.join("benchmark.csv"), &csv)?;
            print!("{csv}");
        }
        Command::SweepElements => {
            let rows = harness::run_rate_vs_elements(&cfg, &store)?;
            let csv = harness::elements_csv(&rows);
            harness::experiments::write_output(&out.join("rate_vs_elements.csv"), &csv)?;
            print!("{csv}");
        }
        Command::SweepDistance => {
            let rows = harness::run_rate_vs_distance(&cfg, &store)?;
            let csv = harness::distance_csv(&rows);
            harness::experiments::write_output(&out.join("rate_vs_distance.csv"), &csv)?;
            print!("{csv}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
