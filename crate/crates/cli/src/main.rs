//! `puforge` command line: experiments, sweeps, the resample contamination
//! study, tuning only, and prediction with a saved model.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 experiment failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use puforge::data::read_sparse_file;
use puforge::fmt::general;
use puforge::harness::{
    self, contamination_sweep, resample_contamination_study, run_experiment, study_csv, sweep_csv, tune_iteration,
    Axis, ExperimentConfig, STUDY_DEFAULT_TRIALS,
};
use puforge::methods::TrainedModel;
use puforge::Error;

#[derive(Parser)]
#[command(
    name = "puforge",
    version,
    about = "Positive-unlabeled learning benchmarks with class-weighted SVM ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment: all repetitions, summary and statistics.
    Run(Common),
    /// Vary contamination of P or U with the other fixed at 30%.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Contaminated subset to vary: P or U.
        #[arg(long)]
        axis: String,
        /// Comma-separated contamination levels.
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4")]
        levels: Vec<f64>,
    },
    /// Contamination of bootstrap resamples for increasing resample sizes.
    ContaminationStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.1)]
        rate: f64,
        #[arg(long, value_delimiter = ',', default_value = "10,50,100,500,1000,5000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = STUDY_DEFAULT_TRIALS)]
        trials: usize,
    },
    /// Hyperparameter search of one repetition, without final evaluation.
    Tune {
        #[command(flatten)]
        common: Common,
        /// Repetition whose training set is tuned.
        #[arg(long, default_value_t = 0)]
        rep: usize,
    },
    /// Apply a saved model to a sparse data file; prints one decision value
    /// per line.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Sparse data file; labels are read and ignored.
        data: PathBuf,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Experiment(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Io { .. }
            | Error::Parse { .. }
            | Error::InvalidParameter(_)
            | Error::Model(_) => Failure::Usage(e.to_string()),
            other => Failure::Experiment(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Experiment(m)) => {
            eprintln!("experiment failed: {m}");
            ExitCode::from(2)
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_env()?,
    };
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(w) = common.workers {
        config.workers = w;
    }
    config.validate()?;
    Ok(config)
}

fn init_pool(workers: Option<usize>) -> Result<(), Failure> {
    if let Some(w) = workers {
        if w == 0 {
            return Err(Failure::Usage("--workers must be positive".into()));
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    Ok(())
}

fn write_or_print(out: Option<&Path>, file: &str, text: &str) -> Result<(), Failure> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
            let path = dir.join(file);
            std::fs::write(&path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(common) => {
            let config = load_config(&common)?;
            let result = run_experiment(&config, common.out.as_deref())?;
            print!("{}", result.summary_csv());
            if result.wilcoxon.is_some() {
                print!("{}", result.stats_csv());
            }
            if result.is_failed() {
                return Err(Failure::Experiment(format!(
                    "{} of {} repetitions failed",
                    result.failures.len(),
                    config.repetitions
                )));
            }
            Ok(())
        }
        Command::Sweep { common, axis, levels } => {
            let config = load_config(&common)?;
            let axis: Axis = axis.parse()?;
            let rows = contamination_sweep(&config, axis, &levels, common.out.as_deref())?;
            print!("{}", sweep_csv(axis, &rows));
            Ok(())
        }
        Command::ContaminationStudy {
            common,
            rate,
            sizes,
            trials,
        } => {
            init_pool(common.workers)?;
            let seed = common.seed.unwrap_or(1);
            let rows = resample_contamination_study(rate, &sizes, trials, seed)?;
            write_or_print(common.out.as_deref(), "study.csv", &study_csv(&rows))
        }
        Command::Tune { common, rep } => {
            let config = load_config(&common)?;
            init_pool(Some(config.workers))?;
            let source = harness::load_source(&config)?;
            let run = tune_iteration(&config, &source, rep)?;
            let mut summary = String::from("method,best_tuple,cv_score,on_boundary\n");
            for (method, result) in &run.results {
                summary.push_str(&format!(
                    "{method},{},{},{}\n",
                    result.best,
                    general(result.best_score, 17),
                    result.on_boundary()
                ));
                if let Some(dir) = &common.out {
                    write_or_print(
                        Some(dir),
                        &format!("tuning_rep_{rep:03}_{method}.csv"),
                        &result.to_csv(),
                    )?;
                }
            }
            print!("{summary}");
            if let Some(dir) = &common.out {
                write_or_print(Some(dir), &format!("best_rep_{rep:03}.csv"), &summary)?;
            }
            Ok(())
        }
        Command::Predict { common, model, data } => {
            init_pool(common.workers)?;
            let text =
                std::fs::read_to_string(&model).map_err(|e| Failure::Usage(format!("{}: {e}", model.display())))?;
            let model = TrainedModel::from_text(&text)?;
            let data = read_sparse_file(&data, |y| y > 0.0)?;
            let points: Vec<_> = data.instances().iter().map(|x| Arc::clone(&x.features)).collect();
            let mut out = String::new();
            for v in model.decision_values(&points) {
                out.push_str(&general(v, 9));
                out.push('\n');
            }
            write_or_print(common.out.as_deref(), "predictions.txt", &out)
        }
    }
}
