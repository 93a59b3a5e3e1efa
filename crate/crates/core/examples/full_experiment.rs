//! Runs a complete benchmark experiment and prints the summary table.
//!
//! ```text
//! cargo run --release --example full_experiment -- [CONFIG.toml] [OUT_DIR]
//! ```
//!
//! Without a config file the defaults apply (synthetic data, supervised),
//! adjusted by any `PUFORGE_<KEY>` environment variables.

use std::path::PathBuf;
use std::time::Instant;

use puforge::harness::{run_experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let config = match args.next() {
        Some(path) => ExperimentConfig::load(&PathBuf::from(path))?,
        None => ExperimentConfig::from_env()?,
    };
    let out = args.next().map(PathBuf::from);
    let start = Instant::now();
    let result = run_experiment(&config, out.as_deref())?;
    print!("{}", result.summary_csv());
    print!("{}", result.stats_csv());
    print!("{}", result.hyperparameters_csv());
    eprintln!(
        "{} repetitions ({} failed) in {:.1}s",
        config.repetitions,
        result.failures.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
