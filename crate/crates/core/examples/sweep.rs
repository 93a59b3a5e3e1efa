//! Contamination sweep: one axis varies while the other stays at 30%.
//! A reduced configuration keeps the run short.
//!
//! ```text
//! cargo run --release --example sweep -- [P|U] [OUT_DIR]
//! ```

use std::path::PathBuf;

use puforge::harness::{contamination_sweep, sweep_csv, Axis, ExperimentConfig, SearchKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let axis: Axis = args.next().as_deref().unwrap_or("U").parse()?;
    let out = args.next().map(PathBuf::from);

    let config = ExperimentConfig {
        synthetic_positives: 2000,
        synthetic_negatives: 2000,
        test_positives: 500,
        test_negatives: 500,
        repetitions: 3,
        k_folds: 3,
        n_models: 15,
        search: SearchKind::Random,
        budget: 6,
        ..ExperimentConfig::default()
    };
    let rows = contamination_sweep(&config, axis, &[0.0, 0.2, 0.4], out.as_deref())?;
    print!("{}", sweep_csv(axis, &rows));
    Ok(())
}
