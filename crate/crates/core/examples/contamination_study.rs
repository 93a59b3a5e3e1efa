//! How far the contamination of a bootstrap resample strays from that of its
//! source as the resample size grows.
//!
//! ```text
//! cargo run --release --example contamination_study -- [RATE]
//! ```

use puforge::harness::{resample_contamination_study, study_csv, STUDY_DEFAULT_TRIALS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rate: f64 = std::env::args().nth(1).map_or(Ok(0.1), |s| s.parse())?;
    let rows = resample_contamination_study(rate, &[10, 50, 100, 500, 1000, 5000], STUDY_DEFAULT_TRIALS, 1)?;
    print!("{}", study_csv(&rows));
    Ok(())
}
