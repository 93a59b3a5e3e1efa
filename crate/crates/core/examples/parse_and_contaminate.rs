//! Reads a sparse data file, draws a training/test split and injects label
//! noise into both training subsets.
//!
//! ```text
//! cargo run --release --example parse_and_contaminate -- [DATA.libsvm] [RATE]
//! ```

use std::path::PathBuf;

use puforge::data::{
    contaminate, contamination_of, read_sparse_file, subsample_split, Class, ContaminationSpec, TestSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/cancer.libsvm"));
    let rate: f64 = args.next().map_or(Ok(0.3), |s| s.parse())?;

    let data = read_sparse_file(&path, |y| y > 0.0)?;
    println!(
        "{}: {} instances, {} features, {} positive",
        path.display(),
        data.len(),
        data.dimension(),
        data.count_truth(Class::Positive)
    );

    let test = TestSpec {
        positives: 100,
        negatives: 100,
    };
    let split = subsample_split(&data, 50, 200, test, 11)?;
    let train = contaminate(&split.train, &split.holdout, &ContaminationSpec::new(rate, rate, 12)?)?;
    println!(
        "train: {} P, {} U; test: {}",
        train.positives().count(),
        train.unlabeled().count(),
        split.test.len()
    );
    println!("negatives among P: {:.3}", contamination_of(train.positives()));
    println!("positives among U: {:.3}", contamination_of(train.unlabeled()));
    Ok(())
}
