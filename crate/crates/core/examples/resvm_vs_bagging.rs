//! Compares a RESVM ensemble with bagging SVM when both P and U are
//! contaminated, using the same base penalties and kernel.
//!
//! ```text
//! cargo run --release --example resvm_vs_bagging -- [RATE]
//! ```

use puforge::data::{contaminate, generate_synthetic, subsample_split, Class, ContaminationSpec, Dataset, TestSpec};
use puforge::ensemble::{train_bagging, train_resvm, BaggingParams, EnsembleModel, ResvmParams};
use puforge::evaluation::{auc_pr, ScoredLabel};
use puforge::kernel::Kernel;

fn score(model: &EnsembleModel, test: &Dataset) -> puforge::Result<f64> {
    let scored: Vec<ScoredLabel> = test
        .instances()
        .iter()
        .map(|x| ScoredLabel::new(model.decision_value(&x.features), x.truth == Some(Class::Positive)))
        .collect();
    auc_pr(&scored)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rate: f64 = std::env::args().nth(1).map_or(Ok(0.3), |s| s.parse())?;
    let source = generate_synthetic(4000, 4000, 21);
    let split = subsample_split(
        &source,
        100,
        200,
        TestSpec {
            positives: 1000,
            negatives: 1000,
        },
        22,
    )?;
    let train = contaminate(&split.train, &split.holdout, &ContaminationSpec::new(rate, rate, 23)?)?;
    let p: Vec<_> = train.positives().cloned().collect();
    let u: Vec<_> = train.unlabeled().cloned().collect();
    let kernel = Kernel::rbf(0.5)?;

    let bagging = train_bagging(&p, &u, &BaggingParams::new(50, 2 * p.len(), 1.0, kernel, 24)?)?;
    let resvm = train_resvm(
        &p,
        &u,
        &ResvmParams::new(50, p.len() / 5, 2 * p.len() / 5, 1.0, 2.0, kernel, 24)?,
    )?;
    println!(
        "contamination {rate}: bagging AUC-PR {:.4}, RESVM AUC-PR {:.4}",
        score(&bagging, &split.test)?,
        score(&resvm, &split.test)?
    );
    Ok(())
}
