//! Prints the PR and ROC curves of a RESVM model as CSV, with their areas.
//!
//! ```text
//! cargo run --release --example pr_curves > curves.txt
//! ```

use puforge::data::{contaminate, generate_synthetic, subsample_split, Class, ContaminationSpec, TestSpec};
use puforge::ensemble::{train_resvm, ResvmParams};
use puforge::evaluation::{pr_curve, roc_curve, ScoredLabel};
use puforge::kernel::Kernel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let source = generate_synthetic(1000, 1000, 3);
    let split = subsample_split(
        &source,
        60,
        120,
        TestSpec {
            positives: 200,
            negatives: 200,
        },
        4,
    )?;
    let train = contaminate(&split.train, &split.holdout, &ContaminationSpec::new(0.2, 0.2, 5)?)?;
    let p: Vec<_> = train.positives().cloned().collect();
    let u: Vec<_> = train.unlabeled().cloned().collect();
    let model = train_resvm(&p, &u, &ResvmParams::new(25, 12, 60, 1.0, 2.0, Kernel::rbf(0.5)?, 6)?)?;

    let scored: Vec<ScoredLabel> = split
        .test
        .instances()
        .iter()
        .map(|x| ScoredLabel::new(model.decision_value(&x.features), x.truth == Some(Class::Positive)))
        .collect();
    let pr = pr_curve(&scored)?;
    let roc = roc_curve(&scored)?;
    println!("# PR curve, area {:.4}", pr.auc());
    print!("{}", pr.to_csv());
    println!("# ROC curve, area {:.4}", roc.auc());
    print!("{}", roc.to_csv());
    Ok(())
}
