//! Trains a single class-weighted SVM on clean synthetic PU data and scores
//! a held-out test set.
//!
//! ```text
//! cargo run --release --example cwsvm_train
//! ```

use puforge::cwsvm::{train, CwsvmModel, CwsvmParams};
use puforge::data::{generate_synthetic, subsample_split, Class, TestSpec};
use puforge::evaluation::{auc_pr, ScoredLabel};
use puforge::kernel::Kernel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let source = generate_synthetic(2000, 2000, 5);
    let split = subsample_split(
        &source,
        100,
        200,
        TestSpec {
            positives: 500,
            negatives: 500,
        },
        6,
    )?;
    let p: Vec<_> = split.train.positives().cloned().collect();
    let u: Vec<_> = split.train.unlabeled().cloned().collect();

    // Weight positive errors so both classes carry the same total penalty.
    let c_unl = 1.0;
    let params = CwsvmParams::new(c_unl * u.len() as f64 / p.len() as f64, c_unl, Kernel::rbf(0.5)?)?;
    let model = train(&p, &u, &params)?;
    println!(
        "{} support vectors, bias {:.4}, {} iterations, converged {}",
        model.support_vectors().len(),
        model.bias(),
        model.iterations(),
        model.converged()
    );

    let scored: Vec<ScoredLabel> = split
        .test
        .instances()
        .iter()
        .map(|x| ScoredLabel::new(model.decision_value(&x.features), x.truth == Some(Class::Positive)))
        .collect();
    println!("test AUC-PR {:.4}", auc_pr(&scored)?);

    // Models round-trip through their text form.
    let restored = CwsvmModel::from_text(&model.to_text())?;
    let x = &split.test.instances()[0].features;
    assert_eq!(restored.decision_value(x), model.decision_value(x));
    Ok(())
}
