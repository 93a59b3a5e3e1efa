//! Cross-validated hyperparameter search for one method, scored by the PU
//! criterion on held-out folds.
//!
//! ```text
//! cargo run --release --example tuning_search -- [cwsvm|bagging|resvm] [grid|BUDGET]
//! ```

use puforge::data::{contaminate, generate_synthetic, subsample_split, ContaminationSpec, TestSpec};
use puforge::methods::{KernelKind, Method, MethodLearner};
use puforge::tuning::{cross_val_scores, make_folds, search, GramCache, SearchMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let method: Method = args.next().as_deref().unwrap_or("resvm").parse()?;
    let mode = match args.next().as_deref() {
        None | Some("grid") => SearchMode::Grid,
        Some(budget) => SearchMode::Random {
            budget: budget.parse()?,
        },
    };

    let source = generate_synthetic(1000, 1000, 8);
    let split = subsample_split(
        &source,
        60,
        120,
        TestSpec {
            positives: 10,
            negatives: 10,
        },
        9,
    )?;
    let train = contaminate(&split.train, &split.holdout, &ContaminationSpec::new(0.3, 0.3, 10)?)?;

    let plan = make_folds(&train, 5, 11)?;
    let grams = GramCache::new(&train);
    let learner = MethodLearner::new(method, KernelKind::Rbf, 15);
    let result = search(&method.default_space(KernelKind::Rbf), mode, 12, |tuple| {
        cross_val_scores(&learner, tuple, &plan, &train, &grams, 13)
    })?;
    print!("{}", result.to_csv());
    println!(
        "best {} with CV score {:.4}{}",
        result.best,
        result.best_score,
        if result.on_boundary() {
            " (on grid boundary)"
        } else {
            ""
        }
    );
    Ok(())
}
