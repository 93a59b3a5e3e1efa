use std::collections::HashSet;
use std::path::Path;

use puforge::harness::{load_source, run_experiment, run_iteration, stage, stage_seed, ExperimentConfig};
use puforge::methods::{Method, MethodLearner};
use puforge::tuning::{cross_val_scores, GramCache};

fn small_config() -> ExperimentConfig {
    let text = r#"
        data = "../crates/core/data/cancer.libsvm"
        setting = "semi-supervised"
        rate_p = 0.2
        rate_u = 0.2
        train_positives = 20
        train_unlabeled = 60
        test_positives = 40
        test_negatives = 40
        repetitions = 4
        k_folds = 3
        n_models = 5
        search = "random"
        budget = 3
        master_seed = 7
    "#;
    let base = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    ExperimentConfig::from_toml(text, Some(&base)).unwrap()
}

#[test]
fn repetition_is_deterministic_and_disjoint() {
    let config = small_config();
    let source = load_source(&config).unwrap();
    let a = run_iteration(&config, &source, 2).unwrap();
    let b = run_iteration(&config, &source, 2).unwrap();
    assert_eq!(a.record(), b.record());
    assert_eq!(a.test_ids, b.test_ids);

    let train_ids: HashSet<u64> = a.train.instances().iter().map(|x| x.id).collect();
    assert!(a.test_ids.iter().all(|id| !train_ids.contains(id)));
    assert_eq!(a.test_ids.len(), 80);
    assert_eq!(a.train.len(), 80);

    let other = run_iteration(&config, &source, 3).unwrap();
    assert_ne!(a.test_ids, other.test_ids);
}

#[test]
fn every_method_is_tuned_on_the_shared_fold_plan() {
    let config = small_config();
    let source = load_source(&config).unwrap();
    let rep = run_iteration(&config, &source, 0).unwrap();
    assert_eq!(rep.plan.assignment.len(), rep.train.len());
    assert_eq!(rep.outcomes.len(), 3);
    let grams = GramCache::new(&rep.train);
    let kernel = config.kernel_kind().unwrap();
    for outcome in &rep.outcomes {
        // Re-scoring the winning tuple on the repetition's plan reproduces the
        // recorded fold scores.
        let learner = MethodLearner::new(outcome.method, kernel, config.n_models);
        let seed = stage_seed(config.master_seed, 0, stage::TUNE, &[outcome.method.index()]);
        let scores = cross_val_scores(&learner, &outcome.search.best, &rep.plan, &rep.train, &grams, seed).unwrap();
        let row = &outcome.search.table[outcome.search.best_id];
        assert_eq!(row.folds.as_ref().unwrap(), &scores, "{}", outcome.method);
    }
}

#[test]
fn win_counts_match_records() {
    let config = small_config();
    let result = run_experiment(&config, None).unwrap();
    assert_eq!(result.records.len(), 4);
    assert!(result.failures.is_empty());
    let mut total = 0;
    for m in Method::ALL {
        let wins = result
            .records
            .iter()
            .filter(|r| {
                let best = r.methods.iter().map(|x| x.auc_pr).fold(f64::NEG_INFINITY, f64::max);
                // Earliest method in canonical order among those at the maximum.
                Method::ALL.iter().find(|&&k| r.get(k).unwrap().auc_pr == best) == Some(&m)
            })
            .count();
        assert_eq!(result.method(m).unwrap().wins, wins, "{m}");
        total += wins;
    }
    assert_eq!(total, 4);
}
