use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use puforge::data::read_sparse_file;
use puforge::fmt::general;
use puforge::methods::TrainedModel;

fn puforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_puforge"))
        .args(args)
        .env_clear()
        .output()
        .unwrap()
}

fn cancer() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data/cancer.libsvm")
        .canonicalize()
        .unwrap()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"
data = "{}"
train_positives = 20
train_unlabeled = 60
test_positives = 40
test_negatives = 40
repetitions = 2
k_folds = 3
n_models = 5
search = "random"
budget = 2
{extra}
"#,
        cancer().display()
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(puforge(&[]).status.code(), Some(1));
    assert_eq!(puforge(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(puforge(&["--help"]).status.code(), Some(0));
    assert_eq!(
        puforge(&["run", "--config", "/nonexistent/config.toml"]).status.code(),
        Some(1)
    );
    assert_eq!(puforge(&["sweep", "--axis", "Q"]).status.code(), Some(1));
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "rate_p = 0.2\nsetting = \"supervised\"");
    let out = puforge(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn contamination_study_prints_csv() {
    let out = puforge(&[
        "contamination-study",
        "--sizes",
        "10,100",
        "--trials",
        "1000",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "size,mean,ci_lo,ci_hi");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("10,"));
}

#[test]
fn run_then_predict_with_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "methods = [\"resvm\"]\nsave_models = true");
    let out_dir = dir.path().join("out");
    let out = puforge(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("method,n,auc_pr_mean"));
    for file in ["summary.csv", "config.toml", "reps/rep_000.csv", "reps/rep_001.csv"] {
        assert!(out_dir.join(file).exists(), "{file}");
    }

    let model_path = out_dir.join("models/rep_000_resvm.model");
    let data = cancer();
    let out = puforge(&[
        "predict",
        "--model",
        model_path.to_str().unwrap(),
        data.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let printed = String::from_utf8(out.stdout).unwrap();

    let model = TrainedModel::from_text(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    let dataset = read_sparse_file(&data, |y| y > 0.0).unwrap();
    let points: Vec<_> = dataset.instances().iter().map(|x| Arc::clone(&x.features)).collect();
    let expected: Vec<String> = model
        .decision_values(&points)
        .into_iter()
        .map(|v| general(v, 9))
        .collect();
    assert_eq!(printed.lines().collect::<Vec<_>>(), expected);
    assert_eq!(expected.len(), 683);
}

#[test]
fn predict_rejects_corrupt_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("bad.model");
    std::fs::write(&model, "format cwsvm 1\nnonsense\n").unwrap();
    let out = puforge(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        cancer().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
