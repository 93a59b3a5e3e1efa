//! On-disk layout of an experiment directory:
//!
//! ```text
//! config.toml                  snapshot; a rerun into the same directory must match it
//! reps/rep_007.csv             per-repetition record, written last (resume marker)
//! reps/rep_007.failed          error report of a failed repetition
//! tuning/rep_007_resvm.csv     full score table
//! curves/rep_007_resvm_pr.csv  test PR curve (also _roc)
//! models/rep_007_resvm.model   final model, when enabled
//! summary.csv stats.csv hyperparameters.csv failures.csv
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ExperimentConfig, MethodRecord, RepRecord, Repetition, RunResult};
use crate::error::{Error, Result};
use crate::fmt::general;

const RECORD_HEADER: &str = "method,tuple,cv_score,on_boundary,auc_pr,auc_roc";

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    // Write-then-rename so a crash never leaves a truncated file behind.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    /// Creates the layout and writes or checks the config snapshot.
    pub fn create(root: &Path, config: &ExperimentConfig) -> Result<Self> {
        for sub in ["reps", "tuning", "curves", "models"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        let snapshot = root.join("config.toml");
        let text = config.to_toml();
        if snapshot.exists() {
            let existing = fs::read_to_string(&snapshot).map_err(|e| Error::io(&snapshot, e))?;
            if existing != text {
                return Err(Error::Config(format!(
                    "{} holds results of a different configuration",
                    root.display()
                )));
            }
        } else {
            write_file(&snapshot, &text)?;
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn record_path(&self, rep: usize) -> PathBuf {
        self.root.join("reps").join(format!("rep_{rep:03}.csv"))
    }

    fn failure_path(&self, rep: usize) -> PathBuf {
        self.root.join("reps").join(format!("rep_{rep:03}.failed"))
    }

    /// Record of a completed repetition, if present.
    pub fn load_record(&self, rep: usize) -> Result<Option<RepRecord>> {
        let path = self.record_path(rep);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        read_record(rep, &text).map(Some)
    }

    pub fn write_repetition(&self, rep: &Repetition, save_models: bool) -> Result<()> {
        let i = rep.index;
        for o in &rep.outcomes {
            let m = o.method;
            write_file(
                &self.root.join("tuning").join(format!("rep_{i:03}_{m}.csv")),
                &o.search.to_csv(),
            )?;
            write_file(
                &self.root.join("curves").join(format!("rep_{i:03}_{m}_pr.csv")),
                &o.pr.to_csv(),
            )?;
            write_file(
                &self.root.join("curves").join(format!("rep_{i:03}_{m}_roc.csv")),
                &o.roc.to_csv(),
            )?;
            if save_models {
                write_file(
                    &self.root.join("models").join(format!("rep_{i:03}_{m}.model")),
                    &o.model.to_text(),
                )?;
            }
        }
        let failed = self.failure_path(i);
        if failed.exists() {
            fs::remove_file(&failed).map_err(|e| Error::io(&failed, e))?;
        }
        write_file(&self.record_path(i), &record_csv(&rep.record()))
    }

    pub fn write_failure(&self, rep: usize, error: &Error) -> Result<()> {
        write_file(&self.failure_path(rep), &format!("{error}\n"))
    }

    pub fn write_summary(&self, result: &RunResult) -> Result<()> {
        write_file(&self.root.join("summary.csv"), &result.summary_csv())?;
        write_file(&self.root.join("stats.csv"), &result.stats_csv())?;
        write_file(&self.root.join("hyperparameters.csv"), &result.hyperparameters_csv())?;
        write_file(&self.root.join("failures.csv"), &result.failures_csv())
    }
}

/// Serializes a repetition record; floats keep 17 significant digits so a
/// resumed run aggregates identical values.
pub fn record_csv(record: &RepRecord) -> String {
    let mut out = format!("{RECORD_HEADER}\n");
    for r in &record.methods {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method,
            r.tuple,
            general(r.cv_score, 17),
            r.on_boundary,
            general(r.auc_pr, 17),
            general(r.auc_roc, 17)
        );
    }
    out
}

/// Parses the output of [`record_csv`].
pub fn read_record(index: usize, text: &str) -> Result<RepRecord> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == RECORD_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing record header".into(),
            })
        }
    }
    let mut methods = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: n + 1, message };
        let f: Vec<&str> = line.split(',').collect();
        let [method, tuple, cv, boundary, pr, roc] = f[..] else {
            return Err(err(format!("expected 6 fields, got {}", f.len())));
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
        methods.push(MethodRecord {
            method: method.parse()?,
            tuple: tuple.parse()?,
            cv_score: num(cv)?,
            on_boundary: boundary.parse().map_err(|_| err(format!("bad flag {boundary:?}")))?,
            auc_pr: num(pr)?,
            auc_roc: num(roc)?,
        });
    }
    Ok(RepRecord { index, methods })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::methods::Method;
    use crate::tuning::Tuple;

    #[test]
    fn record_round_trips_exactly() {
        let rec = RepRecord {
            index: 4,
            methods: vec![MethodRecord {
                method: Method::Resvm,
                tuple: Tuple(vec![("c_u".into(), 0.1 + 0.2), ("gamma".into(), 1.0 / 3.0)]),
                cv_score: 2.0f64.sqrt(),
                on_boundary: true,
                auc_pr: 0.987654321012345,
                auc_roc: 1e-7 / 3.0,
            }],
        };
        assert_eq!(read_record(4, &record_csv(&rec)).unwrap(), rec);
    }

    #[test]
    fn malformed_records_are_rejected() {
        assert!(read_record(0, "nope\n").is_err());
        assert!(read_record(0, &format!("{RECORD_HEADER}\nresvm,c_u=1,0.5\n")).is_err());
        assert!(read_record(0, &format!("{RECORD_HEADER}\nsvm,c_u=1,0.5,true,1,1\n")).is_err());
    }
}
