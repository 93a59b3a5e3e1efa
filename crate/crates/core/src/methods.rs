//! The three compared learners expressed as tunable methods: hyperparameter
//! tuples in, trained models out.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::cwsvm::{self, CwsvmModel, CwsvmParams};
use crate::data::SparseVector;
use crate::ensemble::{self, BaggingParams, EnsembleModel, ResvmParams};
use crate::error::{Error, Result};
use crate::kernel::{Gram, Kernel};
use crate::tuning::{Domain, Learner, SearchSpace, Tuple};

/// Methods in canonical order, which also breaks ties in win counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Cwsvm,
    Bagging,
    Resvm,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Cwsvm, Method::Bagging, Method::Resvm];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cwsvm => "cwsvm",
            Method::Bagging => "bagging",
            Method::Resvm => "resvm",
        }
    }

    pub fn index(self) -> u64 {
        self as u64
    }

    /// Hyperparameter names tuned for this method, in tuple order.
    pub fn params(self, kernel: KernelKind) -> Vec<&'static str> {
        let mut names = match self {
            Method::Cwsvm => vec!["c_u", "w_pos"],
            Method::Bagging => vec!["c_u", "unl_ratio"],
            Method::Resvm => vec!["c_u", "w_pos", "n_pos_frac", "unl_ratio"],
        };
        if kernel == KernelKind::Rbf {
            names.push("gamma");
        }
        names
    }

    /// Default search grids.
    pub fn default_space(self, kernel: KernelKind) -> SearchSpace {
        SearchSpace::new(
            self.params(kernel)
                .into_iter()
                .map(|name| (name.to_string(), Domain::Grid(default_grid(name))))
                .collect(),
        )
    }
}

/// Default grid for a named hyperparameter.
pub fn default_grid(name: &str) -> Vec<f64> {
    let ladder =
        |lo: i32, hi: i32, step: usize| -> Vec<f64> { (lo..=hi).step_by(step).map(|e| 2f64.powi(e)).collect() };
    match name {
        "c_u" => ladder(-5, 5, 2),
        "w_pos" => ladder(-2, 4, 1),
        "gamma" => ladder(-7, 3, 2),
        "n_pos_frac" => vec![0.05, 0.1, 0.2, 0.5, 1.0],
        "unl_ratio" => vec![1.0, 2.0, 5.0, 10.0],
        _ => Vec::new(),
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cwsvm" => Ok(Method::Cwsvm),
            "bagging" | "bag" => Ok(Method::Bagging),
            "resvm" => Ok(Method::Resvm),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    Rbf,
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelKind::Linear),
            "rbf" => Ok(KernelKind::Rbf),
            other => Err(Error::InvalidParameter(format!("unknown kernel {other:?}"))),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
        })
    }
}

/// A trained CWSVM or ensemble.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Cwsvm(CwsvmModel),
    Ensemble(EnsembleModel),
}

impl TrainedModel {
    /// Decision values at arbitrary points.
    pub fn decision_values(&self, points: &[Arc<SparseVector>]) -> Vec<f64> {
        match self {
            TrainedModel::Cwsvm(m) => points.iter().map(|x| m.decision_value(x)).collect(),
            TrainedModel::Ensemble(m) => m.decision_values(points),
        }
    }

    /// Decision values at points of the Gram the model was trained on.
    pub fn decision_values_on(&self, gram: &Gram, targets: &[usize]) -> Vec<f64> {
        match self {
            TrainedModel::Cwsvm(m) => targets.iter().map(|&t| m.decision_value_on(gram, t)).collect(),
            TrainedModel::Ensemble(m) => m.decision_values_on(gram, targets),
        }
    }

    /// Label rule: the SVM sign (`ψ ≥ 0`) for a single model, `d > T` for
    /// ensembles.
    pub fn label(&self, value: f64) -> i8 {
        match self {
            TrainedModel::Cwsvm(_) => {
                if value >= 0.0 {
                    1
                } else {
                    -1
                }
            }
            TrainedModel::Ensemble(m) => ensemble::label_for(value, m.threshold()),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            TrainedModel::Cwsvm(m) => m.to_text(),
            TrainedModel::Ensemble(m) => m.to_text(),
        }
    }

    /// Parses either model format, dispatching on the first line.
    pub fn from_text(text: &str) -> Result<Self> {
        let first = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('#'))
            .unwrap_or("");
        match first {
            "format cwsvm 1" => Ok(TrainedModel::Cwsvm(CwsvmModel::from_text(text)?)),
            "format ensemble 1" => Ok(TrainedModel::Ensemble(EnsembleModel::from_text(text)?)),
            other => Err(Error::Model(format!("unrecognized header {other:?}"))),
        }
    }
}

/// Kernel selected by `tuple` for the given kernel family.
pub fn kernel_for(kind: KernelKind, tuple: &Tuple) -> Result<Kernel> {
    match kind {
        KernelKind::Linear => Ok(Kernel::Linear),
        KernelKind::Rbf => Kernel::rbf(tuple.require("gamma")?),
    }
}

fn count_from_fraction(frac: f64, of: usize) -> Result<usize> {
    if !(frac > 0.0 && frac.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "fraction must be positive, got {frac}"
        )));
    }
    Ok(((frac * of as f64).round() as usize).max(1))
}

/// Method configured with everything except the tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodLearner {
    pub method: Method,
    pub kernel: KernelKind,
    pub n_models: usize,
}

impl MethodLearner {
    pub fn new(method: Method, kernel: KernelKind, n_models: usize) -> Self {
        Self {
            method,
            kernel,
            n_models,
        }
    }

    /// Trains on the `positives` / `unlabeled` points of `gram`.
    pub fn fit(
        &self,
        tuple: &Tuple,
        gram: &Gram,
        positives: &[usize],
        unlabeled: &[usize],
        seed: u64,
    ) -> Result<TrainedModel> {
        let kernel = kernel_for(self.kernel, tuple)?;
        let c_u = tuple.require("c_u")?;
        match self.method {
            Method::Cwsvm => {
                let w_pos = tuple.require("w_pos")?;
                let c_p = c_u * w_pos * unlabeled.len() as f64 / positives.len().max(1) as f64;
                let params = CwsvmParams::new(c_p, c_u, kernel)?;
                Ok(TrainedModel::Cwsvm(cwsvm::train_on_gram(
                    gram, positives, unlabeled, &params,
                )?))
            }
            Method::Bagging => {
                // U resamples are sized relative to P, on the same ratio grid
                // as RESVM.
                let n_unl = count_from_fraction(tuple.require("unl_ratio")?, positives.len())?;
                let params = BaggingParams::new(self.n_models, n_unl, c_u, kernel, seed)?;
                Ok(TrainedModel::Ensemble(ensemble::train_bagging_on_gram(
                    gram, positives, unlabeled, &params,
                )?))
            }
            Method::Resvm => {
                let w_pos = tuple.require("w_pos")?;
                let n_pos = count_from_fraction(tuple.require("n_pos_frac")?, positives.len())?;
                let n_unl = count_from_fraction(tuple.require("unl_ratio")?, n_pos)?;
                let params = ResvmParams::new(self.n_models, n_pos, n_unl, c_u, w_pos, kernel, seed)?;
                Ok(TrainedModel::Ensemble(ensemble::train_resvm_on_gram(
                    gram, positives, unlabeled, &params,
                )?))
            }
        }
    }
}

impl Learner for MethodLearner {
    fn kernel(&self, tuple: &Tuple) -> Result<Kernel> {
        kernel_for(self.kernel, tuple)
    }

    fn fit_predict(
        &self,
        tuple: &Tuple,
        gram: &Gram,
        positives: &[usize],
        unlabeled: &[usize],
        targets: &[usize],
        seed: u64,
    ) -> Result<Vec<i8>> {
        let model = self.fit(tuple, gram, positives, unlabeled, seed)?;
        Ok(model
            .decision_values_on(gram, targets)
            .into_iter()
            .map(|v| model.label(v))
            .collect())
    }
}
