//! Bagging SVM and RESVM: ensembles of class-weighted SVMs trained on
//! bootstrap resamples, aggregated by positive-vote fraction.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::cwsvm::{self, CwsvmModel, CwsvmParams, ModelLines, DEFAULT_TOLERANCE};
use crate::data::{bootstrap_indices, Instance, SparseVector};
use crate::error::{Error, Result};
use crate::kernel::{Gram, Kernel};
use crate::rng::{derive_seed, rng};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// RESVM: every member sees a bootstrap resample of both P and U.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResvmParams {
    pub n_models: usize,
    pub n_pos: usize,
    pub n_unl: usize,
    pub c_unl: f64,
    /// Relative weight of positive errors; `C_P = C_U · w_pos · n_unl / n_pos`.
    pub w_pos: f64,
    pub kernel: Kernel,
    pub seed: u64,
    pub tolerance: f64,
}

impl ResvmParams {
    pub fn new(
        n_models: usize,
        n_pos: usize,
        n_unl: usize,
        c_unl: f64,
        w_pos: f64,
        kernel: Kernel,
        seed: u64,
    ) -> Result<Self> {
        let p = Self {
            n_models,
            n_pos,
            n_unl,
            c_unl,
            w_pos,
            kernel,
            seed,
            tolerance: DEFAULT_TOLERANCE,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn c_pos(&self) -> f64 {
        self.c_unl * self.w_pos * self.n_unl as f64 / self.n_pos as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_models == 0 || self.n_pos == 0 || self.n_unl == 0 {
            return Err(Error::InvalidParameter(
                "n_models, n_pos and n_unl must be at least 1".into(),
            ));
        }
        if !(self.w_pos > 0.0 && self.w_pos.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "w_pos must be positive, got {}",
                self.w_pos
            )));
        }
        self.member_params().map(|_| ())
    }

    fn member_params(&self) -> Result<CwsvmParams> {
        Ok(CwsvmParams::new(self.c_pos(), self.c_unl, self.kernel)?.with_tolerance(self.tolerance))
    }
}

/// Bagging SVM: every member sees all of P and a bootstrap resample of U,
/// with `|P| · C_P = n_unl · C_U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaggingParams {
    pub n_models: usize,
    /// Resample size of U.
    pub n_unl: usize,
    pub c_unl: f64,
    pub kernel: Kernel,
    pub seed: u64,
    pub tolerance: f64,
}

impl BaggingParams {
    pub fn new(n_models: usize, n_unl: usize, c_unl: f64, kernel: Kernel, seed: u64) -> Result<Self> {
        let p = Self {
            n_models,
            n_unl,
            c_unl,
            kernel,
            seed,
            tolerance: DEFAULT_TOLERANCE,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn c_pos(&self, n_positives: usize) -> f64 {
        self.n_unl as f64 * self.c_unl / n_positives as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_models == 0 || self.n_unl == 0 {
            return Err(Error::InvalidParameter("n_models and n_unl must be at least 1".into()));
        }
        self.member_params(1).map(|_| ())
    }

    fn member_params(&self, n_positives: usize) -> Result<CwsvmParams> {
        Ok(CwsvmParams::new(self.c_pos(n_positives), self.c_unl, self.kernel)?.with_tolerance(self.tolerance))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnsembleKind {
    Resvm(ResvmParams),
    Bagging(BaggingParams),
}

#[derive(Debug, Clone)]
pub struct EnsembleModel {
    kind: EnsembleKind,
    members: Vec<CwsvmModel>,
    threshold: f64,
}

/// Seed for member `i`'s resample of P (`set = 0`) or U (`set = 1`).
pub fn member_seed(seed: u64, member: usize, set: u64) -> u64 {
    derive_seed(seed, &[member as u64, set])
}

fn gram_for(kernel: Kernel, p: &[Instance], u: &[Instance]) -> (Gram, Vec<usize>, Vec<usize>) {
    let points: Vec<Arc<SparseVector>> = p.iter().chain(u).map(|x| Arc::clone(&x.features)).collect();
    let pos = (0..p.len()).collect();
    let unl = (p.len()..p.len() + u.len()).collect();
    (Gram::new(kernel, points), pos, unl)
}

fn check_sets(p: &[usize], u: &[usize]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::NoPositives);
    }
    if u.is_empty() {
        return Err(Error::InsufficientData {
            what: "unlabeled instances",
            needed: 1,
            available: 0,
        });
    }
    Ok(())
}

/// Trains members in parallel; results are stored by index and the error of
/// the lowest failing index is reported, so the outcome never depends on
/// scheduling.
fn train_members(n: usize, train: impl Fn(usize) -> Result<CwsvmModel> + Sync) -> Result<Vec<CwsvmModel>> {
    let results: Vec<Result<CwsvmModel>> = (0..n).into_par_iter().map(&train).collect();
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::member(i, e)))
        .collect()
}

pub fn train_resvm(p: &[Instance], u: &[Instance], params: &ResvmParams) -> Result<EnsembleModel> {
    let (gram, pos, unl) = gram_for(params.kernel, p, u);
    train_resvm_on_gram(&gram, &pos, &unl, params)
}

/// RESVM over points of `gram`; `positives` and `unlabeled` index P and U.
pub fn train_resvm_on_gram(
    gram: &Gram,
    positives: &[usize],
    unlabeled: &[usize],
    params: &ResvmParams,
) -> Result<EnsembleModel> {
    params.validate()?;
    check_sets(positives, unlabeled)?;
    let member = params.member_params()?;
    let members = train_members(params.n_models, |i| {
        let p_i = resample(positives, params.n_pos, member_seed(params.seed, i, 0));
        let u_i = resample(unlabeled, params.n_unl, member_seed(params.seed, i, 1));
        cwsvm::train_on_gram(gram, &p_i, &u_i, &member)
    })?;
    Ok(EnsembleModel::new(EnsembleKind::Resvm(*params), members))
}

pub fn train_bagging(p: &[Instance], u: &[Instance], params: &BaggingParams) -> Result<EnsembleModel> {
    let (gram, pos, unl) = gram_for(params.kernel, p, u);
    train_bagging_on_gram(&gram, &pos, &unl, params)
}

pub fn train_bagging_on_gram(
    gram: &Gram,
    positives: &[usize],
    unlabeled: &[usize],
    params: &BaggingParams,
) -> Result<EnsembleModel> {
    params.validate()?;
    check_sets(positives, unlabeled)?;
    let member = params.member_params(positives.len())?;
    let members = train_members(params.n_models, |i| {
        let u_i = resample(unlabeled, params.n_unl, member_seed(params.seed, i, 1));
        cwsvm::train_on_gram(gram, positives, &u_i, &member)
    })?;
    Ok(EnsembleModel::new(EnsembleKind::Bagging(*params), members))
}

/// Bootstrap resample of an index set.
pub fn resample(set: &[usize], n: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed);
    bootstrap_indices(set.len(), n, &mut r)
        .into_iter()
        .map(|k| set[k])
        .collect()
}

// ---------------------------------------------------------------------------
// Aggregation

/// Fraction of members with `ψ ≥ 0`; a zero decision value votes positive.
pub fn vote_fraction(values: &[f64]) -> f64 {
    let positive = values.iter().filter(|&&v| v >= 0.0).count();
    positive as f64 / values.len() as f64
}

/// Ensemble decision value: the vote fraction when votes are mixed, the sum
/// of member values when all vote negative, and one plus that sum when all
/// vote positive. Sums run over the values in ascending order so the result
/// does not depend on member order.
pub fn aggregate(values: &[f64]) -> f64 {
    let v = vote_fraction(values);
    if v > 0.0 && v < 1.0 {
        return v;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sum: f64 = sorted.iter().sum();
    if v == 0.0 {
        sum
    } else {
        1.0 + sum
    }
}

/// `+1` when `d` strictly exceeds `threshold`, `−1` otherwise.
pub fn label_for(d: f64, threshold: f64) -> i8 {
    if d > threshold {
        1
    } else {
        -1
    }
}

impl EnsembleModel {
    pub fn new(kind: EnsembleKind, members: Vec<CwsvmModel>) -> Self {
        Self {
            kind,
            members,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn kind(&self) -> &EnsembleKind {
        &self.kind
    }

    pub fn members(&self) -> &[CwsvmModel] {
        &self.members
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn kernel(&self) -> Kernel {
        match self.kind {
            EnsembleKind::Resvm(p) => p.kernel,
            EnsembleKind::Bagging(p) => p.kernel,
        }
    }

    /// Number of members whose solver hit its iteration budget.
    pub fn unconverged_members(&self) -> usize {
        self.members.iter().filter(|m| !m.converged()).count()
    }

    pub fn member_values(&self, x: &SparseVector) -> Vec<f64> {
        self.members.iter().map(|m| m.decision_value(x)).collect()
    }

    pub fn vote_fraction(&self, x: &SparseVector) -> f64 {
        vote_fraction(&self.member_values(x))
    }

    pub fn decision_value(&self, x: &SparseVector) -> f64 {
        aggregate(&self.member_values(x))
    }

    pub fn predict_label(&self, x: &SparseVector, threshold: f64) -> i8 {
        label_for(self.decision_value(x), threshold)
    }

    /// Decision values for many points, in parallel. Each distinct support
    /// vector shared by several members is evaluated once per point; the
    /// result is bit-identical to [`EnsembleModel::decision_value`].
    pub fn decision_values(&self, points: &[Arc<SparseVector>]) -> Vec<f64> {
        let kernel = self.kernel();
        if kernel == Kernel::Linear {
            return points.par_iter().map(|x| self.decision_value(x)).collect();
        }
        let expansion = SharedExpansion::build(&self.members, |s| Arc::as_ptr(&s.point) as usize);
        points
            .par_iter()
            .map(|x| {
                let k: Vec<f64> = expansion.points.iter().map(|sv| kernel.eval(sv, x)).collect();
                aggregate(&expansion.member_values(&k))
            })
            .collect()
    }

    /// Decision values at points of `gram`, reusing its kernel values for
    /// support vectors that came from the same Gram.
    pub fn decision_values_on(&self, gram: &Gram, targets: &[usize]) -> Vec<f64> {
        let sourced = self
            .members
            .iter()
            .flat_map(|m| m.support_vectors())
            .all(|s| matches!(s.source, Some(src) if src < gram.len() && Arc::ptr_eq(gram.point(src), &s.point)));
        if !sourced || self.kernel() == Kernel::Linear || gram.kernel() != self.kernel() {
            let points: Vec<Arc<SparseVector>> = targets.iter().map(|&t| Arc::clone(gram.point(t))).collect();
            return self.decision_values(&points);
        }
        let expansion = SharedExpansion::build(&self.members, |s| s.source.unwrap_or(usize::MAX));
        targets
            .par_iter()
            .map(|&t| {
                let k: Vec<f64> = expansion.sources.iter().map(|&src| gram.get(src, t)).collect();
                aggregate(&expansion.member_values(&k))
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("format ensemble 1\n");
        match &self.kind {
            EnsembleKind::Resvm(p) => {
                out.push_str("kind resvm\n");
                let _ = writeln!(out, "n_pos {}", p.n_pos);
                let _ = writeln!(out, "n_unl {}", p.n_unl);
                let _ = writeln!(out, "c_unl {:.16e}", p.c_unl);
                let _ = writeln!(out, "w_pos {:.16e}", p.w_pos);
                let _ = writeln!(out, "seed {}", p.seed);
            }
            EnsembleKind::Bagging(p) => {
                out.push_str("kind bagging\n");
                let _ = writeln!(out, "n_unl {}", p.n_unl);
                let _ = writeln!(out, "c_unl {:.16e}", p.c_unl);
                let _ = writeln!(out, "seed {}", p.seed);
            }
        }
        let _ = writeln!(out, "threshold {:.16e}", self.threshold);
        let _ = writeln!(out, "n_models {}", self.members.len());
        for (i, m) in self.members.iter().enumerate() {
            let _ = writeln!(out, "member {i}");
            m.write_to(&mut out);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = ModelLines::new(text);
        lines.expect_exact("format ensemble 1")?;
        let kind = lines.field("kind")?;
        let read_kind = |lines: &mut ModelLines<'_>| -> Result<EnsembleKind> {
            match kind {
                "resvm" => {
                    let n_pos = lines.count_field("n_pos")?;
                    let n_unl = lines.count_field("n_unl")?;
                    let c_unl = lines.number_field("c_unl")?;
                    let w_pos = lines.number_field("w_pos")?;
                    let seed = lines.field("seed")?;
                    let seed = seed.parse().map_err(|_| lines.error(format!("bad seed {seed:?}")))?;
                    Ok(EnsembleKind::Resvm(ResvmParams {
                        n_models: 1,
                        n_pos,
                        n_unl,
                        c_unl,
                        w_pos,
                        kernel: Kernel::Linear,
                        seed,
                        tolerance: DEFAULT_TOLERANCE,
                    }))
                }
                "bagging" => {
                    let n_unl = lines.count_field("n_unl")?;
                    let c_unl = lines.number_field("c_unl")?;
                    let seed = lines.field("seed")?;
                    let seed = seed.parse().map_err(|_| lines.error(format!("bad seed {seed:?}")))?;
                    Ok(EnsembleKind::Bagging(BaggingParams {
                        n_models: 1,
                        n_unl,
                        c_unl,
                        kernel: Kernel::Linear,
                        seed,
                        tolerance: DEFAULT_TOLERANCE,
                    }))
                }
                other => Err(lines.error(format!("unknown ensemble kind {other:?}"))),
            }
        };
        let mut kind = read_kind(&mut lines)?;
        let threshold = lines.number_field("threshold")?;
        let n_models = lines.count_field("n_models")?;
        if n_models == 0 {
            return Err(lines.error("ensemble without members".into()));
        }
        let mut members = Vec::with_capacity(n_models);
        for i in 0..n_models {
            let header = lines.field("member")?;
            if header != i.to_string() {
                return Err(lines.error(format!("expected member {i}, got {header:?}")));
            }
            members.push(CwsvmModel::read_from(&mut lines)?);
        }
        lines.expect_end()?;
        let kernel = members[0].kernel();
        if members.iter().any(|m| m.kernel() != kernel) {
            return Err(Error::Model("members use different kernels".into()));
        }
        match &mut kind {
            EnsembleKind::Resvm(p) => {
                p.n_models = n_models;
                p.kernel = kernel;
                p.tolerance = members[0].params().tolerance;
            }
            EnsembleKind::Bagging(p) => {
                p.n_models = n_models;
                p.kernel = kernel;
                p.tolerance = members[0].params().tolerance;
            }
        }
        Ok(Self {
            kind,
            members,
            threshold,
        })
    }
}

/// Support vectors of all members merged into one table, with each member's
/// expansion expressed as `(table index, coefficient)` in its original order.
struct SharedExpansion {
    points: Vec<Arc<SparseVector>>,
    sources: Vec<usize>,
    members: Vec<(Vec<(usize, f64)>, f64)>,
}

impl SharedExpansion {
    fn build(members: &[CwsvmModel], key: impl Fn(&cwsvm::SupportVector) -> usize) -> Self {
        let mut table: HashMap<usize, usize> = HashMap::new();
        let mut points = Vec::new();
        let mut sources = Vec::new();
        let members = members
            .iter()
            .map(|m| {
                let terms = m
                    .support_vectors()
                    .iter()
                    .map(|s| {
                        let slot = *table.entry(key(s)).or_insert_with(|| {
                            points.push(Arc::clone(&s.point));
                            sources.push(s.source.unwrap_or(usize::MAX));
                            points.len() - 1
                        });
                        (slot, s.coef())
                    })
                    .collect();
                (terms, m.bias())
            })
            .collect();
        Self {
            points,
            sources,
            members,
        }
    }

    fn member_values(&self, k: &[f64]) -> Vec<f64> {
        self.members
            .iter()
            .map(|(terms, bias)| terms.iter().map(|&(slot, coef)| coef * k[slot]).sum::<f64>() + bias)
            .collect()
    }
}
