//! Hyperparameter selection: stratified folds shared across methods,
//! cross-validated `pu_score`, and grid or random search.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::data::{Dataset, Observed, SparseVector};
use crate::error::{Error, Result};
use crate::evaluation::pu_score;
use crate::fmt::general;
use crate::kernel::{Gram, Kernel};
use crate::rng::{derive_seed, rng};

/// Named hyperparameter values in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tuple(pub Vec<(String, f64)>);

impl Tuple {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn require(&self, name: &str) -> Result<f64> {
        self.get(name)
            .ok_or_else(|| Error::InvalidParameter(format!("tuple lacks {name:?}: {self}")))
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (name, value)) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(";")?;
            }
            write!(f, "{name}={value}")?;
        }
        Ok(())
    }
}

/// Parses the `name=value;...` form written by `Display`, which round-trips
/// values exactly.
impl std::str::FromStr for Tuple {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Tuple(Vec::new()));
        }
        s.split(';')
            .map(|part| {
                let (name, value) = part
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidParameter(format!("bad tuple entry {part:?}")))?;
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad tuple value {part:?}")))?;
                Ok((name.trim().to_string(), value))
            })
            .collect::<Result<Vec<_>>>()
            .map(Tuple)
    }
}

/// Stratified assignment of training instances to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

/// Shuffles observed positives and the remaining instances separately, lays
/// them out positives first and deals positions round-robin to folds. Fold
/// sizes then differ by at most one and positives are spread as evenly as
/// possible. Only labels, order and the seed matter.
pub fn make_folds(train: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    let mut pos: Vec<usize> = Vec::new();
    let mut rest: Vec<usize> = Vec::new();
    for (i, x) in train.instances().iter().enumerate() {
        if x.observed == Observed::Positive {
            pos.push(i);
        } else {
            rest.push(i);
        }
    }
    if pos.len() < k {
        return Err(Error::InsufficientData {
            what: "observed positives to stratify folds",
            needed: k,
            available: pos.len(),
        });
    }
    let mut r = rng(seed);
    pos.shuffle(&mut r);
    rest.shuffle(&mut r);
    let mut assignment = vec![0; train.len()];
    for (slot, &i) in pos.iter().chain(&rest).enumerate() {
        assignment[i] = slot % k;
    }
    Ok(FoldPlan { k, assignment, seed })
}

impl FoldPlan {
    pub fn held_out(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}

/// A trainable method addressed through hyperparameter tuples.
pub trait Learner: Sync {
    /// Kernel the tuple asks for; the Gram matrix is shared across tuples
    /// with the same kernel.
    fn kernel(&self, tuple: &Tuple) -> Result<Kernel>;

    /// Trains on the `positives`/`unlabeled` points of `gram` and returns
    /// `±1` labels at `targets`.
    fn fit_predict(
        &self,
        tuple: &Tuple,
        gram: &Gram,
        positives: &[usize],
        unlabeled: &[usize],
        targets: &[usize],
        seed: u64,
    ) -> Result<Vec<i8>>;
}

/// Gram matrices over one training set, built on first use per kernel.
pub struct GramCache {
    points: Vec<Arc<SparseVector>>,
    grams: Mutex<HashMap<String, Arc<Gram>>>,
}

impl GramCache {
    pub fn new(data: &Dataset) -> Self {
        Self {
            points: data.instances().iter().map(|x| Arc::clone(&x.features)).collect(),
            grams: Mutex::new(HashMap::new()),
        }
    }

    pub fn get(&self, kernel: Kernel) -> Arc<Gram> {
        let key = format!("{kernel:?}");
        if let Some(g) = self.grams.lock().expect("gram cache lock").get(&key) {
            return Arc::clone(g);
        }
        let gram = Arc::new(Gram::new(kernel, self.points.clone()));
        let mut map = self.grams.lock().expect("gram cache lock");
        Arc::clone(map.entry(key).or_insert(gram))
    }
}

/// Per-fold `pu_score` of `tuple`: for each fold, train on the other folds
/// and score label predictions on the held-out one. Fold `f` uses seed
/// `derive_seed(seed, [f])`.
pub fn cross_val_scores(
    learner: &dyn Learner,
    tuple: &Tuple,
    plan: &FoldPlan,
    data: &Dataset,
    grams: &GramCache,
    seed: u64,
) -> Result<Vec<f64>> {
    if plan.assignment.len() != data.len() {
        return Err(Error::InvalidParameter("fold plan does not match data".into()));
    }
    let gram = grams.get(learner.kernel(tuple)?);
    let results: Vec<Result<f64>> = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let (mut pos, mut unl) = (Vec::new(), Vec::new());
            for i in plan.training(f) {
                match data.instances()[i].observed {
                    Observed::Positive => pos.push(i),
                    _ => unl.push(i),
                }
            }
            let held = plan.held_out(f);
            let labels = learner.fit_predict(tuple, &gram, &pos, &unl, &held, derive_seed(seed, &[f as u64]))?;
            let observed: Vec<bool> = held
                .iter()
                .map(|&i| data.instances()[i].observed == Observed::Positive)
                .collect();
            pu_score(&labels, &observed)
        })
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(f, r)| r.map_err(|e| Error::fold(f, e)))
        .collect()
}

/// Mean of [`cross_val_scores`].
pub fn cross_val_score(
    learner: &dyn Learner,
    tuple: &Tuple,
    plan: &FoldPlan,
    data: &Dataset,
    grams: &GramCache,
    seed: u64,
) -> Result<f64> {
    let s = cross_val_scores(learner, tuple, plan, data, grams, seed)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Explicit values, in order.
    Grid(Vec<f64>),
    /// Continuous range for random search; `log` samples uniformly in log space.
    Box { lo: f64, hi: f64, log: bool },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchSpace {
    pub params: Vec<(String, Domain)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Grid,
    Random { budget: usize },
}

impl SearchSpace {
    pub fn new(params: Vec<(String, Domain)>) -> Self {
        Self { params }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::InvalidParameter("empty search space".into()));
        }
        for (name, d) in &self.params {
            match d {
                Domain::Grid(v) if v.is_empty() => {
                    return Err(Error::InvalidParameter(format!("empty grid for {name}")))
                }
                Domain::Grid(v) if v.iter().any(|x| !x.is_finite()) => {
                    return Err(Error::InvalidParameter(format!("non-finite grid value for {name}")))
                }
                Domain::Box { lo, hi, log }
                    if !lo.is_finite() || !hi.is_finite() || lo > hi || (*log && *lo <= 0.0) =>
                {
                    return Err(Error::InvalidParameter(format!("bad box for {name}: [{lo}, {hi}]")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Candidate tuples in canonical order: the Cartesian product with the
    /// last parameter varying fastest (grid), or `budget` independent draws.
    pub fn tuples(&self, mode: SearchMode, seed: u64) -> Result<Vec<Tuple>> {
        self.validate()?;
        match mode {
            SearchMode::Grid => {
                let mut grids = Vec::new();
                for (name, d) in &self.params {
                    match d {
                        Domain::Grid(v) => grids.push((name.clone(), v.clone())),
                        Domain::Box { .. } => {
                            return Err(Error::InvalidParameter(format!(
                                "grid search needs explicit values for {name}"
                            )))
                        }
                    }
                }
                let mut out = vec![Tuple(Vec::new())];
                for (name, values) in grids {
                    out = out
                        .into_iter()
                        .flat_map(|t| {
                            values
                                .iter()
                                .map(|&v| {
                                    let mut t = t.clone();
                                    t.0.push((name.clone(), v));
                                    t
                                })
                                .collect::<Vec<_>>()
                        })
                        .collect();
                }
                Ok(out)
            }
            SearchMode::Random { budget } => {
                if budget == 0 {
                    return Err(Error::InvalidParameter("random search budget must be positive".into()));
                }
                let mut r = rng(seed);
                Ok((0..budget)
                    .map(|_| {
                        Tuple(
                            self.params
                                .iter()
                                .map(|(name, d)| {
                                    let v = match d {
                                        Domain::Grid(values) => values[r.random_range(0..values.len())],
                                        Domain::Box { lo, hi, log: false } => {
                                            if lo == hi {
                                                *lo
                                            } else {
                                                r.random_range(*lo..=*hi)
                                            }
                                        }
                                        Domain::Box { lo, hi, log: true } => {
                                            let (a, b) = (lo.ln(), hi.ln());
                                            if a == b {
                                                *lo
                                            } else {
                                                r.random_range(a..=b).exp().clamp(*lo, *hi)
                                            }
                                        }
                                    };
                                    (name.clone(), v)
                                })
                                .collect(),
                        )
                    })
                    .collect())
            }
        }
    }

    /// Whether each parameter of `tuple` lies on the edge of its domain: an
    /// end of its grid, or within 5% of the box width from a bound.
    pub fn boundary_flags(&self, tuple: &Tuple) -> Vec<(String, bool)> {
        self.params
            .iter()
            .map(|(name, d)| {
                let v = tuple.get(name).unwrap_or(f64::NAN);
                let edge = match d {
                    Domain::Grid(values) => {
                        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
                        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        v == lo || v == hi
                    }
                    Domain::Box { lo, hi, log } => {
                        let (a, b, x) = if *log {
                            (lo.ln(), hi.ln(), v.ln())
                        } else {
                            (*lo, *hi, v)
                        };
                        let margin = 0.05 * (b - a);
                        x <= a + margin || x >= b - margin
                    }
                };
                (name.clone(), edge)
            })
            .collect()
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub tuple_id: usize,
    pub tuple: Tuple,
    /// Per-fold scores, or the error message when the tuple failed.
    pub folds: std::result::Result<Vec<f64>, String>,
}

impl ScoreRow {
    pub fn mean(&self) -> Option<f64> {
        self.folds.as_ref().ok().map(|s| s.iter().sum::<f64>() / s.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: Tuple,
    pub best_id: usize,
    pub best_score: f64,
    /// Parameters whose best value sits on the edge of its domain.
    pub boundary: Vec<(String, bool)>,
    pub table: Vec<ScoreRow>,
}

impl SearchResult {
    pub fn on_boundary(&self) -> bool {
        self.boundary.iter().any(|(_, b)| *b)
    }

    /// Score table as CSV: `tuple_id,tuple,fold,score`, one row per fold;
    /// failed tuples get a single row with fold `-` and score `failed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tuple_id,tuple,fold,score\n");
        for row in &self.table {
            match &row.folds {
                Ok(scores) => {
                    for (f, s) in scores.iter().enumerate() {
                        let _ = writeln!(out, "{},{},{f},{}", row.tuple_id, row.tuple, general(*s, 17));
                    }
                }
                Err(_) => {
                    let _ = writeln!(out, "{},{},-,failed", row.tuple_id, row.tuple);
                }
            }
        }
        out
    }
}

/// Scores every candidate tuple and returns the best by mean score; ties go
/// to the earliest tuple in canonical order.
pub fn search(
    space: &SearchSpace,
    mode: SearchMode,
    seed: u64,
    scorer: impl Fn(&Tuple) -> Result<Vec<f64>> + Sync,
) -> Result<SearchResult> {
    let tuples = space.tuples(mode, seed)?;
    let table: Vec<ScoreRow> = tuples
        .into_par_iter()
        .enumerate()
        .map(|(tuple_id, tuple)| {
            let folds = scorer(&tuple).map_err(|e| e.to_string());
            ScoreRow { tuple_id, tuple, folds }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in table.iter().enumerate() {
        if let Some(m) = row.mean() {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((i, m));
            }
        }
    }
    let Some((i, best_score)) = best else {
        return Err(Error::AllTuplesFailed(
            table
                .iter()
                .filter_map(|r| r.folds.as_ref().err().map(|e| format!("{}: {e}", r.tuple)))
                .collect(),
        ));
    };
    let best = table[i].tuple.clone();
    Ok(SearchResult {
        boundary: space.boundary_flags(&best),
        best,
        best_id: i,
        best_score,
        table,
    })
}
