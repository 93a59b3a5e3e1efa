//! Instances, datasets and the stochastic operations that build simulation
//! training sets: synthetic generation, subsampling, label contamination and
//! bootstrap resampling.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{rng, Rng};

/// Sparse feature vector with 1-based, strictly increasing indices.
///
/// Only nonzero entries are stored. The squared Euclidean norm is computed
/// once at construction so kernels can form `‖a−b‖²` without a sparse merge.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
    sq_norm: f64,
}

impl SparseVector {
    /// Builds a vector from `(index, value)` pairs. Zero values are dropped.
    pub fn new(pairs: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (index, value) in pairs {
            if index == 0 {
                return Err(Error::InvalidParameter("feature indices start at 1".into()));
            }
            if let Some(&last) = indices.last() {
                if index <= last {
                    return Err(Error::InvalidParameter(format!(
                        "feature index {index} does not follow {last}"
                    )));
                }
            }
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "feature {index} has non-finite value {value}"
                )));
            }
            if value != 0.0 {
                indices.push(index);
                values.push(value);
            }
        }
        Ok(Self::from_parts(indices, values))
    }

    /// Dense slice to sparse vector; element `k` becomes feature `k + 1`.
    pub fn from_dense(values: &[f64]) -> Self {
        let (indices, values) = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, &v)| (k as u32 + 1, v))
            .unzip();
        Self::from_parts(indices, values)
    }

    fn from_parts(indices: Vec<u32>, values: Vec<f64>) -> Self {
        let sq_norm = values.iter().map(|v| v * v).sum();
        Self {
            indices,
            values,
            sq_norm,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Largest stored feature index, 0 for the zero vector.
    pub fn max_index(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(k) => self.values[k],
            Err(_) => 0.0,
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.sq_norm
    }

    /// Sparse dot product, accumulated in ascending index order.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a_idx, a_val) = (&self.indices, &self.values);
        let (b_idx, b_val) = (&other.indices, &other.values);
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        while i < a_idx.len() && j < b_idx.len() {
            match a_idx[i].cmp(&b_idx[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += a_val[i] * b_val[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    /// Dot product with a dense weight vector indexed by `feature - 1`.
    pub fn dot_dense(&self, weights: &[f64]) -> f64 {
        self.iter()
            .map(|(i, v)| weights.get(i as usize - 1).map_or(0.0, |w| w * v))
            .sum()
    }
}

/// Label as seen by the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observed {
    Positive,
    Unlabeled,
    /// Only used for fully labeled evaluation data.
    Negative,
}

/// Ground-truth class, known only in simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    Positive,
    Negative,
}

impl Class {
    pub fn is_positive(self) -> bool {
        self == Class::Positive
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    /// Position of the instance in the source it was read from or generated
    /// into; preserved by every resampling operation.
    pub id: u64,
    pub features: Arc<SparseVector>,
    pub observed: Observed,
    pub truth: Option<Class>,
}

impl Instance {
    pub fn new(id: u64, features: SparseVector, observed: Observed, truth: Option<Class>) -> Self {
        Self {
            id,
            features: Arc::new(features),
            observed,
            truth,
        }
    }

    /// Fully labeled instance whose observed label equals its class.
    pub fn labeled(id: u64, features: SparseVector, class: Class) -> Self {
        let observed = match class {
            Class::Positive => Observed::Positive,
            Class::Negative => Observed::Negative,
        };
        Self::new(id, features, observed, Some(class))
    }

    pub fn with_observed(&self, observed: Observed) -> Self {
        Self {
            observed,
            ..self.clone()
        }
    }

    pub fn is_observed_positive(&self) -> bool {
        self.observed == Observed::Positive
    }
}

/// Ordered, immutable collection of instances.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    instances: Vec<Instance>,
    dimension: usize,
}

impl Dataset {
    pub fn new(instances: Vec<Instance>) -> Self {
        let dimension = instances.iter().map(|x| x.features.max_index()).max().unwrap_or(0);
        Self { instances, dimension }
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<Instance> {
        self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// The set P: instances observed as positive.
    pub fn positives(&self) -> impl Iterator<Item = &Instance> {
        self.instances.iter().filter(|x| x.observed == Observed::Positive)
    }

    /// The set U: instances observed as unlabeled.
    pub fn unlabeled(&self) -> impl Iterator<Item = &Instance> {
        self.instances.iter().filter(|x| x.observed == Observed::Unlabeled)
    }

    pub fn count_observed(&self, label: Observed) -> usize {
        self.instances.iter().filter(|x| x.observed == label).count()
    }

    pub fn count_truth(&self, class: Class) -> usize {
        self.instances.iter().filter(|x| x.truth == Some(class)).count()
    }
}

// ---------------------------------------------------------------------------
// Sparse text format

/// Parses the sparse `label index:value ...` format; label `+1` is positive,
/// every other label negative.
pub fn parse_sparse(text: &str) -> Result<Dataset> {
    parse_sparse_with(text, |label| label == 1.0)
}

/// Parses the sparse format with a caller-supplied positive-class predicate
/// on the numeric label (one-vs-all binarization of multiclass files).
pub fn parse_sparse_with(text: &str, is_positive: impl Fn(f64) -> bool) -> Result<Dataset> {
    let mut instances = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(label_token) = tokens.next() else {
            continue;
        };
        let err = |message: String| Error::Parse { line: line_no, message };
        let label: f64 = label_token
            .parse()
            .map_err(|_| err(format!("bad label {label_token:?}")))?;
        let mut pairs = Vec::new();
        let mut last = 0u32;
        for token in tokens {
            let (index, value) = token
                .split_once(':')
                .ok_or_else(|| err(format!("expected index:value, got {token:?}")))?;
            let index: u32 = index.parse().map_err(|_| err(format!("bad feature index {index:?}")))?;
            let value: f64 = value.parse().map_err(|_| err(format!("bad feature value {value:?}")))?;
            if index < 1 {
                return Err(err("feature indices start at 1".into()));
            }
            if index <= last {
                return Err(err(format!("feature index {index} not greater than {last}")));
            }
            if !value.is_finite() {
                return Err(err(format!("non-finite value for feature {index}")));
            }
            last = index;
            pairs.push((index, value));
        }
        let features = SparseVector::new(pairs).map_err(|e| err(e.to_string()))?;
        let class = if is_positive(label) {
            Class::Positive
        } else {
            Class::Negative
        };
        instances.push(Instance::labeled(instances.len() as u64, features, class));
    }
    Ok(Dataset::new(instances))
}

pub fn read_sparse_file(path: &Path, is_positive: impl Fn(f64) -> bool) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sparse_with(&text, is_positive)
}

/// Serializes a dataset in the sparse format. The label is `+1`/`-1` from the
/// true class when known, otherwise from the observed label (`0` for
/// unlabeled).
pub fn write_sparse(data: &Dataset) -> String {
    let mut out = String::new();
    for x in data.instances() {
        let label = match (x.truth, x.observed) {
            (Some(Class::Positive), _) | (None, Observed::Positive) => "+1",
            (Some(Class::Negative), _) | (None, Observed::Negative) => "-1",
            (None, Observed::Unlabeled) => "0",
        };
        out.push_str(label);
        for (i, v) in x.features.iter() {
            let _ = write!(out, " {i}:{v}");
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Synthetic data

pub const SYNTHETIC_RADIUS: f64 = 4.0;

/// Two-dimensional benchmark: positives from a standard normal, negatives on
/// the circle of radius 4 (uniform angle) plus standard-normal noise.
/// Positives come first in the returned dataset.
pub fn generate_synthetic(n_pos: usize, n_neg: usize, seed: u64) -> Dataset {
    let mut rng = rng(seed);
    let mut instances = Vec::with_capacity(n_pos + n_neg);
    for _ in 0..n_pos {
        let x: f64 = StandardNormal.sample(&mut rng);
        let y: f64 = StandardNormal.sample(&mut rng);
        let id = instances.len() as u64;
        instances.push(Instance::labeled(
            id,
            SparseVector::from_dense(&[x, y]),
            Class::Positive,
        ));
    }
    for _ in 0..n_neg {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let ex: f64 = StandardNormal.sample(&mut rng);
        let ey: f64 = StandardNormal.sample(&mut rng);
        let x = SYNTHETIC_RADIUS * theta.cos() + ex;
        let y = SYNTHETIC_RADIUS * theta.sin() + ey;
        let id = instances.len() as u64;
        instances.push(Instance::labeled(
            id,
            SparseVector::from_dense(&[x, y]),
            Class::Negative,
        ));
    }
    Dataset::new(instances)
}

// ---------------------------------------------------------------------------
// Contamination

/// Fractions of mislabeled instances to inject into P and U.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContaminationSpec {
    pub rate_p: f64,
    pub rate_u: f64,
    pub seed: u64,
}

impl ContaminationSpec {
    pub fn new(rate_p: f64, rate_u: f64, seed: u64) -> Result<Self> {
        for (name, rate) in [("rate_p", rate_p), ("rate_u", rate_u)] {
            if !(0.0..0.5).contains(&rate) {
                return Err(Error::InvalidParameter(format!("{name} = {rate} outside [0, 0.5)")));
            }
        }
        Ok(Self { rate_p, rate_u, seed })
    }
}

/// `round(rate · size)` with halves rounded up.
pub fn contamination_count(rate: f64, size: usize) -> usize {
    // The epsilon absorbs representation error such as 0.15 * 10 = 1.4999….
    (rate * size as f64 + 0.5 + 1e-9).floor() as usize
}

/// Injects label noise into a clean training set.
///
/// `round(rate_p·|P|)` members of P are replaced by true negatives and
/// `round(rate_u·|U|)` members of U by true positives. Replacements are drawn
/// without replacement from `pool`, which must be disjoint from both the
/// training and the test data. Set sizes and true labels are preserved; the
/// replaced instances keep their slot's observed label.
pub fn contaminate(train: &Dataset, pool: &[Instance], spec: &ContaminationSpec) -> Result<Dataset> {
    let spec = ContaminationSpec::new(spec.rate_p, spec.rate_u, spec.seed)?;
    if train.instances().iter().any(|x| x.truth.is_none()) {
        return Err(Error::InvalidParameter("contamination needs true labels".into()));
    }
    let mut rng = rng(spec.seed);
    let slots_p: Vec<usize> = positions(train, Observed::Positive);
    let slots_u: Vec<usize> = positions(train, Observed::Unlabeled);
    let k_p = contamination_count(spec.rate_p, slots_p.len());
    let k_u = contamination_count(spec.rate_u, slots_u.len());

    let pool_neg: Vec<&Instance> = pool.iter().filter(|x| x.truth == Some(Class::Negative)).collect();
    let pool_pos: Vec<&Instance> = pool.iter().filter(|x| x.truth == Some(Class::Positive)).collect();
    if pool_neg.len() < k_p {
        return Err(Error::InsufficientData {
            what: "held-out negatives for false positives",
            needed: k_p,
            available: pool_neg.len(),
        });
    }
    if pool_pos.len() < k_u {
        return Err(Error::InsufficientData {
            what: "held-out positives for contaminating U",
            needed: k_u,
            available: pool_pos.len(),
        });
    }

    let mut out = train.instances().to_vec();
    let mut inject = |slots: &[usize], donors: &[&Instance], k: usize, label: Observed, rng: &mut Rng| {
        let chosen_slots = choose(slots.len(), k, rng);
        let chosen_donors = choose(donors.len(), k, rng);
        for (s, d) in chosen_slots.into_iter().zip(chosen_donors) {
            out[slots[s]] = donors[d].with_observed(label);
        }
    };
    inject(&slots_p, &pool_neg, k_p, Observed::Positive, &mut rng);
    inject(&slots_u, &pool_pos, k_u, Observed::Unlabeled, &mut rng);
    Ok(Dataset::new(out))
}

fn positions(data: &Dataset, label: Observed) -> Vec<usize> {
    data.instances()
        .iter()
        .enumerate()
        .filter(|(_, x)| x.observed == label)
        .map(|(i, _)| i)
        .collect()
}

/// `k` distinct indices from `0..n`, uniformly, in selection order.
fn choose(n: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let (head, _) = idx.partial_shuffle(rng, k);
    head.to_vec()
}

/// Fraction of instances whose observed label disagrees with the true class
/// (positives in U, negatives in P).
pub fn contamination_of<'a>(set: impl IntoIterator<Item = &'a Instance>) -> f64 {
    let (mut wrong, mut total) = (0usize, 0usize);
    for x in set {
        total += 1;
        let mislabeled = matches!(
            (x.observed, x.truth),
            (Observed::Positive, Some(Class::Negative))
                | (Observed::Unlabeled, Some(Class::Positive))
                | (Observed::Negative, Some(Class::Positive))
        );
        wrong += usize::from(mislabeled);
    }
    if total == 0 {
        0.0
    } else {
        wrong as f64 / total as f64
    }
}

// ---------------------------------------------------------------------------
// Resampling

/// `n` indices drawn uniformly with replacement from `0..len`.
pub fn bootstrap_indices(len: usize, n: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..len as u64) as usize).collect()
}

/// Draws `n` items uniformly with replacement.
pub fn bootstrap<T: Clone>(source: &[T], n: usize, seed: u64) -> Result<Vec<T>> {
    if source.is_empty() {
        return Err(Error::EmptySource);
    }
    if n == 0 {
        return Err(Error::InvalidParameter("resample size must be at least 1".into()));
    }
    let mut rng = rng(seed);
    Ok(bootstrap_indices(source.len(), n, &mut rng)
        .into_iter()
        .map(|i| source[i].clone())
        .collect())
}

/// Requested test set composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestSpec {
    pub positives: usize,
    pub negatives: usize,
}

/// Outcome of [`subsample_split`]. `holdout` holds every unused instance and
/// serves as the donor pool for [`contaminate`].
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub holdout: Vec<Instance>,
}

/// Samples without replacement a clean training set (`train_p` true
/// positives observed as P, `train_u` true negatives observed as U) and a
/// disjoint, fully labeled test set.
pub fn subsample_split(data: &Dataset, train_p: usize, train_u: usize, test: TestSpec, seed: u64) -> Result<Split> {
    let mut positives: Vec<&Instance> = Vec::new();
    let mut negatives: Vec<&Instance> = Vec::new();
    for x in data.instances() {
        match x.truth {
            Some(Class::Positive) => positives.push(x),
            Some(Class::Negative) => negatives.push(x),
            None => return Err(Error::InvalidParameter("splitting needs true labels".into())),
        }
    }
    let need_pos = train_p + test.positives;
    let need_neg = train_u + test.negatives;
    if positives.len() < need_pos {
        return Err(Error::InsufficientData {
            what: "positives",
            needed: need_pos,
            available: positives.len(),
        });
    }
    if negatives.len() < need_neg {
        return Err(Error::InsufficientData {
            what: "negatives",
            needed: need_neg,
            available: negatives.len(),
        });
    }
    let mut rng = rng(seed);
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);

    let mut train = Vec::with_capacity(train_p + train_u);
    train.extend(positives[..train_p].iter().map(|x| x.with_observed(Observed::Positive)));
    train.extend(
        negatives[..train_u]
            .iter()
            .map(|x| x.with_observed(Observed::Unlabeled)),
    );

    let fully_labeled = |x: &&Instance| {
        let observed = match x.truth {
            Some(Class::Positive) => Observed::Positive,
            _ => Observed::Negative,
        };
        x.with_observed(observed)
    };
    let mut test_set = Vec::with_capacity(test.positives + test.negatives);
    test_set.extend(positives[train_p..need_pos].iter().map(fully_labeled));
    test_set.extend(negatives[train_u..need_neg].iter().map(fully_labeled));

    let holdout = positives[need_pos..]
        .iter()
        .chain(negatives[need_neg..].iter())
        .map(fully_labeled)
        .collect();

    Ok(Split {
        train: Dataset::new(train),
        test: Dataset::new(test_set),
        holdout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn parses_single_line() {
        let d = parse_sparse("+1 1:0.5 3:2.0").unwrap();
        assert_eq!(d.len(), 1);
        let x = &d.instances()[0];
        assert_eq!(x.truth, Some(Class::Positive));
        assert_eq!(x.observed, Observed::Positive);
        assert_eq!(x.features.get(1), 0.5);
        assert_eq!(x.features.get(2), 0.0);
        assert_eq!(x.features.get(3), 2.0);
        assert_eq!(d.dimension(), 3);
    }

    #[test]
    fn parses_two_lines_with_dimension() {
        let d = parse_sparse("-1 2:1.0\n+1 1:1.0").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dimension(), 2);
        assert_eq!(d.instances()[0].truth, Some(Class::Negative));
        assert_eq!(d.instances()[1].truth, Some(Class::Positive));
    }

    #[test]
    fn rejects_non_increasing_indices() {
        match parse_sparse("+1 3:1 2:1") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("+1 1:1\n-1 0:2", 2),
            ("+1 1:1\n\n-1 x:2", 3),
            ("abc 1:1", 1),
            ("+1 1:1\n-1 2:zz", 2),
            ("+1 1:1\n-1 2", 2),
        ];
        for (text, expected) in cases {
            match parse_sparse(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, expected, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn empty_input_comments_and_blank_lines() {
        assert!(parse_sparse("").unwrap().is_empty());
        let d = parse_sparse("# header\n\n+1 1:1 # trailing\n   \n-1 2:3 \n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.instances()[1].features.get(2), 3.0);
    }

    #[test]
    fn multiclass_labels_use_caller_predicate() {
        let d = parse_sparse_with("7 1:1\n3 1:2\n7 2:1", |l| l == 7.0).unwrap();
        let classes: Vec<_> = d.instances().iter().map(|x| x.truth.unwrap()).collect();
        assert_eq!(classes, [Class::Positive, Class::Negative, Class::Positive]);
    }

    #[test]
    fn synthetic_empty() {
        assert!(generate_synthetic(0, 0, 5).is_empty());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(20, 20, 11);
        let b = generate_synthetic(20, 20, 11);
        assert_eq!(write_sparse(&a), write_sparse(&b));
        assert_ne!(write_sparse(&a), write_sparse(&generate_synthetic(20, 20, 12)));
    }

    #[test]
    fn synthetic_positives_are_standard_normal() {
        let d = generate_synthetic(10_000, 0, 3);
        for feature in [1, 2] {
            let xs: Vec<f64> = d.instances().iter().map(|x| x.features.get(feature)).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!(mean.abs() < 0.05, "mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "var {var}");
        }
    }

    /// Monte-Carlo oracle for E‖4(cos θ, sin θ) + ε‖ using its own xorshift
    /// generator and Box–Muller normals.
    fn ring_distance_oracle(samples: usize) -> f64 {
        let mut state = 0x2545_F491_4F6C_DD1Du64;
        let mut uniform = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            ((state >> 11) as f64 + 0.5) / (1u64 << 53) as f64
        };
        let mut total = 0.0;
        for _ in 0..samples {
            let theta = std::f64::consts::TAU * uniform();
            let (u1, u2) = (uniform(), uniform());
            let r = (-2.0 * u1.ln()).sqrt();
            let (ex, ey) = (
                r * (std::f64::consts::TAU * u2).cos(),
                r * (std::f64::consts::TAU * u2).sin(),
            );
            total += (4.0 * theta.cos() + ex).hypot(4.0 * theta.sin() + ey);
        }
        total / samples as f64
    }

    #[test]
    fn synthetic_negatives_match_ring_distance() {
        let oracle = ring_distance_oracle(400_000);
        let d = generate_synthetic(0, 10_000, 8);
        let mean = d.instances().iter().map(|x| x.features.sq_norm().sqrt()).sum::<f64>() / d.len() as f64;
        assert!((mean - oracle).abs() < 0.1, "mean {mean} vs oracle {oracle}");
        assert!(d.instances().iter().all(|x| x.truth == Some(Class::Negative)));
    }

    fn clean_split(train_p: usize, train_u: usize, seed: u64) -> Split {
        let data = generate_synthetic(train_p + train_u + 50, train_p + train_u + 50, seed);
        subsample_split(
            &data,
            train_p,
            train_u,
            TestSpec {
                positives: 10,
                negatives: 10,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn zero_rates_leave_labels_untouched() {
        let split = clean_split(30, 60, 1);
        let spec = ContaminationSpec::new(0.0, 0.0, 9).unwrap();
        let out = contaminate(&split.train, &split.holdout, &spec).unwrap();
        for (a, b) in out.instances().iter().zip(split.train.instances()) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.observed, b.observed);
        }
        assert_eq!(contamination_of(out.positives()), 0.0);
        assert_eq!(contamination_of(out.unlabeled()), 0.0);
    }

    #[test]
    fn thirty_percent_of_hundred_is_thirty() {
        let split = clean_split(100, 200, 2);
        let spec = ContaminationSpec::new(0.30, 0.30, 4).unwrap();
        let out = contaminate(&split.train, &split.holdout, &spec).unwrap();
        let false_pos = out.positives().filter(|x| x.truth == Some(Class::Negative)).count();
        let hidden_pos = out.unlabeled().filter(|x| x.truth == Some(Class::Positive)).count();
        assert_eq!(out.count_observed(Observed::Positive), 100);
        assert_eq!(out.count_observed(Observed::Unlabeled), 200);
        assert_eq!(false_pos, 30);
        assert_eq!(hidden_pos, 60);
    }

    #[test]
    fn contamination_draws_only_from_pool() {
        let split = clean_split(40, 80, 3);
        let spec = ContaminationSpec::new(0.25, 0.1, 5).unwrap();
        let out = contaminate(&split.train, &split.holdout, &spec).unwrap();
        let test_ids: HashSet<u64> = split.test.instances().iter().map(|x| x.id).collect();
        let allowed: HashSet<u64> = split
            .train
            .instances()
            .iter()
            .chain(&split.holdout)
            .map(|x| x.id)
            .collect();
        for x in out.instances() {
            assert!(!test_ids.contains(&x.id));
            assert!(allowed.contains(&x.id));
        }
        let ids: HashSet<u64> = out.instances().iter().map(|x| x.id).collect();
        assert_eq!(ids.len(), out.len(), "no instance used twice");
    }

    #[test]
    fn contamination_fails_without_donors() {
        let split = clean_split(10, 10, 4);
        let spec = ContaminationSpec::new(0.3, 0.0, 1).unwrap();
        let err = contaminate(&split.train, &[], &spec).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { .. }));
    }

    #[test]
    fn rates_must_stay_below_half() {
        assert!(ContaminationSpec::new(0.5, 0.0, 0).is_err());
        assert!(ContaminationSpec::new(0.0, -0.1, 0).is_err());
        assert!(ContaminationSpec::new(0.49, 0.0, 0).is_ok());
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(contamination_count(0.30, 100), 30);
        assert_eq!(contamination_count(0.25, 10), 3);
        assert_eq!(contamination_count(0.15, 10), 2);
        assert_eq!(contamination_count(0.10, 200), 20);
        assert_eq!(contamination_count(0.0, 200), 0);
    }

    #[test]
    fn resampled_u_contamination_is_unbiased() {
        // |U| = 200 at 10% contamination, resamples of 50 over many seeds.
        let split = clean_split(20, 200, 6);
        let mut total = 0.0;
        let trials = 20_000;
        for seed in 0..trials {
            let spec = ContaminationSpec::new(0.0, 0.10, seed).unwrap();
            let out = contaminate(&split.train, &split.holdout, &spec).unwrap();
            let u: Vec<Instance> = out.unlabeled().cloned().collect();
            let resample = bootstrap(&u, 50, seed ^ 0xABCD).unwrap();
            total += contamination_of(&resample);
        }
        let mean = total / trials as f64;
        // standard error ≈ sqrt(0.09 / 50 / 20000) ≈ 3e-4
        assert!((mean - 0.10).abs() < 3.0 * 3.1e-4, "mean {mean}");
    }

    #[test]
    fn bootstrap_of_singleton() {
        let out = bootstrap(&["a"], 5, 1).unwrap();
        assert_eq!(out, ["a"; 5]);
    }

    #[test]
    fn bootstrap_rejects_empty_source() {
        assert!(matches!(bootstrap::<u8>(&[], 3, 1), Err(Error::EmptySource)));
    }

    #[test]
    fn bootstrap_distinct_fraction_matches_closed_form() {
        let n = 200usize;
        let source: Vec<usize> = (0..n).collect();
        let trials = 2000;
        let mut total = 0.0;
        for seed in 0..trials {
            let sample = bootstrap(&source, n, seed).unwrap();
            let distinct: HashSet<_> = sample.into_iter().collect();
            total += distinct.len() as f64 / n as f64;
        }
        let expected = 1.0 - (1.0 - 1.0 / n as f64).powi(n as i32);
        let mean = total / trials as f64;
        assert!((mean - expected).abs() < 0.002, "{mean} vs {expected}");
        assert!((expected - (1.0 - (-1.0f64).exp())).abs() < 0.002);
    }

    #[test]
    fn bootstrap_contamination_spread_shrinks_with_size() {
        // Source with exactly 10% contaminated items.
        let source: Vec<bool> = (0..1000).map(|i| i < 100).collect();
        let sd = |n: usize| {
            let values: Vec<f64> = (0..2000)
                .map(|seed| {
                    let s = bootstrap(&source, n, seed * 7 + n as u64).unwrap();
                    s.iter().filter(|&&c| c).count() as f64 / n as f64
                })
                .collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
        };
        let (a, b, c) = (sd(10), sd(100), sd(1000));
        assert!(a > b && b > c, "{a} {b} {c}");
    }

    #[test]
    fn split_with_everything_in_train() {
        let data = generate_synthetic(15, 25, 3);
        let split = subsample_split(
            &data,
            15,
            25,
            TestSpec {
                positives: 0,
                negatives: 0,
            },
            1,
        )
        .unwrap();
        assert!(split.test.is_empty());
        assert!(split.holdout.is_empty());
        let mut ids: Vec<u64> = split.train.instances().iter().map(|x| x.id).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..40).collect::<Vec<u64>>());
    }

    #[test]
    fn split_matches_synthetic_table_sizes() {
        let data = generate_synthetic(5400, 5400, 10);
        let split = subsample_split(
            &data,
            100,
            200,
            TestSpec {
                positives: 5000,
                negatives: 5000,
            },
            3,
        )
        .unwrap();
        assert_eq!(split.train.count_observed(Observed::Positive), 100);
        assert_eq!(split.train.count_observed(Observed::Unlabeled), 200);
        assert_eq!(split.test.count_truth(Class::Positive), 5000);
        assert_eq!(split.test.count_truth(Class::Negative), 5000);
        let train_ids: HashSet<u64> = split.train.instances().iter().map(|x| x.id).collect();
        assert!(split.test.instances().iter().all(|x| !train_ids.contains(&x.id)));
    }

    #[test]
    fn split_is_seed_deterministic() {
        let data = generate_synthetic(100, 100, 10);
        let ids = |seed| {
            let s = subsample_split(
                &data,
                20,
                30,
                TestSpec {
                    positives: 5,
                    negatives: 5,
                },
                seed,
            )
            .unwrap();
            s.train.instances().iter().map(|x| x.id).collect::<Vec<_>>()
        };
        assert_eq!(ids(1), ids(1));
        assert_ne!(ids(1), ids(2));
    }

    #[test]
    fn split_reports_shortage() {
        let data = generate_synthetic(10, 10, 1);
        let err = subsample_split(
            &data,
            8,
            5,
            TestSpec {
                positives: 3,
                negatives: 0,
            },
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InsufficientData { what: "positives", .. }));
    }

    fn sparse_line() -> impl Strategy<Value = (bool, Vec<(u32, f64)>)> {
        (
            any::<bool>(),
            proptest::collection::btree_map(1u32..50, -1e6f64..1e6, 0..8),
        )
            .prop_map(|(pos, m)| (pos, m.into_iter().filter(|(_, v)| *v != 0.0).collect()))
    }

    proptest! {
        #[test]
        fn sparse_text_round_trips(lines in proptest::collection::vec(sparse_line(), 0..20)) {
            let mut text = String::new();
            for (pos, pairs) in &lines {
                text.push_str(if *pos { "+1" } else { "-1" });
                for (i, v) in pairs {
                    text.push_str(&format!(" {i}:{v}"));
                }
                text.push('\n');
            }
            let parsed = parse_sparse(&text).unwrap();
            prop_assert_eq!(write_sparse(&parsed), text);
        }

        #[test]
        fn bootstrap_draws_members_only(len in 1usize..40, n in 1usize..100, seed in any::<u64>()) {
            let source: Vec<usize> = (0..len).collect();
            let out = bootstrap(&source, n, seed).unwrap();
            prop_assert_eq!(out.len(), n);
            prop_assert!(out.iter().all(|i| *i < len));
        }

        #[test]
        fn contamination_preserves_truth(rate_p in 0.0f64..0.45, rate_u in 0.0f64..0.45, seed in any::<u64>()) {
            let split = clean_split(20, 40, 77);
            let spec = ContaminationSpec::new(rate_p, rate_u, seed).unwrap();
            let out = contaminate(&split.train, &split.holdout, &spec).unwrap();
            let original: std::collections::HashMap<u64, Option<Class>> = split
                .train.instances().iter().chain(&split.holdout).map(|x| (x.id, x.truth)).collect();
            for x in out.instances() {
                prop_assert_eq!(original[&x.id], x.truth);
            }
        }
    }
}
