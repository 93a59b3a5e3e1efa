//! Kernel functions, Gram matrix access and a byte-bounded LRU row cache.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::data::SparseVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn rbf(gamma: f64) -> Result<Self> {
        let k = Kernel::Rbf { gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Linear => Ok(()),
            Kernel::Rbf { gamma } if gamma > 0.0 && gamma.is_finite() => Ok(()),
            Kernel::Rbf { gamma } => Err(Error::InvalidParameter(format!(
                "RBF gamma must be positive and finite, got {gamma}"
            ))),
        }
    }

    pub fn eval(&self, a: &SparseVector, b: &SparseVector) -> f64 {
        match *self {
            Kernel::Linear => a.dot(b),
            Kernel::Rbf { gamma } => {
                let d2 = (a.sq_norm() + b.sq_norm() - 2.0 * a.dot(b)).max(0.0);
                (-gamma * d2).exp()
            }
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Kernel::Linear => None,
            Kernel::Rbf { gamma } => Some(gamma),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Linear => write!(f, "linear"),
            Kernel::Rbf { gamma } => write!(f, "rbf gamma={gamma}"),
        }
    }
}

/// Gram matrices up to this many bytes are precomputed in full.
pub const DEFAULT_DENSE_BUDGET: usize = 64 << 20;

/// Kernel over a fixed point set, optionally backed by a precomputed matrix.
///
/// Training sets, cross-validation folds and ensemble resamples all address
/// points of one `Gram` by index, so a point drawn several times or shared by
/// many members is only ever evaluated once per pair.
#[derive(Debug)]
pub struct Gram {
    kernel: Kernel,
    points: Vec<Arc<SparseVector>>,
    dense: Option<Vec<f64>>,
}

impl Gram {
    pub fn new(kernel: Kernel, points: Vec<Arc<SparseVector>>) -> Self {
        Self::with_budget(kernel, points, DEFAULT_DENSE_BUDGET)
    }

    /// Precomputes the full matrix when `n² · 8` fits in `dense_budget` bytes.
    pub fn with_budget(kernel: Kernel, points: Vec<Arc<SparseVector>>, dense_budget: usize) -> Self {
        let n = points.len();
        let dense = n
            .checked_mul(n)
            .and_then(|nn| nn.checked_mul(8))
            .filter(|&bytes| bytes <= dense_budget)
            .map(|_| {
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    for j in i..n {
                        let v = kernel.eval(&points[i], &points[j]);
                        m[i * n + j] = v;
                        m[j * n + i] = v;
                    }
                }
                m
            });
        Self { kernel, points, dense }
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Arc<SparseVector> {
        &self.points[i]
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.dense {
            Some(m) => m[i * self.points.len() + j],
            None => self.kernel.eval(&self.points[i], &self.points[j]),
        }
    }

    /// Writes `K(i, idx[k])` into `out[k]`.
    pub fn row_into(&self, i: usize, idx: &[usize], out: &mut [f64]) {
        match &self.dense {
            Some(m) => {
                let row = &m[i * self.points.len()..][..self.points.len()];
                for (o, &j) in out.iter_mut().zip(idx) {
                    *o = row[j];
                }
            }
            None => {
                let p = &self.points[i];
                for (o, &j) in out.iter_mut().zip(idx) {
                    *o = self.kernel.eval(p, &self.points[j]);
                }
            }
        }
    }
}

/// Least-recently-used cache of kernel rows bounded by a byte budget.
///
/// Owned by a single trainer; always keeps at least the two most recent rows
/// so an SMO step never evicts the partner row it is about to use.
#[derive(Debug)]
pub struct RowCache {
    rows: HashMap<usize, (Arc<[f64]>, u64)>,
    clock: u64,
    budget: usize,
    used: usize,
    hits: u64,
    misses: u64,
}

impl RowCache {
    pub fn new(budget_bytes: usize) -> Self {
        Self {
            rows: HashMap::new(),
            clock: 0,
            budget: budget_bytes,
            used: 0,
            hits: 0,
            misses: 0,
        }
    }

    /// Returns row `i`, computing it with `fill` on a miss.
    pub fn get_or_insert(&mut self, i: usize, len: usize, fill: impl FnOnce(&mut [f64])) -> Arc<[f64]> {
        self.clock += 1;
        if let Some((row, stamp)) = self.rows.get_mut(&i) {
            *stamp = self.clock;
            self.hits += 1;
            return Arc::clone(row);
        }
        self.misses += 1;
        let mut buf = vec![0.0; len];
        fill(&mut buf);
        let row: Arc<[f64]> = buf.into();
        let bytes = len * std::mem::size_of::<f64>();
        while self.used + bytes > self.budget && self.rows.len() >= 2 {
            self.evict_oldest();
        }
        self.used += bytes;
        self.rows.insert(i, (Arc::clone(&row), self.clock));
        row
    }

    fn evict_oldest(&mut self) {
        if let Some((&key, _)) = self.rows.iter().min_by_key(|(_, (_, stamp))| *stamp) {
            if let Some((row, _)) = self.rows.remove(&key) {
                self.used -= row.len() * std::mem::size_of::<f64>();
            }
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.rows.contains_key(&i)
    }

    pub fn bytes_used(&self) -> usize {
        self.used
    }

    /// `(hits, misses)` since construction.
    pub fn stats(&self) -> (u64, u64) {
        (self.hits, self.misses)
    }
}

/// Row `i` of the Gram matrix of `points`, served from `cache` when present.
pub fn gram_row(kernel: Kernel, i: usize, points: &[Arc<SparseVector>], cache: &mut RowCache) -> Arc<[f64]> {
    cache.get_or_insert(i, points.len(), |out| {
        for (o, p) in out.iter_mut().zip(points) {
            *o = kernel.eval(&points[i], p);
        }
    })
}
