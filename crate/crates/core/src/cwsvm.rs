//! Class-weighted SVM: per-class penalties `C_P` for P and `C_U` for U,
//! trained by SMO on the dual problem
//!
//! ```text
//! min ½ αᵀQα − Σα   s.t.  Σ α_i y_i = 0,  0 ≤ α_i ≤ C_i,   Q_ij = y_i y_j K_ij
//! ```
//!
//! with P labeled `+1` and U labeled `−1`.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::data::{Instance, SparseVector};
use crate::error::{Error, Result};
use crate::kernel::{Gram, Kernel, RowCache};

pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_CACHE_BYTES: usize = 128 << 20;

/// Curvature substituted for non-positive `K_ii + K_jj − 2K_ij`.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwsvmParams {
    /// Penalty for instances in P.
    pub c_pos: f64,
    /// Penalty for instances in U.
    pub c_unl: f64,
    pub kernel: Kernel,
    /// Maximal KKT violation accepted at convergence.
    pub tolerance: f64,
    /// Iteration budget in units of `N` iterations; `None` means `10·N`.
    pub max_passes: Option<usize>,
    pub cache_bytes: usize,
}

impl CwsvmParams {
    pub fn new(c_pos: f64, c_unl: f64, kernel: Kernel) -> Result<Self> {
        let p = Self {
            c_pos,
            c_unl,
            kernel,
            tolerance: DEFAULT_TOLERANCE,
            max_passes: None,
            cache_bytes: DEFAULT_CACHE_BYTES,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_passes(mut self, passes: usize) -> Self {
        self.max_passes = Some(passes);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("C_P", self.c_pos), ("C_U", self.c_unl), ("tolerance", self.tolerance)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.max_passes == Some(0) {
            return Err(Error::InvalidParameter("max_passes must be at least 1".into()));
        }
        self.kernel.validate()
    }
}

#[derive(Debug, Clone)]
pub struct SupportVector {
    pub point: Arc<SparseVector>,
    /// `+1` for P, `−1` for U.
    pub label: f64,
    pub alpha: f64,
    /// Index into the [`Gram`] the model was trained on, if any.
    pub source: Option<usize>,
}

impl SupportVector {
    /// Expansion coefficient `α·y`.
    pub fn coef(&self) -> f64 {
        self.alpha * self.label
    }
}

#[derive(Debug, Clone)]
pub struct CwsvmModel {
    params: CwsvmParams,
    support: Vec<SupportVector>,
    bias: f64,
    /// Primal weights for the linear kernel, indexed by `feature − 1`.
    weights: Option<Vec<f64>>,
    converged: bool,
    iterations: usize,
}

/// Trains on explicit P and U instance sequences.
pub fn train(p: &[Instance], u: &[Instance], params: &CwsvmParams) -> Result<CwsvmModel> {
    let points: Vec<Arc<SparseVector>> = p.iter().chain(u).map(|x| Arc::clone(&x.features)).collect();
    let gram = Gram::new(params.kernel, points);
    let pos: Vec<usize> = (0..p.len()).collect();
    let unl: Vec<usize> = (p.len()..p.len() + u.len()).collect();
    train_on_gram(&gram, &pos, &unl, params)
}

/// Trains on points of `gram` addressed by index. Indices may repeat, as in
/// bootstrap resamples; `k` occurrences within a class weigh like one point
/// with `k` times the penalty.
pub fn train_on_gram(
    gram: &Gram,
    positives: &[usize],
    unlabeled: &[usize],
    params: &CwsvmParams,
) -> Result<CwsvmModel> {
    params.validate()?;
    if gram.kernel() != params.kernel {
        return Err(Error::InvalidParameter(format!(
            "Gram kernel {} differs from requested kernel {}",
            gram.kernel(),
            params.kernel
        )));
    }
    if positives.is_empty() {
        return Err(Error::NoPositives);
    }
    if unlabeled.is_empty() {
        return Err(Error::InsufficientData {
            what: "unlabeled instances",
            needed: 1,
            available: 0,
        });
    }
    // Repeated occurrences of a point within one class share a gradient, so
    // they collapse into one dual variable with the summed penalty. The
    // optimum and its KKT conditions are unchanged.
    let mut idx = Vec::with_capacity(positives.len() + unlabeled.len());
    let mut y = Vec::with_capacity(idx.capacity());
    let mut c = Vec::with_capacity(idx.capacity());
    for (set, label, penalty) in [(positives, 1.0, params.c_pos), (unlabeled, -1.0, params.c_unl)] {
        let mut sorted = set.to_vec();
        sorted.sort_unstable();
        for group in sorted.chunk_by(|a, b| a == b) {
            idx.push(group[0]);
            y.push(label);
            c.push(penalty * group.len() as f64);
        }
    }

    let n = idx.len();
    let passes = params.max_passes.unwrap_or(10 * n);
    let budget = passes.saturating_mul(n);
    let sol = solve(gram, &idx, &y, &c, params.tolerance, budget, params.cache_bytes);

    let support = (0..n)
        .filter(|&k| sol.alpha[k] > 0.0)
        .map(|k| SupportVector {
            point: Arc::clone(gram.point(idx[k])),
            label: y[k],
            alpha: sol.alpha[k],
            source: Some(idx[k]),
        })
        .collect();
    Ok(CwsvmModel::from_parts(
        *params,
        support,
        sol.bias,
        sol.converged,
        sol.iterations,
    ))
}

fn debug_assert_balanced(alpha: &[f64], y: &[f64]) {
    if cfg!(debug_assertions) {
        let balance: f64 = alpha.iter().zip(y).map(|(a, y)| a * y).sum();
        let mass: f64 = alpha.iter().sum();
        debug_assert!(balance.abs() <= 1e-9 * mass.max(1.0), "Σαy = {balance}");
    }
}

struct Solution {
    alpha: Vec<f64>,
    bias: f64,
    converged: bool,
    iterations: usize,
}

/// SMO with second-order working-set selection.
fn solve(gram: &Gram, idx: &[usize], y: &[f64], c: &[f64], tol: f64, budget: usize, cache_bytes: usize) -> Solution {
    let n = idx.len();
    let mut alpha = vec![0.0; n];
    // Gradient of the dual objective: G = Qα − e.
    let mut grad = vec![-1.0; n];
    let mut cache = RowCache::new(cache_bytes);
    let diag: Vec<f64> = idx.iter().map(|&i| gram.get(i, i)).collect();
    let row = |k: usize, cache: &mut RowCache| cache.get_or_insert(k, n, |out| gram.row_into(idx[k], idx, out));

    let mut iterations = 0;
    let mut converged = false;
    loop {
        // F_t = −y_t G_t. i maximizes F over I_up; the gap to the minimum of F
        // over I_low is the stopping criterion. j is the I_low violator with
        // the largest second-order decrease b²/a.
        let (mut i, mut f_max) = (usize::MAX, f64::NEG_INFINITY);
        for t in 0..n {
            let f = -y[t] * grad[t];
            let up = if y[t] > 0.0 { alpha[t] < c[t] } else { alpha[t] > 0.0 };
            if up && f > f_max {
                f_max = f;
                i = t;
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        let ki = row(i, &mut cache);
        let (mut j, mut f_min, mut best) = (usize::MAX, f64::INFINITY, f64::INFINITY);
        for t in 0..n {
            let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c[t] };
            if !low {
                continue;
            }
            let f = -y[t] * grad[t];
            f_min = f_min.min(f);
            let b = f_max - f;
            if b > 0.0 {
                let mut a = diag[i] + diag[t] - 2.0 * ki[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let gain = -b * b / a;
                if gain < best {
                    best = gain;
                    j = t;
                }
            }
        }
        if j == usize::MAX || f_max - f_min < tol {
            converged = true;
            break;
        }
        if iterations >= budget {
            break;
        }
        iterations += 1;

        let kj = row(j, &mut cache);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ci, cj) = (c[i], c[j]);
        let mut quad = diag[i] + diag[j] - 2.0 * ki[j];
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        if cfg!(debug_assertions) {
            let qij = y[i] * y[j] * ki[j];
            let change =
                grad[i] * di + grad[j] * dj + 0.5 * (diag[i] * di * di + diag[j] * dj * dj + 2.0 * qij * di * dj);
            let scale = 1.0 + (grad[i] * di).abs() + (grad[j] * dj).abs();
            debug_assert!(change <= 1e-9 * scale, "dual objective increased by {change}");
            if iterations % 256 == 0 {
                debug_assert_balanced(&alpha, y);
            }
        }
        let (si, sj) = (y[i] * di, y[j] * dj);
        for t in 0..n {
            grad[t] += y[t] * (si * ki[t] + sj * kj[t]);
        }
    }

    debug_assert_balanced(&alpha, y);

    // Bias: mean F over free vectors, else midpoint of the feasible interval.
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
    for t in 0..n {
        let f = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c[t] {
            sum += f;
            free += 1;
        } else if (y[t] > 0.0) == (alpha[t] == 0.0) {
            // y=+1 at 0 or y=−1 at C: requires b ≥ F.
            lower = lower.max(f);
        } else {
            upper = upper.min(f);
        }
    }
    let bias = if free > 0 {
        sum / free as f64
    } else if lower.is_finite() && upper.is_finite() {
        0.5 * (lower + upper)
    } else if lower.is_finite() {
        lower
    } else {
        upper
    };
    Solution {
        alpha,
        bias,
        converged,
        iterations,
    }
}

impl CwsvmModel {
    /// Assembles a model from its stored fields. Zero-alpha entries are dropped.
    pub fn from_parts(
        params: CwsvmParams,
        support: Vec<SupportVector>,
        bias: f64,
        converged: bool,
        iterations: usize,
    ) -> Self {
        let support: Vec<SupportVector> = support.into_iter().filter(|s| s.alpha > 0.0).collect();
        let weights = (params.kernel == Kernel::Linear).then(|| {
            let dim = support.iter().map(|s| s.point.max_index()).max().unwrap_or(0);
            let mut w = vec![0.0; dim];
            for s in &support {
                let coef = s.coef();
                for (i, v) in s.point.iter() {
                    w[i as usize - 1] += coef * v;
                }
            }
            w
        });
        Self {
            params,
            support,
            bias,
            weights,
            converged,
            iterations,
        }
    }

    pub fn params(&self) -> &CwsvmParams {
        &self.params
    }

    pub fn support_vectors(&self) -> &[SupportVector] {
        &self.support
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn kernel(&self) -> Kernel {
        self.params.kernel
    }

    /// False when the iteration budget ran out before the KKT conditions held.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `ψ(x) = Σ α_j y_j K(x_j, x) + b`.
    pub fn decision_value(&self, x: &SparseVector) -> f64 {
        match &self.weights {
            Some(w) => x.dot_dense(w) + self.bias,
            None => {
                let k = self.params.kernel;
                self.support.iter().map(|s| s.coef() * k.eval(&s.point, x)).sum::<f64>() + self.bias
            }
        }
    }

    /// `ψ` at point `target` of `gram`, reusing precomputed kernel values
    /// when the model was trained on the same Gram.
    pub fn decision_value_on(&self, gram: &Gram, target: usize) -> f64 {
        if self.weights.is_some() || gram.kernel() != self.params.kernel {
            return self.decision_value(gram.point(target));
        }
        self.support
            .iter()
            .map(|s| {
                let k = match s.source {
                    Some(src) if Arc::ptr_eq(gram.point(src), &s.point) => gram.get(src, target),
                    _ => gram.kernel().eval(&s.point, gram.point(target)),
                };
                s.coef() * k
            })
            .sum::<f64>()
            + self.bias
    }

    /// Value of the primal objective at the trained solution,
    /// `½ αᵀQα + C_P Σ_P ξ_i + C_U Σ_U ξ_i` with `ξ_i = max(0, 1 − y_i ψ(x_i))`.
    /// At the optimum this equals the optimal dual value.
    pub fn dual_objective(&self, p: &[Instance], u: &[Instance]) -> f64 {
        let k = self.params.kernel;
        let mut quad = 0.0;
        for a in &self.support {
            for b in &self.support {
                quad += a.coef() * b.coef() * k.eval(&a.point, &b.point);
            }
        }
        let hinge = |set: &[Instance], y: f64| -> f64 {
            set.iter()
                .map(|x| (1.0 - y * self.decision_value(&x.features)).max(0.0))
                .sum()
        };
        0.5 * quad + self.params.c_pos * hinge(p, 1.0) + self.params.c_unl * hinge(u, -1.0)
    }

    /// Appends the text serialization of this model to `out`.
    pub fn write_to(&self, out: &mut String) {
        let p = &self.params;
        out.push_str("format cwsvm 1\n");
        match p.kernel {
            Kernel::Linear => out.push_str("kernel linear\n"),
            Kernel::Rbf { gamma } => {
                let _ = writeln!(out, "kernel rbf {gamma:.16e}");
            }
        }
        let _ = writeln!(out, "c_pos {:.16e}", p.c_pos);
        let _ = writeln!(out, "c_unl {:.16e}", p.c_unl);
        let _ = writeln!(out, "tolerance {:.16e}", p.tolerance);
        match p.max_passes {
            Some(m) => {
                let _ = writeln!(out, "max_passes {m}");
            }
            None => out.push_str("max_passes auto\n"),
        }
        let _ = writeln!(out, "bias {:.16e}", self.bias);
        let _ = writeln!(out, "converged {}", self.converged);
        let _ = writeln!(out, "iterations {}", self.iterations);
        let _ = writeln!(out, "support_vectors {}", self.support.len());
        for s in &self.support {
            let _ = write!(out, "{:.16e}", s.coef());
            for (i, v) in s.point.iter() {
                let _ = write!(out, " {i}:{v:.16e}");
            }
            out.push('\n');
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_to(&mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = ModelLines::new(text);
        let model = Self::read_from(&mut lines)?;
        lines.expect_end()?;
        Ok(model)
    }

    /// Reads one serialized model from `lines`, leaving the cursor after it.
    pub fn read_from(lines: &mut ModelLines<'_>) -> Result<Self> {
        lines.expect_exact("format cwsvm 1")?;
        let kernel_fields = lines.field("kernel")?;
        let kernel = match kernel_fields.split_whitespace().collect::<Vec<_>>()[..] {
            ["linear"] => Kernel::Linear,
            ["rbf", g] => Kernel::Rbf {
                gamma: lines.number(g)?,
            },
            _ => return Err(lines.error(format!("bad kernel {kernel_fields:?}"))),
        };
        let c_pos = lines.number_field("c_pos")?;
        let c_unl = lines.number_field("c_unl")?;
        let tolerance = lines.number_field("tolerance")?;
        let passes = lines.field("max_passes")?;
        let max_passes = match passes {
            "auto" => None,
            s => Some(s.parse().map_err(|_| lines.error(format!("bad max_passes {s:?}")))?),
        };
        let params = CwsvmParams {
            c_pos,
            c_unl,
            kernel,
            tolerance,
            max_passes,
            cache_bytes: DEFAULT_CACHE_BYTES,
        };
        params.validate().map_err(|e| lines.error(e.to_string()))?;
        let bias = lines.number_field("bias")?;
        let converged = match lines.field("converged")? {
            "true" => true,
            "false" => false,
            s => return Err(lines.error(format!("bad converged flag {s:?}"))),
        };
        let iterations = lines.count_field("iterations")?;
        let count = lines.count_field("support_vectors")?;
        let mut support = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines.next_line()?;
            let mut tokens = line.split_whitespace();
            let coef = lines.number(tokens.next().unwrap_or(""))?;
            let mut pairs = Vec::new();
            for t in tokens {
                let (i, v) = t
                    .split_once(':')
                    .ok_or_else(|| lines.error(format!("expected index:value, got {t:?}")))?;
                let i: u32 = i.parse().map_err(|_| lines.error(format!("bad index {i:?}")))?;
                pairs.push((i, lines.number(v)?));
            }
            let point = SparseVector::new(pairs).map_err(|e| lines.error(e.to_string()))?;
            if coef == 0.0 {
                return Err(lines.error("support vector with zero coefficient".into()));
            }
            support.push(SupportVector {
                point: Arc::new(point),
                label: coef.signum(),
                alpha: coef.abs(),
                source: None,
            });
        }
        Ok(Self::from_parts(params, support, bias, converged, iterations))
    }
}

/// Line cursor for the model text formats, tracking line numbers for errors.
/// Blank lines and `#` comments are skipped.
pub struct ModelLines<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    line: usize,
}

impl<'a> ModelLines<'a> {
    pub fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate().peekable(),
            line: 0,
        }
    }

    pub fn error(&self, message: String) -> Error {
        Error::Parse {
            line: self.line,
            message,
        }
    }

    fn skip_blank(&mut self) {
        while let Some((_, l)) = self.lines.peek() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                self.lines.next();
            } else {
                break;
            }
        }
    }

    pub fn next_line(&mut self) -> Result<&'a str> {
        self.skip_blank();
        match self.lines.next() {
            Some((k, l)) => {
                self.line = k + 1;
                Ok(l.trim())
            }
            None => Err(Error::Parse {
                line: self.line + 1,
                message: "unexpected end of model".into(),
            }),
        }
    }

    pub fn expect_exact(&mut self, expected: &str) -> Result<()> {
        let l = self.next_line()?;
        if l != expected {
            return Err(self.error(format!("expected {expected:?}, got {l:?}")));
        }
        Ok(())
    }

    pub fn expect_end(&mut self) -> Result<()> {
        self.skip_blank();
        match self.lines.next() {
            None => Ok(()),
            Some((k, l)) => Err(Error::Parse {
                line: k + 1,
                message: format!("trailing content {l:?}"),
            }),
        }
    }

    /// Reads a `key value` line and returns the value text.
    pub fn field(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next_line()?;
        match l.split_once(char::is_whitespace) {
            Some((k, v)) if k == key => Ok(v.trim()),
            _ if l == key => Ok(""),
            _ => Err(self.error(format!("expected field {key:?}, got {l:?}"))),
        }
    }

    pub fn number(&self, s: &str) -> Result<f64> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.error(format!("bad number {s:?}")))
    }

    pub fn number_field(&mut self, key: &str) -> Result<f64> {
        let v = self.field(key)?;
        self.number(v)
    }

    pub fn count_field(&mut self, key: &str) -> Result<usize> {
        let v = self.field(key)?;
        v.parse().map_err(|_| self.error(format!("bad count {v:?}")))
    }
}
