//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use puforge::cwsvm::CwsvmModel;
use puforge::data::{Class, Instance, Observed, SparseVector};
use puforge::kernel::Kernel;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Dense SVM dual: minimize ½αᵀQα − Σα subject to yᵀα = 0, 0 ≤ α ≤ c.
pub struct DualQp {
    pub q: DMatrix<f64>,
    pub y: Vec<f64>,
    pub c: Vec<f64>,
}

impl DualQp {
    pub fn new(kernel: Kernel, p: &[Instance], u: &[Instance], c_pos: f64, c_unl: f64) -> Self {
        let pts: Vec<&SparseVector> = p.iter().chain(u).map(|x| &*x.features).collect();
        let n = pts.len();
        let y: Vec<f64> = (0..n).map(|i| if i < p.len() { 1.0 } else { -1.0 }).collect();
        let c: Vec<f64> = (0..n).map(|i| if i < p.len() { c_pos } else { c_unl }).collect();
        let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * naive_kernel(kernel, pts[i], pts[j]));
        Self { q, y, c }
    }

    pub fn objective(&self, alpha: &DVector<f64>) -> f64 {
        0.5 * alpha.dot(&(&self.q * alpha)) - alpha.sum()
    }

    /// Minimum via enumeration of active sets: every assignment of each
    /// variable to {0, free, C} is solved as a linear KKT system and kept only
    /// if it satisfies all KKT conditions, which certifies global optimality.
    pub fn solve_enumerate(&self) -> Option<f64> {
        let n = self.y.len();
        let mut best: Option<f64> = None;
        let patterns = 3usize.pow(n as u32);
        for code in 0..patterns {
            let mut state = vec![0u8; n];
            let mut c = code;
            for s in state.iter_mut() {
                *s = (c % 3) as u8;
                c /= 3;
            }
            if let Some(alpha) = self.kkt_point(&state) {
                let f = self.objective(&alpha);
                best = Some(best.map_or(f, |b: f64| b.min(f)));
            }
        }
        best
    }

    fn kkt_point(&self, state: &[u8]) -> Option<DVector<f64>> {
        let n = self.y.len();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        let mut alpha = DVector::from_fn(n, |i, _| if state[i] == 2 { self.c[i] } else { 0.0 });
        let m = free.len();
        // Unknowns: α_F and b.
        let mut a = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                a[(r, s)] = self.q[(i, j)];
            }
            a[(r, m)] = self.y[i];
            let fixed: f64 = (0..n)
                .filter(|&j| state[j] == 2)
                .map(|j| self.q[(i, j)] * self.c[j])
                .sum();
            rhs[r] = 1.0 - fixed;
        }
        for (s, &j) in free.iter().enumerate() {
            a[(m, s)] = self.y[j];
        }
        rhs[m] = -(0..n)
            .filter(|&j| state[j] == 2)
            .map(|j| self.y[j] * self.c[j])
            .sum::<f64>();

        let b;
        if m == 0 {
            if rhs[0].abs() > 1e-9 {
                return None;
            }
            // Any b in the interval allowed by the bound constraints.
            let grad = &self.q * &alpha - DVector::from_element(n, 1.0);
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..n {
                // state 0 needs grad_i + b y_i ≥ 0; state 2 needs ≤ 0.
                let bound = -grad[i] / self.y[i];
                let lower = (state[i] == 0) == (self.y[i] > 0.0);
                if lower {
                    lo = lo.max(bound);
                } else {
                    hi = hi.min(bound);
                }
            }
            if lo > hi + 1e-9 {
                return None;
            }
            b = if lo.is_finite() { lo } else { hi.min(0.0) };
        } else {
            let svd = a.clone().svd(true, true);
            let sol = svd.solve(&rhs, 1e-12).ok()?;
            if (&a * &sol - &rhs).amax() > 1e-8 {
                return None;
            }
            for (s, &i) in free.iter().enumerate() {
                alpha[i] = sol[s];
            }
            b = sol[m];
        }
        let grad = &self.q * &alpha - DVector::from_element(n, 1.0);
        let eps = 1e-8;
        for i in 0..n {
            let g = grad[i] + b * self.y[i];
            let ok = match state[i] {
                0 => g >= -eps,
                1 => alpha[i] >= -eps && alpha[i] <= self.c[i] + eps && g.abs() <= eps,
                _ => g <= eps,
            };
            if !ok {
                return None;
            }
        }
        Some(alpha)
    }

    /// Minimum via accelerated projected gradient with adaptive restart.
    pub fn solve_projected_gradient(&self, iterations: usize) -> f64 {
        let n = self.y.len();
        let lipschitz = self.q.trace().max(1e-12);
        let mut x = DVector::zeros(n);
        let mut z = x.clone();
        let mut t = 1.0f64;
        let mut best = self.objective(&x);
        for _ in 0..iterations {
            let grad = &self.q * &z - DVector::from_element(n, 1.0);
            let next = self.project(&(&z - grad / lipschitz));
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let f_next = self.objective(&next);
            if f_next > self.objective(&x) {
                t = 1.0;
                z = x.clone();
                continue;
            }
            z = &next + (&next - &x) * ((t - 1.0) / t_next);
            x = next;
            t = t_next;
            best = best.min(f_next);
        }
        best
    }

    /// Euclidean projection onto {yᵀα = 0, 0 ≤ α ≤ c} by bisection on the
    /// multiplier of the equality constraint.
    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let at = |lambda: f64| DVector::from_fn(v.len(), |i, _| (v[i] - lambda * self.y[i]).clamp(0.0, self.c[i]));
        let balance = |a: &DVector<f64>| a.iter().zip(&self.y).map(|(a, y)| a * y).sum::<f64>();
        let span = v.amax() + self.c.iter().cloned().fold(0.0, f64::max) + 1.0;
        let (mut lo, mut hi) = (-span, span);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if balance(&at(mid)) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi))
    }

    /// Optimal value: enumeration when it finds a certified point, else
    /// projected gradient.
    pub fn optimum(&self) -> f64 {
        self.solve_enumerate()
            .unwrap_or_else(|| self.solve_projected_gradient(50_000))
    }
}

/// Kernel evaluated directly from the definition with dense coordinates.
pub fn naive_kernel(kernel: Kernel, a: &SparseVector, b: &SparseVector) -> f64 {
    let dim = a.max_index().max(b.max_index());
    let av: Vec<f64> = (1..=dim as u32).map(|i| a.get(i)).collect();
    let bv: Vec<f64> = (1..=dim as u32).map(|i| b.get(i)).collect();
    match kernel {
        Kernel::Linear => av.iter().zip(&bv).map(|(x, y)| x * y).sum(),
        Kernel::Rbf { gamma } => {
            let d2: f64 = av.iter().zip(&bv).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * d2).exp()
        }
    }
}

pub fn instance(id: u64, values: &[f64], observed: Observed) -> Instance {
    let truth = if observed == Observed::Positive {
        Class::Positive
    } else {
        Class::Negative
    };
    Instance::new(id, SparseVector::from_dense(values), observed, Some(truth))
}

/// Random PU problem with 2..=6 points and 1..=3 features, at least one
/// point in each set; penalties log-uniform in [0.1, 10].
pub struct RandomProblem {
    pub p: Vec<Instance>,
    pub u: Vec<Instance>,
    pub c_pos: f64,
    pub c_unl: f64,
}

pub fn random_problem(seed: u64) -> RandomProblem {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6);
    let dim = rng.random_range(1..=3);
    let n_pos = rng.random_range(1..n);
    let mut p = Vec::new();
    let mut u = Vec::new();
    for k in 0..n {
        let values: Vec<f64> = (0..dim)
            .map(|_| (rng.random_range(-2.0..2.0) * 8.0f64).round() / 8.0)
            .collect();
        if k < n_pos {
            p.push(instance(k as u64, &values, Observed::Positive));
        } else {
            u.push(instance(k as u64, &values, Observed::Unlabeled));
        }
    }
    let c_pos = 10f64.powf(rng.random_range(-1.0..1.0));
    let c_unl = 10f64.powf(rng.random_range(-1.0..1.0));
    RandomProblem { p, u, c_pos, c_unl }
}

/// Largest violation of the KKT certificate over the training points, using
/// the model's alphas matched by point identity.
pub fn kkt_violation(m: &CwsvmModel, p: &[Instance], u: &[Instance]) -> f64 {
    let pr = m.params();
    let mut worst = 0.0f64;
    for (set, y, c) in [(p, 1.0, pr.c_pos), (u, -1.0, pr.c_unl)] {
        for x in set {
            let alpha: f64 = m
                .support_vectors()
                .iter()
                .filter(|s| Arc::ptr_eq(&s.point, &x.features))
                .map(|s| s.alpha)
                .sum();
            let margin = y * m.decision_value(&x.features);
            let v = if alpha == 0.0 {
                1.0 - margin
            } else if alpha < c {
                (margin - 1.0).abs()
            } else {
                margin - 1.0
            };
            worst = worst.max(v);
        }
    }
    worst
}

pub fn balance(m: &CwsvmModel) -> f64 {
    m.support_vectors().iter().map(|s| s.coef()).sum::<f64>().abs()
}
