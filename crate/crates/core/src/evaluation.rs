//! Ranking metrics, the PU model-selection score, confidence intervals and
//! the paired one-tailed Wilcoxon signed-rank test.

use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::fmt::general;

/// A decision value together with the true class of the scored instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredLabel {
    pub score: f64,
    pub positive: bool,
}

impl ScoredLabel {
    pub fn new(score: f64, positive: bool) -> Self {
        Self { score, positive }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Pr,
    Roc,
}

/// Operating points of a scorer, one per distinct score threshold in
/// descending score order.
///
/// `points` holds `(recall, precision)` for PR and `(FPR, TPR)` for ROC; the
/// ROC curve additionally starts at `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub kind: CurveKind,
    pub points: Vec<(f64, f64)>,
    /// Cumulative `(TP, FP)` at each threshold.
    counts: Vec<(u64, u64)>,
    n_pos: u64,
    n_neg: u64,
}

/// Cumulative `(TP, FP)` counts per distinct threshold; equal scores form a
/// single threshold.
fn operating_counts(scored: &[ScoredLabel]) -> Result<Vec<(u64, u64)>> {
    if scored.iter().any(|s| s.score.is_nan()) {
        return Err(Error::InvalidParameter("NaN score".into()));
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut counts = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    for (k, s) in sorted.iter().enumerate() {
        if s.positive {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = sorted.get(k + 1).is_none_or(|next| next.score != s.score);
        if last_of_group {
            counts.push((tp, fp));
        }
    }
    Ok(counts)
}

pub fn pr_curve(scored: &[ScoredLabel]) -> Result<Curve> {
    let n_pos = scored.iter().filter(|s| s.positive).count() as u64;
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let n_neg = scored.len() as u64 - n_pos;
    let counts = operating_counts(scored)?;
    let points = counts
        .iter()
        .map(|&(tp, fp)| (tp as f64 / n_pos as f64, tp as f64 / (tp + fp) as f64))
        .collect();
    Ok(Curve {
        kind: CurveKind::Pr,
        points,
        counts,
        n_pos,
        n_neg,
    })
}

pub fn roc_curve(scored: &[ScoredLabel]) -> Result<Curve> {
    let n_pos = scored.iter().filter(|s| s.positive).count() as u64;
    let n_neg = scored.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let counts = operating_counts(scored)?;
    let points = std::iter::once((0.0, 0.0))
        .chain(
            counts
                .iter()
                .map(|&(tp, fp)| (fp as f64 / n_neg as f64, tp as f64 / n_pos as f64)),
        )
        .collect();
    Ok(Curve {
        kind: CurveKind::Roc,
        points,
        counts,
        n_pos,
        n_neg,
    })
}

impl Curve {
    pub fn n_positives(&self) -> u64 {
        self.n_pos
    }

    pub fn n_negatives(&self) -> u64 {
        self.n_neg
    }

    /// PR curve interpolated in TP/FP space at every integer TP between
    /// adjacent operating points, starting at recall 0 with the precision of
    /// the first point that has a true positive. ROC curves are returned
    /// as they are.
    pub fn interpolated(&self) -> Vec<(f64, f64)> {
        match self.kind {
            CurveKind::Roc => self.points.clone(),
            CurveKind::Pr => interpolate_pr(&self.counts, self.n_pos),
        }
    }

    /// Area under the curve: trapezoidal for ROC, trapezoidal over the
    /// interpolated points for PR.
    pub fn auc(&self) -> f64 {
        let pts = self.interpolated();
        pts.windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
            .sum()
    }

    /// CSV with header `x,y` and 9 significant digits, interpolated for PR.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for (x, y) in self.interpolated() {
            let _ = writeln!(out, "{},{}", general(x, 9), general(y, 9));
        }
        out
    }
}

fn interpolate_pr(counts: &[(u64, u64)], n_pos: u64) -> Vec<(f64, f64)> {
    let p = n_pos as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    let push = |out: &mut Vec<(f64, f64)>, tp: f64, fp: f64| {
        if tp > 0.0 {
            if out.is_empty() {
                out.push((0.0, tp / (tp + fp)));
            }
            out.push((tp / p, tp / (tp + fp)));
        }
    };
    let mut prev: Option<(u64, u64)> = None;
    for &(tp_b, fp_b) in counts {
        match prev {
            Some((tp_a, fp_a)) if tp_b > tp_a + 1 => {
                let slope = (fp_b - fp_a) as f64 / (tp_b - tp_a) as f64;
                for x in 1..(tp_b - tp_a) {
                    push(&mut out, (tp_a + x) as f64, fp_a as f64 + slope * x as f64);
                }
            }
            _ => {}
        }
        push(&mut out, tp_b as f64, fp_b as f64);
        prev = Some((tp_b, fp_b));
    }
    out
}

pub fn auc(curve: &Curve) -> f64 {
    curve.auc()
}

/// Convenience: AUC-PR and AUC-ROC of `scored`.
pub fn auc_pr(scored: &[ScoredLabel]) -> Result<f64> {
    Ok(pr_curve(scored)?.auc())
}

pub fn auc_roc(scored: &[ScoredLabel]) -> Result<f64> {
    Ok(roc_curve(scored)?.auc())
}

/// PU performance criterion `recall² / Pr(ŷ = 1)`, with recall measured on
/// the observed positives. Zero when nothing is predicted positive.
pub fn pu_score(predicted: &[i8], observed_positive: &[bool]) -> Result<f64> {
    if predicted.len() != observed_positive.len() {
        return Err(Error::InvalidParameter(format!(
            "{} predictions for {} labels",
            predicted.len(),
            observed_positive.len()
        )));
    }
    let n = predicted.len() as u128;
    let observed = observed_positive.iter().filter(|&&o| o).count() as u128;
    if observed == 0 {
        return Err(Error::NoPositives);
    }
    let predicted_pos = predicted.iter().filter(|&&y| y > 0).count() as u128;
    if predicted_pos == 0 {
        return Ok(0.0);
    }
    let tp = predicted
        .iter()
        .zip(observed_positive)
        .filter(|(&y, &o)| y > 0 && o)
        .count() as u128;
    // recall² / (pred / n) = tp² n / (obs² pred), formed exactly in integers.
    Ok((tp * tp * n) as f64 / (observed * observed * predicted_pos) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl MeanCi {
    pub fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }
}

/// Mean with a two-sided 95% Student-t confidence interval.
pub fn mean_ci95(values: &[f64]) -> Result<MeanCi> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            what: "values for a confidence interval",
            needed: 2,
            available: n,
        });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .expect("valid degrees of freedom")
        .inverse_cdf(0.975);
    let half = t * (var / nf).sqrt();
    Ok(MeanCi {
        mean,
        lo: mean - half,
        hi: mean + half,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    /// One-tailed p-value for the alternative `median(a − b) > 0`.
    pub p_value: f64,
    pub exact: bool,
}

/// Largest sample size (after dropping zeros) for the exact null distribution.
pub const WILCOXON_EXACT_MAX: usize = 25;

/// Paired one-tailed Wilcoxon signed-rank test of `median(a − b) > 0`.
///
/// Zero differences are dropped and tied magnitudes receive average ranks.
/// The exact permutation distribution is used up to
/// [`WILCOXON_EXACT_MAX`] pairs, a tie-corrected normal approximation with
/// continuity correction above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::NoInformation);
    }
    let n = diffs.len();
    if n < 5 {
        return Err(Error::InsufficientData {
            what: "nonzero paired differences",
            needed: 5,
            available: n,
        });
    }
    // Doubled average ranks are integers.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut rank2 = vec![0u64; n];
    let mut ties = Vec::new();
    let mut k = 0;
    while k < n {
        let mut end = k + 1;
        while end < n && diffs[order[end]].abs() == diffs[order[k]].abs() {
            end += 1;
        }
        // Ranks k+1..=end averaged, doubled: (k+1+end).
        for &i in &order[k..end] {
            rank2[i] = (k + 1 + end) as u64;
        }
        ties.push((end - k) as f64);
        k = end;
    }
    let w2: u64 = (0..n).filter(|&i| diffs[i] > 0.0).map(|i| rank2[i]).sum();
    let w_plus = w2 as f64 / 2.0;

    if n <= WILCOXON_EXACT_MAX {
        let total: u64 = rank2.iter().sum();
        let mut dist = vec![0.0f64; total as usize + 1];
        dist[0] = 1.0;
        for &r in &rank2 {
            let r = r as usize;
            for s in (r..dist.len()).rev() {
                dist[s] += dist[s - r];
            }
        }
        let upper: f64 = dist[w2 as usize..].iter().sum();
        let p_value = upper / 2f64.powi(n as i32);
        return Ok(WilcoxonResult {
            w_plus,
            n,
            p_value,
            exact: true,
        });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|t| t * t * t - t).sum::<f64>() / 48.0;
    let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();
    let z = (w_plus - mean - 0.5) / sd;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(WilcoxonResult {
        w_plus,
        n,
        p_value: 1.0 - normal.cdf(z),
        exact: false,
    })
}
