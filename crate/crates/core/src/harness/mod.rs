//! Benchmark orchestration: one repetition subsamples and contaminates a
//! training set, tunes every method on a shared fold plan, retrains on the
//! full training set and scores the held-out test set with true labels.
//!
//! Every random stream is derived from `(master_seed, repetition, stage,
//! method)`, so any repetition can be rerun standalone and results do not
//! depend on the worker count.

pub mod config;
mod persist;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

pub use config::{ExperimentConfig, SearchKind, Setting};
pub use persist::{read_record, OutputDir};

use crate::data::{
    contaminate, contamination_count, generate_synthetic, read_sparse_file, subsample_split, Class, ContaminationSpec,
    Dataset, Observed, TestSpec,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    mean_ci95, pr_curve, roc_curve, wilcoxon_signed_rank, Curve, MeanCi, ScoredLabel, WilcoxonResult,
};
use crate::fmt::general;
use crate::methods::{Method, MethodLearner, TrainedModel};
use crate::rng::{derive_seed, rng};
use crate::tuning::{cross_val_scores, make_folds, search, FoldPlan, GramCache, SearchResult, Tuple};

/// Stage tags mixed into derived seeds.
pub mod stage {
    pub const DATA: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const CONTAMINATION: u64 = 3;
    pub const FOLDS: u64 = 4;
    pub const TUNE: u64 = 5;
    pub const FINAL: u64 = 6;
    pub const SEARCH: u64 = 7;
}

/// Failed-repetition share above which an experiment is marked failed.
pub const MAX_FAILED_FRACTION: f64 = 0.25;

/// Seed of stage `stage` in repetition `rep`, optionally per method.
pub fn stage_seed(master: u64, rep: usize, stage: u64, extra: &[u64]) -> u64 {
    let mut path = vec![rep as u64, stage];
    path.extend_from_slice(extra);
    derive_seed(master, &path)
}

/// Loads or generates the instance pool an experiment samples from.
pub fn load_source(config: &ExperimentConfig) -> Result<Dataset> {
    match config.data_path() {
        None => Ok(generate_synthetic(
            config.synthetic_positives,
            config.synthetic_negatives,
            derive_seed(config.master_seed, &[stage::DATA]),
        )),
        Some(path) => match config.positive_label {
            Some(label) => read_sparse_file(&path, |y| y == label),
            None => read_sparse_file(&path, |y| y > 0.0),
        },
    }
}

/// Training and test sets of repetition `rep`.
pub fn prepare_data(config: &ExperimentConfig, source: &Dataset, rep: usize) -> Result<(Dataset, Dataset)> {
    let m = config.master_seed;
    let test = TestSpec {
        positives: config.test_positives,
        negatives: config.test_negatives,
    };
    let split = subsample_split(
        source,
        config.train_positives,
        config.train_unlabeled,
        test,
        stage_seed(m, rep, stage::SPLIT, &[]),
    )?;
    let spec = ContaminationSpec::new(
        config.rate_p,
        config.rate_u,
        stage_seed(m, rep, stage::CONTAMINATION, &[]),
    )?;
    let train = contaminate(&split.train, &split.holdout, &spec)?;
    Ok((train, split.test))
}

/// Observed-positive and observed-unlabeled indices of `data`.
fn partition(data: &Dataset) -> (Vec<usize>, Vec<usize>) {
    let mut pos = Vec::new();
    let mut unl = Vec::new();
    for (i, x) in data.instances().iter().enumerate() {
        if x.observed == Observed::Positive {
            pos.push(i);
        } else {
            unl.push(i);
        }
    }
    (pos, unl)
}

/// Hyperparameter search for one method on a shared fold plan.
pub fn tune_method(
    config: &ExperimentConfig,
    method: Method,
    train: &Dataset,
    plan: &FoldPlan,
    grams: &GramCache,
    rep: usize,
) -> Result<SearchResult> {
    let learner = MethodLearner::new(method, config.kernel_kind()?, config.n_models);
    let m = config.master_seed;
    let cv_seed = stage_seed(m, rep, stage::TUNE, &[method.index()]);
    search(
        &config.space(method)?,
        config.search_mode(),
        stage_seed(m, rep, stage::SEARCH, &[method.index()]),
        |tuple| cross_val_scores(&learner, tuple, plan, train, grams, cv_seed),
    )
}

/// Tuning results of one repetition without the final retraining.
#[derive(Debug, Clone)]
pub struct TuningRun {
    pub train: Dataset,
    pub plan: FoldPlan,
    pub results: Vec<(Method, SearchResult)>,
}

/// Runs only the tuning stage of repetition `rep`.
pub fn tune_iteration(config: &ExperimentConfig, source: &Dataset, rep: usize) -> Result<TuningRun> {
    let (train, _) = prepare_data(config, source, rep)?;
    let grams = GramCache::new(&train);
    let (plan, results) = tune_all(config, &train, &grams, rep)?;
    Ok(TuningRun { train, plan, results })
}

fn tune_all(
    config: &ExperimentConfig,
    train: &Dataset,
    grams: &GramCache,
    rep: usize,
) -> Result<(FoldPlan, Vec<(Method, SearchResult)>)> {
    let plan = make_folds(
        train,
        config.k_folds,
        stage_seed(config.master_seed, rep, stage::FOLDS, &[]),
    )?;
    let results = config
        .method_list()?
        .into_iter()
        .map(|m| {
            let r =
                tune_method(config, m, train, &plan, grams, rep).map_err(|e| Error::stage("tuning", m.name(), e))?;
            Ok((m, r))
        })
        .collect::<Result<_>>()?;
    Ok((plan, results))
}

/// Outcome of one method in one repetition.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    pub search: SearchResult,
    pub model: TrainedModel,
    pub pr: Curve,
    pub roc: Curve,
}

impl MethodOutcome {
    pub fn record(&self) -> MethodRecord {
        MethodRecord {
            method: self.method,
            tuple: self.search.best.clone(),
            cv_score: self.search.best_score,
            on_boundary: self.search.on_boundary(),
            auc_pr: self.pr.auc(),
            auc_roc: self.roc.auc(),
        }
    }
}

/// Everything produced by one repetition.
#[derive(Debug, Clone)]
pub struct Repetition {
    pub index: usize,
    pub train: Dataset,
    pub test_ids: Vec<u64>,
    /// Fold plan shared by every method.
    pub plan: FoldPlan,
    pub outcomes: Vec<MethodOutcome>,
}

impl Repetition {
    pub fn record(&self) -> RepRecord {
        RepRecord {
            index: self.index,
            methods: self.outcomes.iter().map(MethodOutcome::record).collect(),
        }
    }
}

/// Runs repetition `rep`: subsample, contaminate, tune every method on one
/// fold plan, retrain with the best tuple and score the test set.
pub fn run_iteration(config: &ExperimentConfig, source: &Dataset, rep: usize) -> Result<Repetition> {
    let (train, test) = prepare_data(config, source, rep)?;
    let grams = GramCache::new(&train);
    let (plan, results) = tune_all(config, &train, &grams, rep)?;
    let (pos, unl) = partition(&train);
    let test_points: Vec<Arc<_>> = test.instances().iter().map(|x| Arc::clone(&x.features)).collect();
    let truth: Vec<bool> = test
        .instances()
        .iter()
        .map(|x| x.truth == Some(Class::Positive))
        .collect();
    let kernel = config.kernel_kind()?;

    let mut outcomes = Vec::with_capacity(results.len());
    for (method, search) in results {
        let learner = MethodLearner::new(method, kernel, config.n_models);
        let gram = grams.get(crate::methods::kernel_for(kernel, &search.best)?);
        let seed = stage_seed(config.master_seed, rep, stage::FINAL, &[method.index()]);
        let model = learner
            .fit(&search.best, &gram, &pos, &unl, seed)
            .map_err(|e| Error::stage("final training", method.name(), e))?;
        let scored: Vec<ScoredLabel> = model
            .decision_values(&test_points)
            .into_iter()
            .zip(&truth)
            .map(|(s, &t)| ScoredLabel::new(s, t))
            .collect();
        let pr = pr_curve(&scored).map_err(|e| Error::stage("evaluation", method.name(), e))?;
        let roc = roc_curve(&scored).map_err(|e| Error::stage("evaluation", method.name(), e))?;
        outcomes.push(MethodOutcome {
            method,
            search,
            model,
            pr,
            roc,
        });
    }
    Ok(Repetition {
        index: rep,
        test_ids: test.instances().iter().map(|x| x.id).collect(),
        train,
        plan,
        outcomes,
    })
}

/// Per-method line of a repetition record.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRecord {
    pub method: Method,
    pub tuple: Tuple,
    pub cv_score: f64,
    pub on_boundary: bool,
    pub auc_pr: f64,
    pub auc_roc: f64,
}

/// Compact result of a repetition, persisted as `reps/rep_XXX.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub index: usize,
    pub methods: Vec<MethodRecord>,
}

impl RepRecord {
    pub fn get(&self, method: Method) -> Option<&MethodRecord> {
        self.methods.iter().find(|r| r.method == method)
    }

    /// Method with the highest test AUC-PR; ties go to the earliest method in
    /// canonical order. The flag reports whether a tie occurred.
    pub fn winner(&self) -> Option<(Method, bool)> {
        let mut sorted: Vec<&MethodRecord> = self.methods.iter().collect();
        sorted.sort_by_key(|r| r.method);
        let mut best: Option<&MethodRecord> = None;
        for r in &sorted {
            if best.is_none_or(|b| r.auc_pr > b.auc_pr) {
                best = Some(r);
            }
        }
        let best = best?;
        let tied = sorted.iter().filter(|r| r.auc_pr == best.auc_pr).count() > 1;
        Some((best.method, tied))
    }
}

/// Aggregate statistics of one method over successful repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub n: usize,
    pub auc_pr: MeanCi,
    pub auc_roc: MeanCi,
    pub wins: usize,
    /// Wins obtained through the canonical-order tie-break.
    pub tie_wins: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ExperimentConfig,
    /// Successful repetitions by index.
    pub records: Vec<RepRecord>,
    /// Failed repetitions with their error messages.
    pub failures: Vec<(usize, String)>,
    pub summary: Vec<MethodSummary>,
    /// One-tailed RESVM > Bagging test on per-repetition AUC-PR, when both
    /// ran and the test is defined.
    pub wilcoxon: Option<WilcoxonResult>,
    /// Median of each tuned hyperparameter: (method, name, median).
    pub medians: Vec<(Method, String, f64)>,
}

impl RunResult {
    /// Aggregates repetition records.
    pub fn aggregate(
        config: ExperimentConfig,
        records: Vec<RepRecord>,
        failures: Vec<(usize, String)>,
    ) -> Result<Self> {
        let methods = config.method_list()?;
        let mut summary = Vec::new();
        for &m in &methods {
            let pr: Vec<f64> = records.iter().filter_map(|r| r.get(m)).map(|r| r.auc_pr).collect();
            let roc: Vec<f64> = records.iter().filter_map(|r| r.get(m)).map(|r| r.auc_roc).collect();
            let (mut wins, mut tie_wins) = (0, 0);
            for r in &records {
                if let Some((w, tied)) = r.winner() {
                    if w == m {
                        wins += 1;
                        tie_wins += usize::from(tied);
                    }
                }
            }
            summary.push(MethodSummary {
                method: m,
                n: pr.len(),
                auc_pr: ci_or_nan(&pr),
                auc_roc: ci_or_nan(&roc),
                wins,
                tie_wins,
            });
        }
        let wilcoxon = if methods.contains(&Method::Resvm) && methods.contains(&Method::Bagging) {
            let pick = |m| -> Vec<f64> { records.iter().filter_map(|r| r.get(m)).map(|r| r.auc_pr).collect() };
            wilcoxon_signed_rank(&pick(Method::Resvm), &pick(Method::Bagging)).ok()
        } else {
            None
        };
        let mut medians = Vec::new();
        for &m in &methods {
            let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            let mut order: Vec<&str> = Vec::new();
            for rec in records.iter().filter_map(|r| r.get(m)) {
                for (name, v) in &rec.tuple.0 {
                    if !values.contains_key(name.as_str()) {
                        order.push(name);
                    }
                    values.entry(name).or_default().push(*v);
                }
            }
            for name in order {
                medians.push((m, name.to_string(), median(&mut values[name].clone())));
            }
        }
        Ok(Self {
            config,
            records,
            failures,
            summary,
            wilcoxon,
            medians,
        })
    }

    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == m)
    }

    /// Mean test AUC-PR of `m`, NaN when it did not run.
    pub fn mean_auc_pr(&self, m: Method) -> f64 {
        self.method(m).map_or(f64::NAN, |s| s.auc_pr.mean)
    }

    /// More than a quarter of the repetitions failed.
    pub fn is_failed(&self) -> bool {
        let total = self.records.len() + self.failures.len();
        self.failures.len() as f64 > MAX_FAILED_FRACTION * total as f64
    }

    /// `summary.csv`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "method,n,auc_pr_mean,auc_pr_ci_lo,auc_pr_ci_hi,auc_roc_mean,auc_roc_ci_lo,auc_roc_ci_hi,wins,tie_wins\n",
        );
        for s in &self.summary {
            let g = |v: f64| general(v, 17);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                s.method,
                s.n,
                g(s.auc_pr.mean),
                g(s.auc_pr.lo),
                g(s.auc_pr.hi),
                g(s.auc_roc.mean),
                g(s.auc_roc.lo),
                g(s.auc_roc.hi),
                s.wins,
                s.tie_wins
            );
        }
        out
    }

    /// `stats.csv`: the RESVM vs Bagging signed-rank test.
    pub fn stats_csv(&self) -> String {
        let mut out = String::from("test,alternative,n,w_plus,p_value,exact\n");
        if let Some(w) = &self.wilcoxon {
            let _ = writeln!(
                out,
                "wilcoxon_signed_rank,resvm>bagging,{},{},{},{}",
                w.n,
                general(w.w_plus, 17),
                general(w.p_value, 17),
                w.exact
            );
        }
        out
    }

    /// `hyperparameters.csv`: median tuned value per method and parameter.
    pub fn hyperparameters_csv(&self) -> String {
        let mut out = String::from("method,param,median\n");
        for (m, name, v) in &self.medians {
            let _ = writeln!(out, "{m},{name},{}", general(*v, 17));
        }
        out
    }

    /// `failures.csv`.
    pub fn failures_csv(&self) -> String {
        let mut out = String::from("repetition,error\n");
        for (i, e) in &self.failures {
            let _ = writeln!(out, "{i},\"{}\"", e.replace('"', "'"));
        }
        out
    }
}

fn ci_or_nan(values: &[f64]) -> MeanCi {
    match values.len() {
        0 => MeanCi {
            mean: f64::NAN,
            lo: f64::NAN,
            hi: f64::NAN,
        },
        1 => MeanCi {
            mean: values[0],
            lo: f64::NAN,
            hi: f64::NAN,
        },
        _ => mean_ci95(values).expect("two or more values"),
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Runs all repetitions on a pool of `config.workers` threads and aggregates
/// them. With `out`, results are persisted there and repetitions already on
/// disk are loaded instead of rerun.
///
/// Returns an error only when no repetition succeeded or output cannot be
/// written; check [`RunResult::is_failed`] for the failure-rate rule.
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> Result<RunResult> {
    config.validate()?;
    let source = load_source(config)?;
    let dir = out.map(|p| OutputDir::create(p, config)).transpose()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<std::result::Result<RepRecord, String>>> = pool.install(|| {
        (0..config.repetitions)
            .into_par_iter()
            .map(|rep| {
                if let Some(d) = &dir {
                    if let Some(record) = d.load_record(rep)? {
                        return Ok(Ok(record));
                    }
                }
                match run_iteration(config, &source, rep) {
                    Ok(r) => {
                        if let Some(d) = &dir {
                            d.write_repetition(&r, config.save_models)?;
                        }
                        Ok(Ok(r.record()))
                    }
                    Err(e) => {
                        if let Some(d) = &dir {
                            d.write_failure(rep, &e)?;
                        }
                        Ok(Err(e.to_string()))
                    }
                }
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (rep, o) in outcomes.into_iter().enumerate() {
        match o? {
            Ok(r) => records.push(r),
            Err(e) => failures.push((rep, e)),
        }
    }
    if records.is_empty() {
        return Err(Error::ExperimentFailed {
            failed: failures.len(),
            total: config.repetitions,
        });
    }
    let result = RunResult::aggregate(config.clone(), records, failures)?;
    if let Some(d) = &dir {
        d.write_summary(&result)?;
    }
    Ok(result)
}

/// Which training subset a sweep contaminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    P,
    U,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P" => Ok(Axis::P),
            "U" => Ok(Axis::U),
            other => Err(Error::InvalidParameter(format!("axis must be P or U, got {other:?}"))),
        }
    }
}

/// Contamination of the subset held fixed during a sweep.
pub const SWEEP_FIXED_RATE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub level: f64,
    pub method: Method,
    pub auc_pr: MeanCi,
}

/// One experiment per contamination `level` on `axis`, the other subset
/// fixed at [`SWEEP_FIXED_RATE`]. Levels share the master seed. With `out`,
/// each level persists to `level_<rate>/` and the table to `sweep.csv`.
pub fn contamination_sweep(
    config: &ExperimentConfig,
    axis: Axis,
    levels: &[f64],
    out: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &level in levels {
        let mut c = config.clone();
        c.setting = Setting::Custom;
        (c.rate_p, c.rate_u) = match axis {
            Axis::P => (level, SWEEP_FIXED_RATE),
            Axis::U => (SWEEP_FIXED_RATE, level),
        };
        let sub = out.map(|p| p.join(format!("level_{level}")));
        let result = run_experiment(&c, sub.as_deref())?;
        if result.is_failed() {
            return Err(Error::ExperimentFailed {
                failed: result.failures.len(),
                total: c.repetitions,
            });
        }
        for s in &result.summary {
            rows.push(SweepRow {
                level,
                method: s.method,
                auc_pr: s.auc_pr,
            });
        }
    }
    if let Some(p) = out {
        persist::write_file(&p.join("sweep.csv"), &sweep_csv(axis, &rows))?;
    }
    Ok(rows)
}

pub fn sweep_csv(axis: Axis, rows: &[SweepRow]) -> String {
    let mut out = String::from("axis,level,method,auc_pr_mean,auc_pr_ci_lo,auc_pr_ci_hi\n");
    let axis = match axis {
        Axis::P => "P",
        Axis::U => "U",
    };
    for r in rows {
        let _ = writeln!(
            out,
            "{axis},{},{},{},{},{}",
            r.level,
            r.method,
            general(r.auc_pr.mean, 17),
            general(r.auc_pr.lo, 17),
            general(r.auc_pr.hi, 17)
        );
    }
    out
}

/// Size of the contaminated set bootstrap resamples are drawn from.
pub const STUDY_SOURCE_SIZE: usize = 10_000;
/// Default number of resamples per size.
pub const STUDY_DEFAULT_TRIALS: usize = 20_000;
/// Smallest accepted number of resamples per size.
pub const STUDY_MIN_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub size: usize,
    pub mean: f64,
    /// Empirical 2.5th percentile.
    pub ci_lo: f64,
    /// Empirical 97.5th percentile.
    pub ci_hi: f64,
}

/// Contamination of bootstrap resamples of a set with contamination `rate`,
/// for each resample size. Size `sizes[i]` uses seed `derive(seed, [i])`.
pub fn resample_contamination_study(rate: f64, sizes: &[usize], trials: usize, seed: u64) -> Result<Vec<StudyRow>> {
    if !(0.0..0.5).contains(&rate) {
        return Err(Error::InvalidParameter(format!("rate {rate} outside [0, 0.5)")));
    }
    if trials < STUDY_MIN_TRIALS {
        return Err(Error::InvalidParameter(format!(
            "need at least {STUDY_MIN_TRIALS} trials, got {trials}"
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidParameter("resample sizes must be positive".into()));
    }
    // Bootstrap draws are uniform, so the source only needs its count of
    // contaminated members: indices below `bad` are mislabeled.
    let bad = contamination_count(rate, STUDY_SOURCE_SIZE) as u64;
    Ok(sizes
        .par_iter()
        .enumerate()
        .map(|(i, &size)| {
            let mut r = rng(derive_seed(seed, &[i as u64]));
            let mut values: Vec<f64> = (0..trials)
                .map(|_| {
                    let hits = (0..size)
                        .filter(|_| rand::Rng::random_range(&mut r, 0..STUDY_SOURCE_SIZE as u64) < bad)
                        .count();
                    hits as f64 / size as f64
                })
                .collect();
            let mean = values.iter().sum::<f64>() / trials as f64;
            values.sort_by(f64::total_cmp);
            StudyRow {
                size,
                mean,
                ci_lo: percentile(&values, 0.025),
                ci_hi: percentile(&values, 0.975),
            }
        })
        .collect())
}

/// Linear-interpolation percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("size,mean,ci_lo,ci_hi\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.size,
            general(r.mean, 17),
            general(r.ci_lo, 17),
            general(r.ci_hi, 17)
        );
    }
    out
}
