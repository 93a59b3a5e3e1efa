//! Experiment configuration: flat TOML with `PUFORGE_<KEY>` environment
//! overrides.
//!
//! Every key is optional; see [`ExperimentConfig::default`] for the
//! defaults. Search domains are overridden per hyperparameter with
//! `grid_<param> = [v1, v2, ...]` or `box_<param> = [lo, hi]`. Boxes over
//! `c_u`, `w_pos`, `gamma` and `unl_ratio` are sampled log-uniformly, the
//! fraction parameters uniformly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::{default_grid, KernelKind, Method};
use crate::tuning::{Domain, SearchMode, SearchSpace};

/// Label noise configuration of the training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    /// No contamination.
    Supervised,
    /// Clean P, contaminated U.
    Pu,
    /// Equal contamination in P and U.
    SemiSupervised,
    /// Arbitrary rates, used by contamination sweeps.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchKind {
    Grid,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    /// `"synthetic"` or a path to a sparse data file. Relative paths are
    /// resolved against the config file's directory.
    pub data: String,
    /// File label treated as the positive class; any other label is
    /// negative. Without it, labels `> 0` are positive.
    pub positive_label: Option<f64>,
    pub synthetic_positives: usize,
    pub synthetic_negatives: usize,
    pub setting: Setting,
    pub rate_p: f64,
    pub rate_u: f64,
    pub train_positives: usize,
    pub train_unlabeled: usize,
    pub test_positives: usize,
    pub test_negatives: usize,
    pub methods: Vec<String>,
    pub kernel: String,
    pub repetitions: usize,
    pub k_folds: usize,
    pub n_models: usize,
    pub search: SearchKind,
    pub budget: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub save_models: bool,
    /// `grid_*` / `box_*` overrides.
    #[serde(skip)]
    pub domains: BTreeMap<String, Domain>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            data: "synthetic".into(),
            positive_label: None,
            synthetic_positives: 10_000,
            synthetic_negatives: 10_000,
            setting: Setting::Supervised,
            rate_p: 0.0,
            rate_u: 0.0,
            train_positives: 100,
            train_unlabeled: 200,
            test_positives: 5000,
            test_negatives: 5000,
            methods: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
            kernel: "rbf".into(),
            repetitions: 20,
            k_folds: 10,
            n_models: 50,
            search: SearchKind::Grid,
            budget: 20,
            master_seed: 1,
            workers: 1,
            save_models: false,
            domains: BTreeMap::new(),
        }
    }
}

/// Keys accepted at the top level, used to pick environment overrides.
const KEYS: &[&str] = &[
    "name",
    "data",
    "positive_label",
    "synthetic_positives",
    "synthetic_negatives",
    "setting",
    "rate_p",
    "rate_u",
    "train_positives",
    "train_unlabeled",
    "test_positives",
    "test_negatives",
    "methods",
    "kernel",
    "repetitions",
    "k_folds",
    "n_models",
    "search",
    "budget",
    "master_seed",
    "workers",
    "save_models",
];

const LOG_SCALE: &[&str] = &["c_u", "w_pos", "gamma", "unl_ratio"];

impl ExperimentConfig {
    /// Parses TOML text. `base` anchors a relative `data` path.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::from_table(table, base)
    }

    /// Reads a config file and applies environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", path.display())))?;
        apply_env(&mut table, std::env::vars())?;
        Self::from_table(table, path.parent())
    }

    /// Defaults plus environment overrides, for runs without a file.
    pub fn from_env() -> Result<Self> {
        let mut table = toml::Table::new();
        apply_env(&mut table, std::env::vars())?;
        Self::from_table(table, None)
    }

    pub fn from_table(mut table: toml::Table, base: Option<&Path>) -> Result<Self> {
        let mut domains = BTreeMap::new();
        let dynamic: Vec<String> = table
            .keys()
            .filter(|k| k.starts_with("grid_") || k.starts_with("box_"))
            .cloned()
            .collect();
        for key in dynamic {
            let value = table.remove(&key).expect("key listed above");
            let (param, domain) = parse_domain(&key, &value)?;
            if domains.insert(param.clone(), domain).is_some() {
                return Err(Error::Config(format!("{param} has both a grid and a box")));
            }
        }
        let mut config: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        config.domains = domains;
        if let Some(base) = base {
            if config.data != "synthetic" && Path::new(&config.data).is_relative() {
                config.data = base.join(&config.data).to_string_lossy().into_owned();
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Checks the setting invariants and basic ranges.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, rate) in [("rate_p", self.rate_p), ("rate_u", self.rate_u)] {
            if !(0.0..0.5).contains(&rate) {
                return bad(format!("{name} = {rate} outside [0, 0.5)"));
            }
        }
        let ok = match self.setting {
            Setting::Supervised => self.rate_p == 0.0 && self.rate_u == 0.0,
            Setting::Pu => self.rate_p == 0.0 && self.rate_u > 0.0,
            Setting::SemiSupervised => self.rate_p == self.rate_u && self.rate_p > 0.0,
            Setting::Custom => true,
        };
        if !ok {
            return bad(format!(
                "rates rate_p={} rate_u={} do not fit setting {:?}",
                self.rate_p, self.rate_u, self.setting
            ));
        }
        if self.repetitions == 0 || self.n_models == 0 || self.workers == 0 {
            return bad("repetitions, n_models and workers must be positive".into());
        }
        if self.k_folds < 2 {
            return bad("k_folds must be at least 2".into());
        }
        if self.train_positives == 0 || self.train_unlabeled == 0 {
            return bad("training set needs positives and unlabeled instances".into());
        }
        if self.test_positives == 0 || self.test_negatives == 0 {
            return bad("test set needs both classes".into());
        }
        if self.search == SearchKind::Random && self.budget == 0 {
            return bad("random search needs a positive budget".into());
        }
        let methods = self.method_list()?;
        if methods.is_empty() {
            return bad("no methods selected".into());
        }
        for m in methods {
            self.space(m)?.validate()?;
        }
        Ok(())
    }

    /// Selected methods in canonical order, without duplicates.
    pub fn method_list(&self) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = self.methods.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn kernel_kind(&self) -> Result<KernelKind> {
        self.kernel.parse()
    }

    pub fn search_mode(&self) -> SearchMode {
        match self.search {
            SearchKind::Grid => SearchMode::Grid,
            SearchKind::Random => SearchMode::Random { budget: self.budget },
        }
    }

    /// Search space of `method`: defaults with the configured overrides.
    pub fn space(&self, method: Method) -> Result<SearchSpace> {
        let kernel = self.kernel_kind()?;
        let params = method
            .params(kernel)
            .into_iter()
            .map(|p| {
                let d = self
                    .domains
                    .get(p)
                    .cloned()
                    .unwrap_or_else(|| Domain::Grid(default_grid(p)));
                (p.to_string(), d)
            })
            .collect();
        Ok(SearchSpace::new(params))
    }

    /// Path of the data file, or `None` for synthetic data.
    pub fn data_path(&self) -> Option<PathBuf> {
        (self.data != "synthetic").then(|| PathBuf::from(&self.data))
    }

    /// Canonical TOML rendering, including domain overrides.
    pub fn to_toml(&self) -> String {
        let mut out = toml::to_string(self).expect("config serializes");
        for (param, domain) in &self.domains {
            let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
            match domain {
                Domain::Grid(v) => out.push_str(&format!("grid_{param} = [{}]\n", list(v))),
                Domain::Box { lo, hi, .. } => out.push_str(&format!("box_{param} = [{}]\n", list(&[*lo, *hi]))),
            }
        }
        out
    }
}

fn parse_domain(key: &str, value: &toml::Value) -> Result<(String, Domain)> {
    let numbers = value
        .as_array()
        .ok_or_else(|| Error::Config(format!("{key} must be an array")))?
        .iter()
        .map(|v| {
            v.as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| Error::Config(format!("{key} must contain numbers")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if let Some(param) = key.strip_prefix("grid_") {
        Ok((param.to_string(), Domain::Grid(numbers)))
    } else {
        let param = key.strip_prefix("box_").expect("caller filtered prefixes");
        let [lo, hi] = numbers[..] else {
            return Err(Error::Config(format!("{key} must be [lo, hi]")));
        };
        Ok((
            param.to_string(),
            Domain::Box {
                lo,
                hi,
                log: LOG_SCALE.contains(&param),
            },
        ))
    }
}

/// Applies `PUFORGE_<KEY>=value` overrides. Values are read as TOML
/// (`3`, `0.5`, `["cwsvm", "resvm"]`), falling back to a bare string.
/// Variables naming no config key are ignored, so the prefix can be shared
/// with other tooling.
pub fn apply_env(table: &mut toml::Table, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut vars: Vec<(String, String)> = vars.into_iter().collect();
    vars.sort();
    for (name, raw) in vars {
        let Some(key) = name.strip_prefix("PUFORGE_") else {
            continue;
        };
        let key = key.to_ascii_lowercase();
        if !(KEYS.contains(&key.as_str()) || key.starts_with("grid_") || key.starts_with("box_")) {
            continue;
        }
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.clone()));
        table.insert(key, value);
    }
    Ok(())
}
