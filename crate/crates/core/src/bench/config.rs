use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::synthetic::SyntheticConfig;
use crate::error::{Error, Result};
use crate::pseudolabel::Strategy;
use crate::selftrain::SelfTrainConfig;

/// One row of the experiment: supervised only, or a pseudo-labeling strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Supervised,
    SelfTrain(Strategy),
}

impl Method {
    pub fn all() -> Vec<Method> {
        std::iter::once(Method::Supervised)
            .chain(Strategy::ALL.into_iter().map(Method::SelfTrain))
            .collect()
    }

    pub fn strategy(self) -> Option<Strategy> {
        match self {
            Method::Supervised => None,
            Method::SelfTrain(s) => Some(s),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Supervised => "none",
            Method::SelfTrain(s) => s.name(),
        }
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
        match s.to_ascii_lowercase().as_str() {
            "none" | "supervised" => Ok(Method::Supervised),
            other => other.parse().map(Method::SelfTrain),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

/// Labeled rows kept per fold: an absolute count or a share of the fold's
/// training rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Budget {
    Count(usize),
    Fraction(f64),
}

impl Budget {
    pub fn resolve(self, n_labeled: usize) -> usize {
        match self {
            Budget::Count(n) => n,
            Budget::Fraction(p) => (p * n_labeled as f64).round() as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Csv { path: PathBuf, schema: PathBuf },
    Synthetic(SyntheticConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub budget: Budget,
    #[serde(default = "Method::all")]
    pub methods: Vec<Method>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Pick alpha per fold by grid search for regularized methods; otherwise
    /// `selftrain.labeler.alpha` is used as is.
    #[serde(default = "default_true")]
    pub alpha_search: bool,
    /// Learner, labeler parameters, cycle cap and metric. The labeler
    /// strategy is overridden per method.
    #[serde(default)]
    pub selftrain: SelfTrainConfig,
}

fn default_folds() -> usize {
    3
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(data: DataSource, budget: Budget) -> Self {
        ExperimentConfig {
            data,
            budget,
            methods: Method::all(),
            folds: default_folds(),
            seed: 0,
            output: default_output(),
            alpha_search: true,
            selftrain: SelfTrainConfig::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config file. Relative data and output paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DataSource::Csv { path, schema } = &mut cfg.data {
            *path = base.join(&*path);
            *schema = base.join(&*schema);
        }
        cfg.output = base.join(&cfg.output);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything that can be checked without loading data.
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods listed".into()));
        }
        let mut seen = HashSet::new();
        if let Some(m) = self.methods.iter().find(|m| !seen.insert(**m)) {
            return Err(Error::Config(format!("method `{m}` listed twice")));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be >= 2, got {}", self.folds)));
        }
        match self.budget {
            Budget::Count(0) => return Err(Error::Config("budget must be positive".into())),
            Budget::Fraction(p) if !(p > 0.0 && p <= 1.0) => {
                return Err(Error::Config(format!("budget fraction must lie in (0, 1], got {p}")))
            }
            _ => {}
        }
        match &self.data {
            DataSource::Csv { path, schema } => {
                for p in [path, schema] {
                    if !p.is_file() {
                        return Err(Error::Config(format!("file {} does not exist", p.display())));
                    }
                }
            }
            DataSource::Synthetic(s) => {
                s.resolve()?.validate()?;
            }
        }
        self.selftrain.validate()
    }
}
