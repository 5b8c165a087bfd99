//! Base classifiers for the self-training loop.
//!
//! A [`ClassifierHandle`] owns hyperparameters, a seed and (once fitted) the
//! trained model. Every fit starts from scratch, and [`ClassifierHandle::reinitialize`]
//! drops fitted state so each self-training cycle trains a fresh classifier.

mod early_stop;
pub mod gbdt;
pub mod logreg;

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::tabdata::{Dataset, RowId};

pub use early_stop::{EarlyStopping, Observation};
pub use gbdt::{GbdtModel, GbdtParams};
pub use logreg::{LogRegModel, LogRegParams};

/// Version tag written into saved model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;

static NEXT_FIT_ID: AtomicU64 = AtomicU64::new(1);

/// Row-major class probability matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities {
    n_classes: usize,
    values: Vec<f64>,
}

impl Probabilities {
    pub fn new(n_classes: usize, values: Vec<f64>) -> Self {
        debug_assert!(n_classes > 0 && values.len() % n_classes == 0);
        Probabilities { n_classes, values }
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.n_classes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_classes..(i + 1) * self.n_classes]
    }

    /// Predicted class: argmax with the lowest index winning ties.
    pub fn argmax(&self, i: usize) -> usize {
        gbdt::argmax(self.row(i).iter().copied())
    }

    /// Confidence score: the row maximum.
    pub fn confidence(&self, i: usize) -> f64 {
        self.row(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn predictions(&self) -> Vec<usize> {
        (0..self.n_rows()).map(|i| self.argmax(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Gbdt,
    LogReg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerParams {
    Gbdt(GbdtParams),
    LogReg(LogRegParams),
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams::Gbdt(GbdtParams::default())
    }
}

impl LearnerParams {
    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerParams::Gbdt(_) => LearnerKind::Gbdt,
            LearnerParams::LogReg(_) => LearnerKind::LogReg,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerParams::Gbdt(p) => p.validate(),
            LearnerParams::LogReg(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Gbdt(GbdtModel),
    LogReg(LogRegModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedState {
    pub model: Model,
    /// Process-unique id of the fit that produced this state.
    pub fit_id: u64,
    /// Validation metric after each boosting round or epoch.
    pub trace: Vec<f64>,
    pub trained_on: Vec<RowId>,
    pub n_features: usize,
    pub n_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHandle {
    params: LearnerParams,
    seed: u64,
    metric: Metric,
    state: Option<FittedState>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    handle: ClassifierHandle,
}

impl ClassifierHandle {
    /// An unfitted handle that early-stops on macro-F1.
    pub fn new(params: LearnerParams, seed: u64) -> Self {
        ClassifierHandle {
            params,
            seed,
            metric: Metric::MacroF1,
            state: None,
        }
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn params(&self) -> &LearnerParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn is_fitted(&self) -> bool {
        self.state.is_some()
    }

    pub fn state(&self) -> Option<&FittedState> {
        self.state.as_ref()
    }

    pub fn fit_id(&self) -> Option<u64> {
        self.state.as_ref().map(|s| s.fit_id)
    }

    pub fn trace(&self) -> &[f64] {
        self.state.as_ref().map_or(&[], |s| s.trace.as_slice())
    }

    pub fn trained_on(&self) -> &[RowId] {
        self.state.as_ref().map_or(&[], |s| s.trained_on.as_slice())
    }

    pub fn gbdt(&self) -> Option<&GbdtModel> {
        match self.state.as_ref().map(|s| &s.model) {
            Some(Model::Gbdt(m)) => Some(m),
            _ => None,
        }
    }

    pub fn logreg(&self) -> Option<&LogRegModel> {
        match self.state.as_ref().map(|s| &s.model) {
            Some(Model::LogReg(m)) => Some(m),
            _ => None,
        }
    }

    /// Clears fitted state and installs a new seed. Hyperparameters are kept.
    pub fn reinitialize(self, seed: u64) -> Self {
        ClassifierHandle {
            params: self.params,
            seed,
            metric: self.metric,
            state: None,
        }
    }

    pub fn fit(self, train: &Dataset, valid: &Dataset) -> Result<Self> {
        let weights = vec![1.0; train.n_rows()];
        self.fit_weighted(train, &weights, valid)
    }

    /// Trains from scratch on `train`, early-stopping on `valid`. Any previous
    /// fitted state is discarded.
    pub fn fit_weighted(mut self, train: &Dataset, weights: &[f64], valid: &Dataset) -> Result<Self> {
        self.params.validate()?;
        if train.is_empty() {
            return Err(Error::argument("training set is empty"));
        }
        if valid.is_empty() {
            return Err(Error::argument("validation set is empty"));
        }
        if train.schema() != valid.schema() {
            return Err(Error::argument("train and validation schemas differ"));
        }
        if weights.len() != train.n_rows() || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::argument("sample weights must be one non-negative value per row"));
        }
        let y = train.required_labels()?;
        let valid_y = valid.required_labels()?;
        let k = train.n_classes();
        let counts = train.class_counts();
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::argument(format!(
                "class `{}` is missing from the training set",
                train.schema().class_names()[c]
            )));
        }
        let m = train.n_features();
        let (model, trace) = match &self.params {
            LearnerParams::Gbdt(p) => {
                let out = gbdt::fit(
                    p,
                    k,
                    m,
                    train.values(),
                    &y,
                    weights,
                    valid.values(),
                    &valid_y,
                    self.metric,
                )?;
                (Model::Gbdt(out.model), out.trace)
            }
            LearnerParams::LogReg(p) => {
                let out = logreg::fit(
                    p,
                    self.seed,
                    k,
                    m,
                    train.values(),
                    &y,
                    weights,
                    valid.values(),
                    &valid_y,
                    self.metric,
                )?;
                (Model::LogReg(out.model), out.trace)
            }
        };
        self.state = Some(FittedState {
            model,
            fit_id: NEXT_FIT_ID.fetch_add(1, Ordering::Relaxed),
            trace,
            trained_on: train.row_ids().to_vec(),
            n_features: m,
            n_classes: k,
        });
        Ok(self)
    }

    pub fn predict_proba(&self, x: &Dataset) -> Result<Probabilities> {
        let state = self
            .state
            .as_ref()
            .ok_or_else(|| Error::State("classifier is not fitted".into()))?;
        if x.n_features() != state.n_features {
            return Err(Error::argument(format!(
                "expected {} features, got {}",
                state.n_features,
                x.n_features()
            )));
        }
        Ok(match &state.model {
            Model::Gbdt(m) => m.predict_proba(x.values(), x.n_rows()),
            Model::LogReg(m) => m.predict_proba(x.values(), x.n_rows()),
        })
    }

    pub fn predict(&self, x: &Dataset) -> Result<Vec<usize>> {
        Ok(self.predict_proba(x)?.predictions())
    }

    /// Per-feature importance: total split gain for GBDT, mean absolute
    /// standardized coefficient for logistic regression. `None` when unfitted.
    pub fn feature_importances(&self) -> Option<Vec<f64>> {
        match &self.state.as_ref()?.model {
            Model::Gbdt(m) => Some(m.feature_importances()),
            Model::LogReg(m) => Some(m.feature_importances()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            handle: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        Ok(file.handle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
