//! Cross-validated experiments: for every fold, mask labels down to a
//! budget, run each method, score it on the fold's test rows, and write
//! scores, ranks, cycle traces and pseudo-label audits.

mod config;
mod report;
pub mod synthetic;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learners::ClassifierHandle;
use crate::metrics::{rank_aggregate, RankTable, ScoreMatrix};
use crate::pseudolabel::PseudoLabelBatch;
use crate::selftrain::{
    audit_pseudo_labels, fit_supervised, grid_search_alpha, run_with_holdout, CycleTrace,
    PseudoLabelAudit,
};
use crate::tabdata::{load_csv, mask_labels, stratified_holdout, stratified_kfold, Dataset, FeatureSchema};

pub use config::{Budget, DataSource, ExperimentConfig, Method};
pub use report::{audit_csv, audit_from_pseudo_labels, read_pseudo_labels, PseudoLabelRow, UnitSummary};
pub use synthetic::{generate_synthetic, Preset, SyntheticConfig, SyntheticData, SyntheticSpec};

/// The dataset of an experiment, plus cluster membership when synthetic.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub synthetic: Option<SyntheticData>,
}

pub fn load_data(config: &ExperimentConfig) -> Result<LoadedData> {
    match &config.data {
        DataSource::Csv { path, schema } => {
            let schema = FeatureSchema::load(schema)?;
            Ok(LoadedData {
                dataset: load_csv(path, &schema)?,
                synthetic: None,
            })
        }
        DataSource::Synthetic(s) => {
            let data = generate_synthetic(&s.resolve()?, s.seed.unwrap_or(config.seed))?;
            Ok(LoadedData {
                dataset: data.dataset.clone(),
                synthetic: Some(data),
            })
        }
    }
}

/// The three disjoint row sets of one fold.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub fold: usize,
    pub labeled: Dataset,
    /// Pool rows; masked rows keep their label in the hidden field.
    pub unlabeled: Dataset,
    pub test: Dataset,
}

impl FoldData {
    /// Fails if a test row also sits in the labeled set or the pool.
    pub fn check_leakage(&self) -> Result<()> {
        let test: std::collections::HashSet<_> = self.test.row_ids().iter().collect();
        let leaked = self
            .labeled
            .row_ids()
            .iter()
            .chain(self.unlabeled.row_ids())
            .find(|id| test.contains(id));
        match leaked {
            Some(id) => Err(Error::State(format!(
                "fold {}: test row {id} leaked into training data",
                self.fold
            ))),
            None => Ok(()),
        }
    }
}

/// Stratified folds over the labeled rows; rows without a label join every
/// fold's pool.
pub fn plan_folds(config: &ExperimentConfig, data: &LoadedData) -> Result<Vec<FoldData>> {
    let d = &data.dataset;
    let assignment = stratified_kfold(d, config.folds, config.seed)?;
    (0..config.folds)
        .map(|f| {
            let test = d.subset(&assignment.test_indices(f));
            let rest = d.subset(&assignment.train_indices(f));
            let available = rest.labeled_indices().len();
            let keep = config.budget.resolve(available);
            if keep < d.n_classes() || keep > available {
                return Err(Error::Config(format!(
                    "fold {f}: budget of {keep} labeled rows must lie in [{}, {available}]",
                    d.n_classes()
                )));
            }
            let seed = config.seed.wrapping_add(f as u64);
            let (labeled, unlabeled) = match &data.synthetic {
                Some(s) if s.spec.bias > 0.0 => s.mask_labels_biased(&rest, keep, seed)?,
                _ => mask_labels(&rest, keep, seed)?,
            };
            let fd = FoldData {
                fold: f,
                labeled,
                unlabeled,
                test,
            };
            fd.check_leakage()?;
            Ok(fd)
        })
        .collect()
}

/// Everything one (method, fold) run produced.
#[derive(Debug, Clone)]
pub struct UnitOutput {
    pub model: ClassifierHandle,
    pub score: f64,
    pub alpha: Option<f64>,
    pub initial_pm: f64,
    pub best_pm: f64,
    pub best_cycle: usize,
    pub trace: CycleTrace,
    pub batches: Vec<PseudoLabelBatch>,
    pub audit: Option<PseudoLabelAudit>,
}

/// Runs one method on one fold.
pub fn run_unit(config: &ExperimentConfig, method: Method, fold: &FoldData) -> Result<UnitOutput> {
    let mut st = config.selftrain.clone();
    st.seed = config.seed.wrapping_add(fold.fold as u64);
    let (train, holdout) = stratified_holdout(&fold.labeled, st.validation_fraction, st.seed)?;
    let (outcome, alpha) = match method.strategy() {
        None => {
            let model = fit_supervised(&st, &train, &holdout)?;
            let score = st.metric.from_labels(
                &fold.test.required_labels()?,
                &model.predict(&fold.test)?,
                fold.test.n_classes(),
            )?;
            let pm = crate::selftrain::evaluate_pm(&model, &holdout, st.metric)?;
            return Ok(UnitOutput {
                model,
                score,
                alpha: None,
                initial_pm: pm,
                best_pm: pm,
                best_cycle: 0,
                trace: CycleTrace::default(),
                batches: Vec::new(),
                audit: None,
            });
        }
        Some(s) => {
            st.labeler.strategy = s;
            if s.is_regularized() && config.alpha_search {
                let g = grid_search_alpha(&st, &train, &holdout, &fold.unlabeled)?;
                (g.outcome, Some(g.best_alpha))
            } else {
                let alpha = s.is_regularized().then_some(st.labeler.alpha);
                (run_with_holdout(&st, &train, &holdout, &fold.unlabeled)?, alpha)
            }
        }
    };
    let score = st.metric.from_labels(
        &fold.test.required_labels()?,
        &outcome.best.predict(&fold.test)?,
        fold.test.n_classes(),
    )?;
    let audit = if fold.unlabeled.hidden_labels().iter().all(Option::is_some) {
        Some(audit_pseudo_labels(&outcome.batches, &fold.unlabeled)?)
    } else {
        log::warn!("pool rows without hidden labels; skipping the pseudo-label audit");
        None
    };
    Ok(UnitOutput {
        model: outcome.best,
        score,
        alpha,
        initial_pm: outcome.initial_pm,
        best_pm: outcome.best_pm,
        best_cycle: outcome.best_cycle,
        trace: outcome.trace,
        batches: outcome.batches,
        audit,
    })
}

/// Result of a full experiment. Failed units have a NaN score and an error.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub scores: ScoreMatrix,
    /// Ranks over the methods without failed folds; `None` if there are none.
    pub ranks: Option<RankTable>,
    pub units: Vec<UnitSummary>,
    pub outputs: Vec<(Method, usize, std::result::Result<UnitOutput, String>)>,
}

/// Validates the config, runs every (fold, method) unit in parallel and
/// writes the report files into `config.output`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let data = load_data(config)?;
    let folds = plan_folds(config, &data)?;
    let units: Vec<(Method, usize)> = folds
        .iter()
        .flat_map(|f| config.methods.iter().map(move |&m| (m, f.fold)))
        .collect();
    let outputs: Vec<_> = units
        .par_iter()
        .map(|&(method, f)| {
            let res = catch_unwind(AssertUnwindSafe(|| run_unit(config, method, &folds[f])));
            let res = match res {
                Ok(Ok(out)) => Ok(out),
                Ok(Err(e)) => Err(e.to_string()),
                Err(panic) => Err(panic_message(&panic)),
            };
            if let Err(e) = &res {
                log::error!("{method} on fold {f} failed: {e}");
            }
            (method, f, res)
        })
        .collect();

    let columns: Vec<String> = (0..config.folds).map(|f| format!("fold_{f}")).collect();
    let methods: Vec<String> = config.methods.iter().map(|m| m.name().to_string()).collect();
    let mut values = vec![vec![f64::NAN; config.folds]; methods.len()];
    for (method, f, res) in &outputs {
        let row = config.methods.iter().position(|m| m == method).expect("listed method");
        if let Ok(out) = res {
            values[row][*f] = out.score;
        }
    }
    let scores = ScoreMatrix::new(methods, columns, values)?;
    let ranks = complete_ranks(&scores)?;
    let units = outputs.iter().map(|(m, f, r)| UnitSummary::new(*m, *f, r)).collect();
    let report = ExperimentReport {
        scores,
        ranks,
        units,
        outputs,
    };
    report::write_report(config, &data.dataset, &report)?;
    Ok(report)
}

fn complete_ranks(scores: &ScoreMatrix) -> Result<Option<RankTable>> {
    let keep: Vec<usize> = (0..scores.methods.len())
        .filter(|&i| scores.values[i].iter().all(|v| !v.is_nan()))
        .collect();
    if keep.is_empty() {
        return Ok(None);
    }
    let sub = ScoreMatrix::new(
        keep.iter().map(|&i| scores.methods[i].clone()).collect(),
        scores.columns.clone(),
        keep.iter().map(|&i| scores.values[i].clone()).collect(),
    )?;
    rank_aggregate(&sub, true).map(Some)
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        format!("panic: {s}")
    } else if let Some(s) = p.downcast_ref::<String>() {
        format!("panic: {s}")
    } else {
        "panic".into()
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
