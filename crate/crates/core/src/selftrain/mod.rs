//! The self-training cycle: fit on the labeled rows, pseudo-label the pool,
//! retrain a fresh classifier on the union, and keep the best model seen.

mod audit;

use std::collections::HashSet;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{ClassifierHandle, LearnerParams};
use crate::likelihood::{build_cache, fit_likelihood, select_features, LogLikelihoodCache, DEFAULT_SMOOTHING};
use crate::metrics::Metric;
use crate::pseudolabel::{
    score_batch, select_fixed_threshold, select_naive, select_top, Candidate, LabelerConfig,
    PseudoLabelBatch, Strategy,
};
use crate::tabdata::{stratified_holdout, Dataset, Discretizer, DEFAULT_BINS};

pub use audit::{audit_pseudo_labels, audit_with_truth, PseudoLabelAudit};

pub const DEFAULT_MAX_CYCLES: usize = 20;
pub const DEFAULT_ALPHA_GRID: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfTrainConfig {
    pub labeler: LabelerConfig,
    pub learner: LearnerParams,
    pub max_cycles: usize,
    pub alpha_grid: Vec<f64>,
    pub seed: u64,
    /// Share of the labeled rows held out for the performance measure and
    /// early stopping.
    pub validation_fraction: f64,
    pub metric: Metric,
    pub smoothing: f64,
    pub n_bins: usize,
    /// Number of features in the likelihood product; `None` uses all.
    pub top_k: Option<usize>,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        SelfTrainConfig {
            labeler: LabelerConfig::default(),
            learner: LearnerParams::default(),
            max_cycles: DEFAULT_MAX_CYCLES,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            seed: 0,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
            metric: Metric::MacroF1,
            smoothing: DEFAULT_SMOOTHING,
            n_bins: DEFAULT_BINS,
            top_k: None,
        }
    }
}

impl SelfTrainConfig {
    pub fn new(strategy: Strategy) -> Self {
        SelfTrainConfig {
            labeler: LabelerConfig::new(strategy),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.labeler.validate()?;
        self.learner.validate()?;
        if self.max_cycles == 0 {
            return Err(Error::Config("max_cycles must be >= 1".into()));
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
            return Err(Error::Config(format!("alpha grid value {a} must be >= 0")));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.smoothing >= 0.0) || !self.smoothing.is_finite() {
            return Err(Error::Config(format!("smoothing must be >= 0, got {}", self.smoothing)));
        }
        if self.n_bins == 0 {
            return Err(Error::Config("n_bins must be >= 1".into()));
        }
        if self.top_k == Some(0) {
            return Err(Error::Config("top_k must be >= 1".into()));
        }
        Ok(())
    }

    fn handle(&self, seed: u64) -> ClassifierHandle {
        ClassifierHandle::new(self.learner.clone(), seed).with_metric(self.metric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub batch_size: usize,
    /// Distinct unlabeled rows pseudo-labeled so far.
    pub cumulative: usize,
    pub pm: f64,
    /// Wall time of the pseudo-labeling step (predict, score, select).
    pub seconds: f64,
    pub fit_id: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleTrace {
    pub records: Vec<CycleRecord>,
}

impl CycleTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn cumulative_counts(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.cumulative).collect()
    }

    pub fn mean_labeling_seconds(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.seconds).sum::<f64>() / self.records.len() as f64
    }

    /// CSV with columns `cycle,batch_size,cumulative,pm,seconds,fit_id`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<trace csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SelfTrainOutcome {
    pub best: ClassifierHandle,
    /// 0 when the supervised model was never beaten.
    pub best_cycle: usize,
    pub initial_pm: f64,
    pub best_pm: f64,
    pub trace: CycleTrace,
    pub batches: Vec<PseudoLabelBatch>,
    /// Time spent fitting the likelihood model and building its cache.
    pub cache_seconds: f64,
}

/// Metric of `c` on `holdout`. Fails if any holdout row was used for training.
pub fn evaluate_pm(c: &ClassifierHandle, holdout: &Dataset, metric: Metric) -> Result<f64> {
    let trained: HashSet<_> = c.trained_on().iter().collect();
    if let Some(id) = holdout.row_ids().iter().find(|id| trained.contains(id)) {
        return Err(Error::argument(format!(
            "holdout row {id} was part of the training data"
        )));
    }
    let truth = holdout.required_labels()?;
    let pred = c.predict(holdout)?;
    metric.from_labels(&truth, &pred, holdout.n_classes())
}

/// Splits `labeled` into a training part and a stratified holdout, then runs
/// [`run_with_holdout`].
pub fn run_self_training(
    config: &SelfTrainConfig,
    labeled: &Dataset,
    unlabeled: &Dataset,
) -> Result<SelfTrainOutcome> {
    config.validate()?;
    check_labeled(labeled)?;
    let (train, holdout) = stratified_holdout(labeled, config.validation_fraction, config.seed)?;
    run_with_holdout(config, &train, &holdout, unlabeled)
}

fn check_labeled(labeled: &Dataset) -> Result<()> {
    labeled.required_labels()?;
    if let Some(c) = labeled.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::argument(format!(
            "labeled set has no rows of class `{}`",
            labeled.schema().class_names()[c]
        )));
    }
    Ok(())
}

fn likelihood_cache(
    config: &SelfTrainConfig,
    train: &Dataset,
    holdout: &Dataset,
    unlabeled: &Dataset,
    supervised: &ClassifierHandle,
) -> Result<LogLikelihoodCache> {
    let disc = Discretizer::fit(&[train, holdout, unlabeled], config.n_bins)?;
    let selected = match config.top_k {
        Some(k) => select_features(train, supervised, k),
        None => (0..train.n_features()).collect(),
    };
    let model = fit_likelihood(train, disc, config.smoothing, &selected)?;
    Ok(build_cache(&model, unlabeled))
}

/// Runs the cycle with an explicit training set and performance holdout.
///
/// The loop stops when the pool is used up (curriculum strategies), when a
/// retrained model fails to beat its predecessor on the holdout (all other
/// strategies), when a threshold batch comes back empty, or after
/// `max_cycles`. The returned model is the best one on the holdout.
pub fn run_with_holdout(
    config: &SelfTrainConfig,
    train: &Dataset,
    holdout: &Dataset,
    unlabeled: &Dataset,
) -> Result<SelfTrainOutcome> {
    config.validate()?;
    check_labeled(train)?;
    if train.schema() != unlabeled.schema() || train.schema() != holdout.schema() {
        return Err(Error::argument("labeled, holdout and unlabeled schemas differ"));
    }
    let labeler = &config.labeler;
    let strategy = labeler.strategy;

    let mut c_new = config.handle(config.seed).fit(train, holdout)?;
    let mut pm_new = evaluate_pm(&c_new, holdout, config.metric)?;
    let mut outcome = SelfTrainOutcome {
        best: c_new.clone(),
        best_cycle: 0,
        initial_pm: pm_new,
        best_pm: pm_new,
        trace: CycleTrace::default(),
        batches: Vec::new(),
        cache_seconds: 0.0,
    };
    let n_pool = unlabeled.n_rows();
    if n_pool == 0 {
        return Ok(outcome);
    }

    let cache = if strategy.is_regularized() {
        let start = Instant::now();
        let cache = likelihood_cache(config, train, holdout, unlabeled, &c_new)?;
        outcome.cache_seconds = start.elapsed().as_secs_f64();
        Some(cache)
    } else {
        None
    };

    // Curriculum state: rows still in the pool and every label handed out.
    let mut remaining: Vec<usize> = (0..n_pool).collect();
    let mut accepted: Vec<Candidate> = Vec::new();
    let mut ever_labeled = vec![false; n_pool];
    let mut cumulative = 0;
    let mut pm_old = f64::NEG_INFINITY;
    // Without a likelihood term the score is the confidence itself.
    let alpha = if cache.is_some() { labeler.alpha } else { 0.0 };

    for t in 1..=config.max_cycles {
        if strategy.is_curriculum() {
            if cumulative == n_pool {
                break;
            }
        } else if pm_new <= pm_old {
            break;
        }
        let c_old = c_new;
        pm_old = pm_new;

        let start = Instant::now();
        let batch: Vec<Candidate> = if strategy.is_curriculum() {
            let pool = unlabeled.subset(&remaining);
            let proba = c_old.predict_proba(&pool)?;
            let local = cache.as_ref().map(|c| c.restrict(&remaining));
            let cands = score_batch(&proba, pool.row_ids(), local.as_ref(), alpha)?;
            let want = labeler.cumulative_target(t, n_pool).saturating_sub(cumulative);
            select_top(&cands, want)
                .into_iter()
                .map(|mut c| {
                    c.index = remaining[c.index];
                    c
                })
                .collect()
        } else {
            let proba = c_old.predict_proba(unlabeled)?;
            let cands = score_batch(&proba, unlabeled.row_ids(), cache.as_ref(), alpha)?;
            match strategy {
                Strategy::Naive => select_naive(&cands),
                _ => select_fixed_threshold(&cands, labeler.threshold),
            }
        };
        let seconds = start.elapsed().as_secs_f64();

        if batch.is_empty() && !strategy.is_curriculum() {
            log::debug!("cycle {t}: empty {strategy} batch, stopping");
            break;
        }
        for c in &batch {
            if !ever_labeled[c.index] {
                ever_labeled[c.index] = true;
                cumulative += 1;
            }
        }
        let training_labels: &[Candidate] = if strategy.is_curriculum() {
            let taken: HashSet<usize> = batch.iter().map(|c| c.index).collect();
            remaining.retain(|i| !taken.contains(i));
            accepted.extend_from_slice(&batch);
            &accepted
        } else {
            &batch
        };

        if batch.is_empty() {
            // Ties at an earlier cutoff already covered this step's target.
            outcome.trace.records.push(CycleRecord {
                cycle: t,
                batch_size: 0,
                cumulative,
                pm: pm_old,
                seconds,
                fit_id: c_old.fit_id().unwrap_or_default(),
            });
            c_new = c_old;
            pm_new = pm_old;
            continue;
        }

        let augmented = augment(train, unlabeled, training_labels)?;
        c_new = c_old
            .clone()
            .reinitialize(config.seed.wrapping_add(t as u64))
            .fit(&augmented, holdout)?;
        pm_new = evaluate_pm(&c_new, holdout, config.metric)?;
        log::debug!(
            "cycle {t}: {strategy} batch {} cumulative {cumulative} pm {pm_new:.4}",
            batch.len()
        );
        if pm_new > outcome.best_pm {
            outcome.best = c_new.clone();
            outcome.best_pm = pm_new;
            outcome.best_cycle = t;
        }
        outcome.trace.records.push(CycleRecord {
            cycle: t,
            batch_size: batch.len(),
            cumulative,
            pm: pm_new,
            seconds,
            fit_id: c_new.fit_id().unwrap_or_default(),
        });
        outcome.batches.push(PseudoLabelBatch {
            strategy,
            cycle: t,
            entries: batch,
        });
    }
    Ok(outcome)
}

/// Labeled rows plus the pseudo-labeled pool rows.
fn augment(train: &Dataset, unlabeled: &Dataset, labels: &[Candidate]) -> Result<Dataset> {
    let idx: Vec<usize> = labels.iter().map(|c| c.index).collect();
    let pseudo = unlabeled
        .subset(&idx)
        .with_labels(labels.iter().map(|c| Some(c.label)).collect())?;
    train.concat(&pseudo)
}

#[derive(Debug, Clone)]
pub struct GridSearchOutcome {
    pub best_alpha: f64,
    pub outcome: SelfTrainOutcome,
    /// `(alpha, best holdout pm)` for every grid point, in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// Runs a regularized strategy for every alpha of the grid and keeps the one
/// with the best holdout score, preferring the smaller alpha on ties.
pub fn grid_search_alpha(
    config: &SelfTrainConfig,
    train: &Dataset,
    holdout: &Dataset,
    unlabeled: &Dataset,
) -> Result<GridSearchOutcome> {
    if !config.labeler.strategy.is_regularized() {
        return Err(Error::argument(format!(
            "alpha search needs a regularized strategy, got {}",
            config.labeler.strategy
        )));
    }
    if config.alpha_grid.is_empty() {
        return Err(Error::argument("alpha grid is empty"));
    }
    config.validate()?;
    let runs: Vec<(f64, SelfTrainOutcome)> = config
        .alpha_grid
        .par_iter()
        .map(|&alpha| {
            let mut cfg = config.clone();
            cfg.labeler.alpha = alpha;
            run_with_holdout(&cfg, train, holdout, unlabeled).map(|o| (alpha, o))
        })
        .collect::<Result<_>>()?;
    let scores = runs.iter().map(|(a, o)| (*a, o.best_pm)).collect();
    let (best_alpha, outcome) = runs
        .into_iter()
        .reduce(|best, cur| {
            let better = cur.1.best_pm > best.1.best_pm
                || (cur.1.best_pm == best.1.best_pm && cur.0 < best.0);
            if better {
                cur
            } else {
                best
            }
        })
        .expect("grid is non-empty");
    Ok(GridSearchOutcome {
        best_alpha,
        outcome,
        scores,
    })
}

/// Supervised-only baseline on the same train/holdout split.
pub fn fit_supervised(config: &SelfTrainConfig, train: &Dataset, holdout: &Dataset) -> Result<ClassifierHandle> {
    config.learner.validate()?;
    check_labeled(train)?;
    config.handle(config.seed).fit(train, holdout)
}
