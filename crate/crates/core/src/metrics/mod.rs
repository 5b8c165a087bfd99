//! Classification metrics over a confusion matrix, plus rank aggregation of
//! method-by-column score tables.

mod rank;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use rank::{
    rank_aggregate, rank_aggregate_with, read_score_matrix, ScoreMatrix, RankTable, TieRule,
};

/// K x K counts, rows = truth, columns = prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(Error::argument(format!(
                "confusion matrix needs {} cells, got {}",
                k * k,
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn from_labels(truth: &[usize], pred: &[usize], k: usize) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::argument("truth and prediction lengths differ"));
        }
        let mut cm = ConfusionMatrix::new(k);
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= k || p >= k {
                return Err(Error::argument(format!("label out of range for {k} classes")));
            }
            cm.add(t, p);
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: usize, pred: usize) {
        self.counts[truth * self.k + pred] += 1;
    }

    pub fn n_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn true_positives(&self, c: usize) -> u64 {
        self.get(c, c)
    }

    fn predicted(&self, c: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, c)).sum()
    }

    fn actual(&self, c: usize) -> u64 {
        (0..self.k).map(|p| self.get(c, p)).sum()
    }

    /// Precision, recall and F1 with class `c` as the positive class.
    /// Zero denominators give 0.
    pub fn class_stats(&self, c: usize) -> ClassStats {
        let tp = self.true_positives(c) as f64;
        let pred = self.predicted(c) as f64;
        let support = self.actual(c);
        let precision = if pred > 0.0 { tp / pred } else { 0.0 };
        let recall = if support > 0 { tp / support as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassStats {
            precision,
            recall,
            f1,
            support,
        }
    }

    pub fn per_class(&self) -> Vec<ClassStats> {
        (0..self.k).map(|c| self.class_stats(c)).collect()
    }

    /// Classes that never occur in the truth. Their recall counts as 0 in the
    /// balanced accuracy and macro averages.
    pub fn empty_classes(&self) -> Vec<usize> {
        (0..self.k).filter(|&c| self.actual(c) == 0).collect()
    }
}

pub fn f1_binary(cm: &ConfusionMatrix, positive: usize) -> f64 {
    cm.class_stats(positive).f1
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total();
    if total == 0 {
        return 0.0;
    }
    (0..cm.k).map(|c| cm.get(c, c)).sum::<u64>() as f64 / total as f64
}

fn warn_empty(cm: &ConfusionMatrix) {
    let empty = cm.empty_classes();
    if !empty.is_empty() {
        log::warn!("classes {empty:?} have no truth rows; their recall counts as 0");
    }
}

pub fn balanced_accuracy(cm: &ConfusionMatrix) -> f64 {
    warn_empty(cm);
    cm.per_class().iter().map(|s| s.recall).sum::<f64>() / cm.k as f64
}

pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    warn_empty(cm);
    cm.per_class().iter().map(|s| s.f1).sum::<f64>() / cm.k as f64
}

pub fn macro_precision(cm: &ConfusionMatrix) -> f64 {
    cm.per_class().iter().map(|s| s.precision).sum::<f64>() / cm.k as f64
}

pub fn macro_recall(cm: &ConfusionMatrix) -> f64 {
    cm.per_class().iter().map(|s| s.recall).sum::<f64>() / cm.k as f64
}

/// Metric used for early stopping, the self-training performance measure and
/// experiment scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum Metric {
    Accuracy,
    BalancedAccuracy,
    #[default]
    MacroF1,
    /// F1 of class index 1, the usual positive class of binary tasks.
    F1,
}

impl Metric {
    pub fn score(self, cm: &ConfusionMatrix) -> f64 {
        match self {
            Metric::Accuracy => accuracy(cm),
            Metric::BalancedAccuracy => balanced_accuracy(cm),
            Metric::MacroF1 => macro_f1(cm),
            Metric::F1 => f1_binary(cm, 1),
        }
    }

    pub fn from_labels(self, truth: &[usize], pred: &[usize], k: usize) -> Result<f64> {
        Ok(self.score(&ConfusionMatrix::from_labels(truth, pred, k)?))
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::BalancedAccuracy => "balanced_accuracy",
            Metric::MacroF1 => "macro_f1",
            Metric::F1 => "f1",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "accuracy" | "acc" => Ok(Metric::Accuracy),
            "balanced_accuracy" | "bacc" => Ok(Metric::BalancedAccuracy),
            "macro_f1" => Ok(Metric::MacroF1),
            "f1" => Ok(Metric::F1),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

impl TryFrom<String> for Metric {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Metric> for String {
    fn from(m: Metric) -> String {
        m.name().to_string()
    }
}
