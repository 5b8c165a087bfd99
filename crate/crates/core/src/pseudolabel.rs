//! Scoring of classifier predictions and the pseudo-labelers that turn
//! scores into batches.
//!
//! The score of a prediction with confidence `c` and scaled log-likelihood
//! `gamma` is `f = (alpha * gamma + 1) * c / (alpha + 1)`. With `alpha = 0` or
//! no likelihood available it is plain confidence.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Probabilities;
use crate::likelihood::LogLikelihoodCache;
use crate::tabdata::RowId;

pub const DEFAULT_THRESHOLD: f64 = 0.6;
pub const DEFAULT_INITIAL_PERCENT: f64 = 20.0;
pub const DEFAULT_STEP_PERCENT: f64 = 20.0;
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    /// Accept rows whose confidence is at least a fixed threshold.
    Fpl,
    /// Fixed threshold on the likelihood-regularized score.
    RFpl,
    /// Accept the top r% of the pool, raising r each cycle.
    Cpl,
    /// Curriculum on the likelihood-regularized score.
    RCpl,
    /// Accept every prediction.
    Naive,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Fpl,
        Strategy::RFpl,
        Strategy::Cpl,
        Strategy::RCpl,
        Strategy::Naive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Fpl => "fpl",
            Strategy::RFpl => "r-fpl",
            Strategy::Cpl => "cpl",
            Strategy::RCpl => "r-cpl",
            Strategy::Naive => "naive",
        }
    }

    pub fn is_regularized(self) -> bool {
        matches!(self, Strategy::RFpl | Strategy::RCpl)
    }

    pub fn is_curriculum(self) -> bool {
        matches!(self, Strategy::Cpl | Strategy::RCpl)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown pseudo-labeling strategy `{s}`")))
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelerConfig {
    pub strategy: Strategy,
    pub threshold: f64,
    pub initial_percent: f64,
    pub step_percent: f64,
    pub alpha: f64,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        LabelerConfig {
            strategy: Strategy::Fpl,
            threshold: DEFAULT_THRESHOLD,
            initial_percent: DEFAULT_INITIAL_PERCENT,
            step_percent: DEFAULT_STEP_PERCENT,
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl LabelerConfig {
    pub fn new(strategy: Strategy) -> Self {
        LabelerConfig {
            strategy,
            ..Default::default()
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        if !(self.initial_percent > 0.0 && self.initial_percent <= 100.0) {
            return Err(Error::Config(format!(
                "initial_percent must lie in (0, 100], got {}",
                self.initial_percent
            )));
        }
        if !(self.step_percent > 0.0) || !self.step_percent.is_finite() {
            return Err(Error::Config(format!(
                "step_percent must be positive, got {}",
                self.step_percent
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }

    /// Curriculum percentile for 1-based `cycle`, capped at 100.
    pub fn percent_at(&self, cycle: usize) -> f64 {
        let r = self.initial_percent + self.step_percent * cycle.saturating_sub(1) as f64;
        r.min(100.0)
    }

    /// Cumulative number of rows a curriculum run should have labeled by the
    /// end of `cycle`, out of an original pool of `pool_size`.
    pub fn cumulative_target(&self, cycle: usize, pool_size: usize) -> usize {
        percent_count(self.percent_at(cycle), pool_size)
    }
}

fn percent_count(percent: f64, n: usize) -> usize {
    // Rounded before ceil so that 20% of 10 is 2, not 3 from 2.0000000000000004.
    let raw = percent / 100.0 * n as f64;
    let snapped = (raw * 1e9).round() / 1e9;
    (snapped.ceil() as usize).min(n)
}

pub(crate) fn score_unchecked(c: f64, gamma: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return c;
    }
    (alpha * gamma + 1.0) * c / (alpha + 1.0)
}

/// `(alpha * gamma + 1) * c / (alpha + 1)`, exactly `c` when `alpha == 0`.
pub fn regularized_score(c: f64, gamma: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::argument(format!("confidence must lie in [0, 1], got {c}")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::argument(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::argument(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    Ok(score_unchecked(c, gamma, alpha))
}

/// One scored prediction. `index` is the row position in the scored pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(skip)]
    pub index: usize,
    pub row_id: RowId,
    pub label: usize,
    pub confidence: f64,
    pub gamma: f64,
    pub score: f64,
}

/// Scores every row of `proba`. The cache, if given, must cover the same rows
/// in the same order.
pub fn score_batch(
    proba: &Probabilities,
    row_ids: &[RowId],
    cache: Option<&LogLikelihoodCache>,
    alpha: f64,
) -> Result<Vec<Candidate>> {
    if proba.n_rows() != row_ids.len() {
        return Err(Error::argument(format!(
            "{} probability rows for {} row ids",
            proba.n_rows(),
            row_ids.len()
        )));
    }
    if let Some(cache) = cache {
        if cache.row_ids() != row_ids {
            return Err(Error::argument("likelihood cache rows do not match the pool"));
        }
        if cache.n_classes() != proba.n_classes() {
            return Err(Error::argument("likelihood cache class count does not match"));
        }
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::argument(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    Ok(row_ids
        .iter()
        .enumerate()
        .map(|(i, &row_id)| {
            let label = proba.argmax(i);
            let confidence = proba.confidence(i).clamp(0.0, 1.0);
            let gamma = cache.map_or(1.0, |c| c.gamma(i, label));
            Candidate {
                index: i,
                row_id,
                label,
                confidence,
                gamma,
                score: score_unchecked(confidence, gamma, alpha),
            }
        })
        .collect())
}

/// Rows with `score >= tau`, in pool order.
pub fn select_fixed_threshold(candidates: &[Candidate], tau: f64) -> Vec<Candidate> {
    candidates.iter().filter(|c| c.score >= tau).copied().collect()
}

/// The `count` highest-scoring rows plus every row tied with the cutoff,
/// ordered by descending score then pool order.
pub fn select_top(candidates: &[Candidate], count: usize) -> Vec<Candidate> {
    if count == 0 || candidates.is_empty() {
        return Vec::new();
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    let cutoff = sorted[count.min(sorted.len()) - 1].score;
    sorted.retain(|c| c.score >= cutoff);
    sorted
}

/// Top `ceil(r_percent / 100 * len)` rows with tie inclusion.
pub fn select_curriculum(candidates: &[Candidate], r_percent: f64) -> Vec<Candidate> {
    select_top(candidates, percent_count(r_percent, candidates.len()))
}

pub fn select_naive(candidates: &[Candidate]) -> Vec<Candidate> {
    candidates.to_vec()
}

/// The pseudo-labels admitted in one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelBatch {
    pub strategy: Strategy,
    pub cycle: usize,
    pub entries: Vec<Candidate>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BatchRecord {
    strategy: Strategy,
    cycle: usize,
    row_id: RowId,
    label: usize,
    confidence: f64,
    gamma: f64,
    score: f64,
}

impl PseudoLabelBatch {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn row_ids(&self) -> Vec<RowId> {
        self.entries.iter().map(|e| e.row_id).collect()
    }
}

/// Writes batches as `strategy,cycle,row_id,label,confidence,gamma,score`.
pub fn write_batches_csv<W: Write>(batches: &[PseudoLabelBatch], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for b in batches {
        for e in &b.entries {
            w.serialize(BatchRecord {
                strategy: b.strategy,
                cycle: b.cycle,
                row_id: e.row_id,
                label: e.label,
                confidence: e.confidence,
                gamma: e.gamma,
                score: e.score,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io("<batch csv>", e))?;
    Ok(())
}

/// Reads batches written by [`write_batches_csv`], grouping consecutive
/// records with the same strategy and cycle.
pub fn read_batches_csv<R: Read>(reader: R) -> Result<Vec<PseudoLabelBatch>> {
    let mut out: Vec<PseudoLabelBatch> = Vec::new();
    for rec in csv::Reader::from_reader(reader).deserialize() {
        let r: BatchRecord = rec?;
        let entry = Candidate {
            index: 0,
            row_id: r.row_id,
            label: r.label,
            confidence: r.confidence,
            gamma: r.gamma,
            score: r.score,
        };
        match out.last_mut() {
            Some(b) if b.strategy == r.strategy && b.cycle == r.cycle => {
                entry_with_index(b, entry);
            }
            _ => {
                let mut b = PseudoLabelBatch {
                    strategy: r.strategy,
                    cycle: r.cycle,
                    entries: Vec::new(),
                };
                entry_with_index(&mut b, entry);
                out.push(b);
            }
        }
    }
    Ok(out)
}

fn entry_with_index(b: &mut PseudoLabelBatch, mut e: Candidate) {
    e.index = b.entries.len();
    b.entries.push(e);
}
