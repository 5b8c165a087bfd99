//! Per-class empirical feature distributions under a feature-independence
//! assumption, and a cache of min-max scaled log-likelihoods for an
//! unlabeled pool.
//!
//! For a row `x` and class `y` the log-likelihood is
//! `sum_{j in selected} ln P(code_j(x_j) | y)`, where continuous features are
//! first digitized into equal-width bins and each table cell is
//! `(count + s) / (n_y + s * V)` with smoothing `s` over `V` codes.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::learners::ClassifierHandle;
use crate::tabdata::{ColumnKind, Dataset, Discretizer, RowId};

pub const DEFAULT_SMOOTHING: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodModel {
    discretizer: Discretizer,
    /// `tables[y][j][code]`
    tables: Vec<Vec<Vec<f64>>>,
    log_tables: Vec<Vec<Vec<f64>>>,
    smoothing: f64,
    selected: Vec<usize>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
    value_labels: Vec<Vec<String>>,
}

/// Counts codes per class and normalizes each (class, feature) table.
pub fn fit_likelihood(
    labeled: &Dataset,
    discretizer: Discretizer,
    smoothing: f64,
    selected: &[usize],
) -> Result<LikelihoodModel> {
    if !(smoothing >= 0.0) || !smoothing.is_finite() {
        return Err(Error::argument(format!(
            "smoothing must be finite and >= 0, got {smoothing}"
        )));
    }
    let m = labeled.n_features();
    if discretizer.n_features() != m {
        return Err(Error::argument("discretizer does not match the dataset width"));
    }
    let mut selected = selected.to_vec();
    selected.sort_unstable();
    selected.dedup();
    if selected.is_empty() {
        return Err(Error::argument("no features selected for the likelihood"));
    }
    if let Some(&j) = selected.iter().find(|&&j| j >= m) {
        return Err(Error::argument(format!("selected feature {j} out of range")));
    }
    let y = labeled.required_labels()?;
    let k = labeled.n_classes();
    let class_counts = labeled.class_counts();
    if let Some(c) = class_counts.iter().position(|&n| n == 0) {
        return Err(Error::argument(format!(
            "class `{}` has no labeled rows",
            labeled.schema().class_names()[c]
        )));
    }

    let mut counts: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|_| (0..m).map(|j| vec![0.0; discretizer.cardinality(j)]).collect())
        .collect();
    for (i, &yi) in y.iter().enumerate() {
        for (j, &v) in labeled.row(i).iter().enumerate() {
            counts[yi][j][discretizer.code(j, v)] += 1.0;
        }
    }
    let tables: Vec<Vec<Vec<f64>>> = counts
        .into_iter()
        .enumerate()
        .map(|(c, per_feature)| {
            per_feature
                .into_iter()
                .map(|cells| {
                    let denom = class_counts[c] as f64 + smoothing * cells.len() as f64;
                    cells.into_iter().map(|n| (n + smoothing) / denom).collect()
                })
                .collect()
        })
        .collect();
    let log_tables = tables
        .iter()
        .map(|pf: &Vec<Vec<f64>>| pf.iter().map(|t| t.iter().map(|p| p.ln()).collect()).collect())
        .collect();

    let schema = labeled.schema();
    let value_labels = schema
        .columns()
        .iter()
        .enumerate()
        .map(|(j, col)| match (col.kind, discretizer.bin_edges(j)) {
            (ColumnKind::Continuous, Some(edges)) if !edges.is_degenerate() => {
                let e = edges.edges();
                (0..edges.n_bins())
                    .map(|b| {
                        let close = if b + 1 == edges.n_bins() { ']' } else { ')' };
                        format!("[{}, {}{close}", e[b], e[b + 1])
                    })
                    .collect()
            }
            (ColumnKind::Continuous, Some(edges)) => vec![format!("[{0}, {0}]", edges.edges()[0])],
            _ => {
                let syms = labeled.symbols(j);
                (0..discretizer.cardinality(j))
                    .map(|c| syms.get(c).cloned().unwrap_or_else(|| c.to_string()))
                    .collect()
            }
        })
        .collect();

    Ok(LikelihoodModel {
        discretizer,
        tables,
        log_tables,
        smoothing,
        selected,
        class_names: schema.class_names().to_vec(),
        feature_names: schema.columns().iter().map(|c| c.name.clone()).collect(),
        value_labels,
    })
}

#[derive(Serialize)]
struct ValueDump<'a> {
    value: &'a str,
    probability: f64,
}

#[derive(Serialize)]
struct FeatureDump<'a> {
    feature: &'a str,
    selected: bool,
    values: Vec<ValueDump<'a>>,
}

#[derive(Serialize)]
struct ClassDump<'a> {
    class: &'a str,
    features: Vec<FeatureDump<'a>>,
}

impl LikelihoodModel {
    pub fn n_classes(&self) -> usize {
        self.tables.len()
    }

    pub fn selected_features(&self) -> &[usize] {
        &self.selected
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn discretizer(&self) -> &Discretizer {
        &self.discretizer
    }

    /// `P(code | class)` for feature `j`.
    pub fn probability(&self, class: usize, j: usize, code: usize) -> f64 {
        self.tables[class][j][code]
    }

    pub fn table(&self, class: usize, j: usize) -> &[f64] {
        &self.tables[class][j]
    }

    /// Sum of per-feature log-probabilities over the selected features.
    ///
    /// With zero smoothing an unseen code has probability 0 and the result is
    /// `f64::NEG_INFINITY`; callers should check `is_finite`.
    pub fn log_likelihood(&self, x: &[f64], class: usize) -> f64 {
        let logs = &self.log_tables[class];
        self.selected
            .iter()
            .map(|&j| logs[j][self.discretizer.code(j, x[j])])
            .sum()
    }

    /// Tables as JSON: class -> feature -> value -> probability.
    pub fn tables_json(&self) -> Result<String> {
        let dump: Vec<ClassDump> = self
            .tables
            .iter()
            .enumerate()
            .map(|(c, per_feature)| ClassDump {
                class: &self.class_names[c],
                features: per_feature
                    .iter()
                    .enumerate()
                    .map(|(j, t)| FeatureDump {
                        feature: &self.feature_names[j],
                        selected: self.selected.binary_search(&j).is_ok(),
                        values: t
                            .iter()
                            .zip(&self.value_labels[j])
                            .map(|(&probability, value)| ValueDump { value, probability })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&dump)?)
    }

    pub fn write_tables(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.tables_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Raw and min-max scaled log-likelihoods for every (row, class) of a pool.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikelihoodCache {
    n_classes: usize,
    row_ids: Vec<RowId>,
    raw: Vec<f64>,
    scaled: Vec<f64>,
}

/// Evaluates the model on every row and class of `unlabeled` once.
pub fn build_cache(model: &LikelihoodModel, unlabeled: &Dataset) -> LogLikelihoodCache {
    let k = model.n_classes();
    let mut raw = Vec::with_capacity(unlabeled.n_rows() * k);
    for x in unlabeled.rows() {
        raw.extend((0..k).map(|c| model.log_likelihood(x, c)));
    }
    LogLikelihoodCache::from_raw(k, unlabeled.row_ids().to_vec(), raw)
}

/// Min-max scales over the finite values. Non-finite values scale to 0; a
/// constant population scales to 1.
fn min_max(raw: &[f64]) -> Vec<f64> {
    let (lo, hi) = raw
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    raw.iter()
        .map(|&v| {
            if !v.is_finite() {
                0.0
            } else if hi > lo {
                ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                1.0
            }
        })
        .collect()
}

impl LogLikelihoodCache {
    pub fn from_raw(n_classes: usize, row_ids: Vec<RowId>, raw: Vec<f64>) -> Self {
        assert_eq!(raw.len(), row_ids.len() * n_classes);
        let scaled = min_max(&raw);
        LogLikelihoodCache {
            n_classes,
            row_ids,
            raw,
            scaled,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row_ids(&self) -> &[RowId] {
        &self.row_ids
    }

    pub fn raw(&self, row: usize, class: usize) -> f64 {
        self.raw[row * self.n_classes + class]
    }

    /// Scaled log-likelihood in `[0, 1]`.
    pub fn gamma(&self, row: usize, class: usize) -> f64 {
        self.scaled[row * self.n_classes + class]
    }

    /// Cache over a subset of rows, rescaled over that subset only.
    pub fn restrict(&self, rows: &[usize]) -> LogLikelihoodCache {
        let k = self.n_classes;
        let raw = rows
            .iter()
            .flat_map(|&r| self.raw[r * k..(r + 1) * k].iter().copied())
            .collect();
        LogLikelihoodCache::from_raw(k, rows.iter().map(|&r| self.row_ids[r]).collect(), raw)
    }
}

/// Picks the `k` most important features of a trained learner, ties broken
/// by lower index, returned in ascending index order.
///
/// Falls back to every feature when the learner has no importances.
pub fn select_features(labeled: &Dataset, learner: &ClassifierHandle, k: usize) -> Vec<usize> {
    let m = labeled.n_features();
    let Some(imp) = learner.feature_importances().filter(|v| v.len() == m) else {
        log::warn!("learner exposes no feature importances; using all {m} features");
        return (0..m).collect();
    };
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
    order.truncate(k.clamp(1, m));
    order.sort_unstable();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabdata::{Column, FeatureSchema};

    fn categorical(rows: &[Vec<f64>], labels: &[usize], n_features: usize) -> Dataset {
        let schema = FeatureSchema::new(
            (0..n_features).map(|j| Column::categorical(format!("f{j}"))).collect(),
            "y",
            vec!["A".into(), "B".into()],
        )
        .unwrap();
        Dataset::from_rows(schema, rows, labels.iter().map(|&y| Some(y)).collect()).unwrap()
    }

    #[test]
    fn smoothed_counts_match_hand_calculation() {
        // Class A: {0, 0, 1}; class B: {1}.
        let d = categorical(&[vec![0.0], vec![0.0], vec![1.0], vec![1.0]], &[0, 0, 0, 1], 1);
        let disc = Discretizer::fit(&[&d], 10).unwrap();
        let model = fit_likelihood(&d, disc, 1.0, &[0]).unwrap();
        assert!((model.probability(0, 0, 0) - 3.0 / 5.0).abs() < 1e-15);
        assert!((model.probability(0, 0, 1) - 2.0 / 5.0).abs() < 1e-15);
        assert!((model.log_likelihood(&[0.0], 0) - 0.6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn unsmoothed_unseen_value_is_neg_infinity() {
        let d = categorical(&[vec![0.0], vec![0.0], vec![1.0]], &[0, 0, 1], 1);
        let disc = Discretizer::fit(&[&d], 10).unwrap();
        let model = fit_likelihood(&d, disc, 0.0, &[0]).unwrap();
        assert_eq!(model.probability(0, 0, 0), 1.0);
        assert_eq!(model.probability(0, 0, 1), 0.0);
        assert_eq!(model.log_likelihood(&[1.0], 0), f64::NEG_INFINITY);
    }

    #[test]
    fn tables_normalize() {
        let rows = vec![vec![0.0, 2.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 2.0]];
        let d = categorical(&rows, &[0, 0, 1, 1], 2);
        let disc = Discretizer::fit(&[&d], 10).unwrap();
        let model = fit_likelihood(&d, disc, 0.5, &[0, 1]).unwrap();
        for c in 0..2 {
            for j in 0..2 {
                let s: f64 = model.table(c, j).iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn two_half_features_give_quarter() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let d = categorical(&rows, &[0, 0, 1, 1], 2);
        let disc = Discretizer::fit(&[&d], 10).unwrap();
        let model = fit_likelihood(&d, disc, 0.0, &[0, 1]).unwrap();
        assert!((model.log_likelihood(&[0.0, 1.0], 0) - 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn restriction_ignores_other_features() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let d = categorical(&rows, &[0, 0, 0, 1], 2);
        let disc = Discretizer::fit(&[&d], 10).unwrap();
        let model = fit_likelihood(&d, disc, 1.0, &[1]).unwrap();
        assert_eq!(
            model.log_likelihood(&[0.0, 1.0], 0),
            model.log_likelihood(&[1.0, 1.0], 0)
        );
    }

    #[test]
    fn missing_class_rejected() {
        let d = categorical(&[vec![0.0], vec![1.0]], &[0, 0], 1);
        let disc = Discretizer::fit(&[&d], 10).unwrap();
        assert!(fit_likelihood(&d, disc, 1.0, &[0]).is_err());
    }

    #[test]
    fn min_max_examples() {
        let c = LogLikelihoodCache::from_raw(1, vec![0, 1, 2], vec![-2.0, -4.0, -6.0]);
        assert_eq!((c.gamma(0, 0), c.gamma(1, 0), c.gamma(2, 0)), (1.0, 0.5, 0.0));
        let flat = LogLikelihoodCache::from_raw(2, vec![0], vec![-3.0, -3.0]);
        assert_eq!((flat.gamma(0, 0), flat.gamma(0, 1)), (1.0, 1.0));
        let inf = LogLikelihoodCache::from_raw(1, vec![0, 1, 2], vec![-1.0, f64::NEG_INFINITY, -2.0]);
        assert_eq!((inf.gamma(0, 0), inf.gamma(1, 0), inf.gamma(2, 0)), (1.0, 0.0, 0.0));
    }

    #[test]
    fn restrict_rescales_subset() {
        let c = LogLikelihoodCache::from_raw(1, vec![10, 11, 12], vec![-2.0, -4.0, -6.0]);
        let r = c.restrict(&[1, 2]);
        assert_eq!(r.row_ids(), &[11, 12]);
        assert_eq!((r.gamma(0, 0), r.gamma(1, 0)), (1.0, 0.0));
    }

    #[test]
    fn table_dump_lists_every_class() {
        let d = categorical(&[vec![0.0], vec![1.0]], &[0, 1], 1);
        let disc = Discretizer::fit(&[&d], 10).unwrap();
        let model = fit_likelihood(&d, disc, 1.0, &[0]).unwrap();
        let json: serde_json::Value = serde_json::from_str(&model.tables_json().unwrap()).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 2);
        assert_eq!(json[0]["class"], "A");
        assert_eq!(json[0]["features"][0]["values"][0]["probability"], 2.0 / 3.0);
    }
}
