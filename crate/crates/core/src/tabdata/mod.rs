//! Tabular datasets: schema, CSV ingestion, label masking, stratified splits
//! and equal-width digitization of continuous columns.

mod bins;
mod csv_io;
mod split;

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bins::{fit_bin_edges, BinEdges, Discretizer, DEFAULT_BINS};
pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to, ROW_ID_COLUMN};
pub(crate) use split::partition;
pub use split::{
    mask_labels, stratified_allocation, stratified_holdout, stratified_kfold, FoldAssignment,
};

pub type RowId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn continuous(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Categorical,
        }
    }
}

#[derive(Deserialize)]
struct RawSchema {
    columns: Vec<Column>,
    target: String,
    class_names: Vec<String>,
}

/// Ordered feature columns, the label column name and the class vocabulary.
///
/// The schema file is TOML:
///
/// ```toml
/// target = "label"
/// class_names = ["red", "blue"]
///
/// [[columns]]
/// name = "x0"
/// kind = "continuous"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct FeatureSchema {
    columns: Vec<Column>,
    target: String,
    class_names: Vec<String>,
}

impl TryFrom<RawSchema> for FeatureSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        FeatureSchema::new(raw.columns, raw.target, raw.class_names)
    }
}

impl FeatureSchema {
    pub fn new(
        columns: Vec<Column>,
        target: impl Into<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let target = target.into();
        if columns.is_empty() {
            return Err(Error::Schema("no feature columns".into()));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
            if c.name == csv_io::ROW_ID_COLUMN {
                return Err(Error::Schema(format!(
                    "`{}` is reserved for row identities",
                    csv_io::ROW_ID_COLUMN
                )));
            }
        }
        if seen.contains(target.as_str()) {
            return Err(Error::Schema(format!(
                "target `{target}` is also listed as a feature column"
            )));
        }
        if class_names.len() < 2 {
            return Err(Error::Schema(format!(
                "need at least 2 classes, got {}",
                class_names.len()
            )));
        }
        let mut names = HashSet::new();
        for n in &class_names {
            if n.is_empty() {
                return Err(Error::Schema(
                    "empty class name collides with the unlabeled marker".into(),
                ));
            }
            if !names.insert(n.as_str()) {
                return Err(Error::Schema(format!("duplicate class name `{n}`")));
            }
        }
        Ok(FeatureSchema {
            columns,
            target,
            class_names,
        })
    }

    /// Schema with `n` continuous columns named `x0..x{n-1}`.
    pub fn continuous(n: usize, target: &str, class_names: &[&str]) -> Result<Self> {
        FeatureSchema::new(
            (0..n).map(|j| Column::continuous(format!("x{j}"))).collect(),
            target,
            class_names.iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }
}

/// A feature matrix with optional labels and stable row identities.
///
/// Categorical cells hold the symbol index as an `f64`. Rows removed from the
/// labeled set by [`mask_labels`] keep their true label in a hidden field so
/// pseudo-labels can be audited later.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<FeatureSchema>,
    symbols: Arc<Vec<Vec<String>>>,
    values: Vec<f64>,
    labels: Vec<Option<usize>>,
    hidden: Vec<Option<usize>>,
    row_ids: Vec<RowId>,
}

impl Dataset {
    /// Builds a dataset from row vectors. Row ids are `0..n`.
    ///
    /// Categorical symbol tables are synthesized as `"0".."{max}"`.
    pub fn from_rows(
        schema: FeatureSchema,
        rows: &[Vec<f64>],
        labels: Vec<Option<usize>>,
    ) -> Result<Self> {
        let m = schema.n_features();
        let mut values = Vec::with_capacity(rows.len() * m);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(Error::argument(format!(
                    "row {i} has {} values, schema has {m} columns",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        let symbols = schema
            .columns()
            .iter()
            .enumerate()
            .map(|(j, c)| match c.kind {
                ColumnKind::Continuous => Vec::new(),
                ColumnKind::Categorical => {
                    let max = rows.iter().map(|r| r[j]).fold(-1.0, f64::max);
                    (0..=(max.max(0.0) as usize)).map(|v| v.to_string()).collect()
                }
            })
            .collect();
        let n = rows.len();
        Self::from_parts(
            Arc::new(schema),
            Arc::new(symbols),
            values,
            labels,
            vec![None; n],
            (0..n as RowId).collect(),
        )
    }

    pub(crate) fn from_parts(
        schema: Arc<FeatureSchema>,
        symbols: Arc<Vec<Vec<String>>>,
        values: Vec<f64>,
        labels: Vec<Option<usize>>,
        hidden: Vec<Option<usize>>,
        row_ids: Vec<RowId>,
    ) -> Result<Self> {
        let m = schema.n_features();
        let n = row_ids.len();
        if values.len() != n * m || labels.len() != n || hidden.len() != n {
            return Err(Error::argument(format!(
                "inconsistent dataset parts: {n} ids, {} labels, {} values for {m} columns",
                labels.len(),
                values.len()
            )));
        }
        let k = schema.n_classes();
        if let Some(bad) = labels.iter().chain(&hidden).flatten().find(|&&y| y >= k) {
            return Err(Error::argument(format!(
                "label {bad} out of range for {k} classes"
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        if let Some(dup) = row_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::argument(format!("duplicate row id {dup}")));
        }
        for (j, c) in schema.columns().iter().enumerate() {
            if c.kind == ColumnKind::Categorical {
                let card = symbols[j].len() as f64;
                for i in 0..n {
                    let v = values[i * m + j];
                    if v < 0.0 || v >= card || v.fract() != 0.0 {
                        return Err(Error::argument(format!(
                            "categorical column `{}` has invalid symbol index {v} at row {i}",
                            c.name
                        )));
                    }
                }
            }
        }
        Ok(Dataset {
            schema,
            symbols,
            values,
            labels,
            hidden,
            row_ids,
        })
    }

    /// Replaces row identities.
    pub fn with_row_ids(mut self, row_ids: Vec<RowId>) -> Result<Self> {
        if row_ids.len() != self.n_rows() {
            return Err(Error::argument("row id count does not match row count"));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = row_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::argument(format!("duplicate row id {dup}")));
        }
        self.row_ids = row_ids;
        Ok(self)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn n_classes(&self) -> usize {
        self.schema.n_classes()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_features();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_features())
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features() + j]
    }

    /// All values of column `j`, in row order.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.value(i, j)).collect()
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// Labels of a fully labeled dataset, or an argument error naming the
    /// first unlabeled row.
    pub fn required_labels(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, y)| {
                y.ok_or_else(|| {
                    Error::argument(format!("row id {} has no label", self.row_ids[i]))
                })
            })
            .collect()
    }

    /// Ground truth withheld by [`mask_labels`].
    pub fn hidden_label(&self, i: usize) -> Option<usize> {
        self.hidden[i]
    }

    pub fn hidden_labels(&self) -> &[Option<usize>] {
        &self.hidden
    }

    pub fn row_ids(&self) -> &[RowId] {
        &self.row_ids
    }

    /// Symbol table of a categorical column (empty for continuous columns).
    pub fn symbols(&self, j: usize) -> &[String] {
        &self.symbols[j]
    }

    /// Row-major feature values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| self.labels[i].is_some())
            .collect()
    }

    /// Labeled row count per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for y in self.labels.iter().flatten() {
            counts[*y] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let m = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * m);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            schema: Arc::clone(&self.schema),
            symbols: Arc::clone(&self.symbols),
            values,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            hidden: indices.iter().map(|&i| self.hidden[i]).collect(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Appends the rows of `other`. Both must share a schema and symbol tables.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.schema != other.schema || self.symbols != other.symbols {
            return Err(Error::argument("cannot concatenate datasets with different schemas"));
        }
        let mut out = self.clone();
        out.values.extend_from_slice(&other.values);
        out.labels.extend_from_slice(&other.labels);
        out.hidden.extend_from_slice(&other.hidden);
        out.row_ids.extend_from_slice(&other.row_ids);
        let mut seen = HashSet::with_capacity(out.row_ids.len());
        if let Some(dup) = out.row_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::argument(format!("duplicate row id {dup} after concat")));
        }
        Ok(out)
    }

    /// Same rows with replaced labels.
    pub fn with_labels(&self, labels: Vec<Option<usize>>) -> Result<Dataset> {
        if labels.len() != self.n_rows() {
            return Err(Error::argument("label count does not match row count"));
        }
        let k = self.n_classes();
        if labels.iter().flatten().any(|&y| y >= k) {
            return Err(Error::argument("label out of range"));
        }
        let mut out = self.clone();
        out.labels = labels;
        Ok(out)
    }

    /// Moves every visible label into the hidden ground-truth field.
    pub fn hide_labels(&self) -> Dataset {
        let mut out = self.clone();
        for (h, y) in out.hidden.iter_mut().zip(out.labels.iter_mut()) {
            if y.is_some() {
                *h = y.take();
            }
        }
        out
    }
}
