use serde::{Deserialize, Serialize};

use super::{ColumnKind, Dataset};
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

/// Equal-width bin edges for one continuous column.
///
/// `n + 1` ascending edges define `n` bins. A constant column is stored as a
/// single edge and has exactly one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinEdges {
    edges: Vec<f64>,
}

impl BinEdges {
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len().saturating_sub(1).max(1)
    }

    pub fn is_degenerate(&self) -> bool {
        self.edges.len() == 1
    }

    /// Bin index of `value`. Bins are half-open `[e_j, e_{j+1})` except the
    /// last, which is closed. Out-of-range values clip to the end bins and NaN
    /// maps to bin 0.
    pub fn digitize(&self, value: f64) -> usize {
        let n = self.n_bins();
        if self.is_degenerate() || value.is_nan() || value < self.edges[0] {
            return 0;
        }
        if value >= self.edges[n] {
            return n - 1;
        }
        self.edges[..n].partition_point(|&e| e <= value) - 1
    }
}

/// Fits `n_bins` equal-width bins spanning `[min, max]` of `values`.
pub fn fit_bin_edges(values: &[f64], n_bins: usize) -> Result<BinEdges> {
    if values.is_empty() {
        return Err(Error::argument("cannot fit bin edges on an empty column"));
    }
    if n_bins == 0 {
        return Err(Error::argument("n_bins must be at least 1"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::argument("bin edges need finite values"));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi {
        return Ok(BinEdges { edges: vec![lo] });
    }
    let width = (hi - lo) / n_bins as f64;
    let mut edges: Vec<f64> = (0..n_bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    Ok(BinEdges { edges })
}

/// Maps every feature cell of a row to a discrete code: bin index for
/// continuous columns, symbol index for categorical ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    bins: Vec<Option<BinEdges>>,
    cardinality: Vec<usize>,
}

impl Discretizer {
    /// Fits continuous bin edges on the union of `pools`. All pools must share
    /// the first pool's schema.
    pub fn fit(pools: &[&Dataset], n_bins: usize) -> Result<Self> {
        let first = pools
            .first()
            .ok_or_else(|| Error::argument("no data to fit the discretizer on"))?;
        let schema = first.schema();
        if pools.iter().any(|d| d.schema() != schema) {
            return Err(Error::argument("discretizer pools have different schemas"));
        }
        let mut bins = Vec::with_capacity(schema.n_features());
        let mut cardinality = Vec::with_capacity(schema.n_features());
        for (j, col) in schema.columns().iter().enumerate() {
            match col.kind {
                ColumnKind::Continuous => {
                    let values: Vec<f64> = pools.iter().flat_map(|d| d.column(j)).collect();
                    let edges = fit_bin_edges(&values, n_bins)?;
                    cardinality.push(edges.n_bins());
                    bins.push(Some(edges));
                }
                ColumnKind::Categorical => {
                    let card = pools.iter().map(|d| d.symbols(j).len()).max().unwrap_or(0);
                    cardinality.push(card.max(1));
                    bins.push(None);
                }
            }
        }
        Ok(Discretizer { bins, cardinality })
    }

    pub fn n_features(&self) -> usize {
        self.cardinality.len()
    }

    /// Number of distinct codes for feature `j`.
    pub fn cardinality(&self, j: usize) -> usize {
        self.cardinality[j]
    }

    pub fn bin_edges(&self, j: usize) -> Option<&BinEdges> {
        self.bins[j].as_ref()
    }

    pub fn code(&self, j: usize, value: f64) -> usize {
        match &self.bins[j] {
            Some(edges) => edges.digitize(value),
            None => (value.max(0.0) as usize).min(self.cardinality[j] - 1),
        }
    }
}
