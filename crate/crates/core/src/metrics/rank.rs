use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Methods x columns score table. Missing cells are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub methods: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(methods: Vec<String>, columns: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != methods.len() || values.iter().any(|r| r.len() != columns.len()) {
            return Err(Error::argument("score matrix shape does not match its labels"));
        }
        Ok(ScoreMatrix {
            methods,
            columns,
            values,
        })
    }

    /// CSV with a `method` column followed by one column per score column.
    /// Missing cells are written empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["method".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (m, row) in self.methods.iter().zip(&self.values) {
            let mut rec = vec![m.clone()];
            rec.extend(row.iter().map(|v| {
                if v.is_nan() {
                    String::new()
                } else {
                    format!("{v}")
                }
            }));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Parses a score CSV as written by [`ScoreMatrix::write_csv`].
pub fn read_score_matrix<R: Read>(reader: R) -> Result<ScoreMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Err(Error::Schema("score CSV has no header".into()));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut methods = Vec::new();
    let mut values = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        methods.push(rec.get(0).unwrap_or("").to_string());
        let row = (1..header.len())
            .map(|c| {
                let cell = rec.get(c).unwrap_or("");
                if cell.is_empty() {
                    Ok(f64::NAN)
                } else {
                    cell.parse::<f64>().map_err(|_| Error::Parse {
                        row: r + 1,
                        column: header[c].to_string(),
                        message: format!("`{cell}` is not a number"),
                    })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    ScoreMatrix::new(methods, columns, values)
}

/// How tied scores share rank positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    /// Tied entries get the mean of the positions they occupy (1, 2.5, 2.5, 4).
    #[default]
    Mean,
    /// Tied entries all get the best position they occupy (1, 2, 2, 4).
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    pub columns: Vec<String>,
    /// `ranks[m][c]`, 1 = best.
    pub ranks: Vec<Vec<f64>>,
    /// Unrounded mean rank per method.
    pub averages: Vec<f64>,
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

impl RankTable {
    /// Average rank rounded to one decimal, as displayed.
    pub fn display_average(&self, m: usize) -> f64 {
        round1(self.averages[m])
    }

    pub fn render_text(&self) -> String {
        let name_w = self
            .methods
            .iter()
            .map(String::len)
            .chain(["method".len()])
            .max()
            .unwrap_or(6);
        let col_w: Vec<usize> = self.columns.iter().map(|c| c.len().max(4)).collect();
        let mut out = String::new();
        let _ = write!(out, "{:<name_w$}", "method");
        for (c, w) in self.columns.iter().zip(&col_w) {
            let _ = write!(out, "  {c:>w$}");
        }
        let _ = writeln!(out, "  {:>4}", "avg");
        for (m, name) in self.methods.iter().enumerate() {
            let _ = write!(out, "{name:<name_w$}");
            for (r, w) in self.ranks[m].iter().zip(&col_w) {
                let _ = write!(out, "  {:>w$.1}", round1(*r));
            }
            let _ = writeln!(out, "  {:>4.1}", self.display_average(m));
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["method".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("average".into());
        w.write_record(&header)?;
        for (m, name) in self.methods.iter().enumerate() {
            let mut rec = vec![name.clone()];
            rec.extend(self.ranks[m].iter().map(|r| format!("{r}")));
            rec.push(format!("{}", self.averages[m]));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

pub fn rank_aggregate(scores: &ScoreMatrix, higher_is_better: bool) -> Result<RankTable> {
    rank_aggregate_with(scores, higher_is_better, TieRule::Mean)
}

/// Ranks methods within each column and averages each method's ranks.
pub fn rank_aggregate_with(
    scores: &ScoreMatrix,
    higher_is_better: bool,
    ties: TieRule,
) -> Result<RankTable> {
    let n_methods = scores.methods.len();
    let n_cols = scores.columns.len();
    if n_methods == 0 || n_cols == 0 {
        return Err(Error::argument("rank aggregation needs at least one method and column"));
    }
    for (m, row) in scores.values.iter().enumerate() {
        if let Some(c) = row.iter().position(|v| v.is_nan()) {
            return Err(Error::argument(format!(
                "missing score for method `{}` in column `{}`",
                scores.methods[m], scores.columns[c]
            )));
        }
    }
    let mut ranks = vec![vec![0.0; n_cols]; n_methods];
    for c in 0..n_cols {
        let mut order: Vec<usize> = (0..n_methods).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (scores.values[a][c], scores.values[b][c]);
            if higher_is_better {
                y.total_cmp(&x)
            } else {
                x.total_cmp(&y)
            }
        });
        let mut start = 0;
        while start < n_methods {
            let v = scores.values[order[start]][c];
            let mut end = start + 1;
            while end < n_methods && scores.values[order[end]][c] == v {
                end += 1;
            }
            // Positions start+1 ..= end share a value.
            let r = match ties {
                TieRule::Mean => (start + 1 + end) as f64 / 2.0,
                TieRule::Min => (start + 1) as f64,
            };
            for &m in &order[start..end] {
                ranks[m][c] = r;
            }
            start = end;
        }
    }
    let averages = ranks
        .iter()
        .map(|r| r.iter().sum::<f64>() / n_cols as f64)
        .collect();
    Ok(RankTable {
        methods: scores.methods.clone(),
        columns: scores.columns.clone(),
        ranks,
        averages,
    })
}
