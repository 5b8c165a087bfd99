use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{ColumnKind, Dataset, FeatureSchema, RowId};
use crate::error::{Error, Result};

/// Optional leading column carrying stable row identities.
pub const ROW_ID_COLUMN: &str = "row_id";

pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Parses a CSV with a header row. An empty label cell marks an unlabeled row.
/// Without a `row_id` column, rows are numbered from 0 in file order.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let index: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h, i)).collect();

    let lookup = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("missing column `{name}` in CSV header")))
    };
    let feature_pos: Vec<usize> = schema
        .columns()
        .iter()
        .map(|c| lookup(&c.name))
        .collect::<Result<_>>()?;
    let target_pos = lookup(schema.target())?;
    let id_pos = index.get(ROW_ID_COLUMN).copied();
    let expected = schema.n_features() + 1 + usize::from(id_pos.is_some());
    if header.len() != expected {
        let known: Vec<&str> = schema
            .columns()
            .iter()
            .map(|c| c.name.as_str())
            .chain([schema.target(), ROW_ID_COLUMN])
            .collect();
        let extra: Vec<&str> = header.iter().filter(|h| !known.contains(h)).collect();
        return Err(Error::Schema(format!(
            "unexpected CSV columns: {}",
            extra.join(", ")
        )));
    }

    let m = schema.n_features();
    let mut symbols: Vec<Vec<String>> = vec![Vec::new(); m];
    let mut interned: Vec<HashMap<String, usize>> = vec![HashMap::new(); m];
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut row_ids = Vec::new();

    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let parse_err = |column: &str, message: String| Error::Parse {
            row,
            column: column.to_string(),
            message,
        };
        for (j, col) in schema.columns().iter().enumerate() {
            let cell = record.get(feature_pos[j]).unwrap_or("");
            if cell.is_empty() {
                return Err(parse_err(&col.name, "missing feature value".into()));
            }
            let v = match col.kind {
                ColumnKind::Continuous => cell
                    .parse::<f64>()
                    .map_err(|_| parse_err(&col.name, format!("`{cell}` is not a number")))?,
                ColumnKind::Categorical => {
                    let next = symbols[j].len();
                    let idx = *interned[j].entry(cell.to_string()).or_insert_with(|| {
                        symbols[j].push(cell.to_string());
                        next
                    });
                    idx as f64
                }
            };
            if !v.is_finite() {
                return Err(parse_err(&col.name, format!("`{cell}` is not finite")));
            }
            values.push(v);
        }
        let label_cell = record.get(target_pos).unwrap_or("");
        labels.push(if label_cell.is_empty() {
            None
        } else {
            Some(schema.class_index(label_cell).ok_or_else(|| {
                parse_err(schema.target(), format!("unknown class `{label_cell}`"))
            })?)
        });
        row_ids.push(match id_pos {
            Some(p) => {
                let cell = record.get(p).unwrap_or("");
                cell.parse::<RowId>()
                    .map_err(|_| parse_err(ROW_ID_COLUMN, format!("`{cell}` is not a row id")))?
            }
            None => r as RowId,
        });
    }

    let n = row_ids.len();
    Dataset::from_parts(
        Arc::new(schema.clone()),
        Arc::new(symbols),
        values,
        labels,
        vec![None; n],
        row_ids,
    )
}

pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(d, file)
}

/// Writes `row_id`, the feature columns in schema order, then the label.
pub fn write_csv_to<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let schema = d.schema();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![ROW_ID_COLUMN.to_string()];
    header.extend(schema.columns().iter().map(|c| c.name.clone()));
    header.push(schema.target().to_string());
    w.write_record(&header)?;
    for i in 0..d.n_rows() {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(d.row_ids()[i].to_string());
        for (j, col) in schema.columns().iter().enumerate() {
            let v = d.value(i, j);
            rec.push(match col.kind {
                ColumnKind::Continuous => format!("{v}"),
                ColumnKind::Categorical => d.symbols(j)[v as usize].clone(),
            });
        }
        rec.push(
            d.label(i)
                .map(|y| schema.class_names()[y].clone())
                .unwrap_or_default(),
        );
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
