use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{accuracy, macro_f1, macro_precision, macro_recall, ClassStats, ConfusionMatrix};
use crate::pseudolabel::PseudoLabelBatch;
use crate::tabdata::{Dataset, RowId};

/// Pseudo-label quality against the hidden ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelAudit {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassStats>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

#[derive(Serialize)]
struct AuditRow<'a> {
    class: &'a str,
    precision: f64,
    recall: f64,
    f1: f64,
    support: u64,
}

impl PseudoLabelAudit {
    pub fn n_labels(&self) -> u64 {
        self.confusion.total()
    }

    /// One row per class plus a `macro` row.
    pub fn write_csv<W: Write>(&self, class_names: &[String], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (name, s) in class_names.iter().zip(&self.per_class) {
            w.serialize(AuditRow {
                class: name,
                precision: s.precision,
                recall: s.recall,
                f1: s.f1,
                support: s.support,
            })?;
        }
        w.serialize(AuditRow {
            class: "macro",
            precision: self.macro_precision,
            recall: self.macro_recall,
            f1: self.macro_f1,
            support: self.n_labels(),
        })?;
        w.flush().map_err(|e| Error::io("<audit csv>", e))?;
        Ok(())
    }
}

/// Every pseudo-label ever emitted in `batches`, scored against the hidden
/// labels of the pool they were drawn from.
pub fn audit_pseudo_labels(batches: &[PseudoLabelBatch], pool: &Dataset) -> Result<PseudoLabelAudit> {
    let truth: HashMap<RowId, usize> = pool
        .row_ids()
        .iter()
        .zip(pool.hidden_labels())
        .filter_map(|(&id, h)| h.map(|y| (id, y)))
        .collect();
    audit_with_truth(batches, &truth, pool.n_classes())
}

pub fn audit_with_truth(
    batches: &[PseudoLabelBatch],
    truth: &HashMap<RowId, usize>,
    n_classes: usize,
) -> Result<PseudoLabelAudit> {
    let mut cm = ConfusionMatrix::new(n_classes);
    for b in batches {
        for e in &b.entries {
            let t = *truth.get(&e.row_id).ok_or_else(|| {
                Error::argument(format!("no hidden ground truth for row {}", e.row_id))
            })?;
            if t >= n_classes || e.label >= n_classes {
                return Err(Error::argument(format!("label out of range for row {}", e.row_id)));
            }
            cm.add(t, e.label);
        }
    }
    Ok(PseudoLabelAudit {
        per_class: cm.per_class(),
        accuracy: accuracy(&cm),
        macro_precision: macro_precision(&cm),
        macro_recall: macro_recall(&cm),
        macro_f1: macro_f1(&cm),
        confusion: cm,
    })
}
