use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{write_atomic, ExperimentConfig, ExperimentReport, Method, UnitOutput};
use crate::error::{Error, Result};
use crate::pseudolabel::{Candidate, PseudoLabelBatch};
use crate::selftrain::{audit_with_truth, PseudoLabelAudit};
use crate::tabdata::{Dataset, FeatureSchema, RowId};

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSummary {
    pub method: Method,
    pub fold: usize,
    pub score: Option<f64>,
    pub alpha: Option<f64>,
    pub cycles: usize,
    pub best_cycle: usize,
    pub initial_pm: Option<f64>,
    pub best_pm: Option<f64>,
    pub pseudo_labels: usize,
    pub pseudo_macro_f1: Option<f64>,
    pub error: Option<String>,
}

impl UnitSummary {
    pub fn new(method: Method, fold: usize, res: &std::result::Result<UnitOutput, String>) -> Self {
        match res {
            Ok(o) => UnitSummary {
                method,
                fold,
                score: Some(o.score),
                alpha: o.alpha,
                cycles: o.trace.len(),
                best_cycle: o.best_cycle,
                initial_pm: Some(o.initial_pm),
                best_pm: Some(o.best_pm),
                pseudo_labels: o.batches.iter().map(PseudoLabelBatch::len).sum(),
                pseudo_macro_f1: o.audit.as_ref().map(|a| a.macro_f1),
                error: None,
            },
            Err(e) => UnitSummary {
                method,
                fold,
                score: None,
                alpha: None,
                cycles: 0,
                best_cycle: 0,
                initial_pm: None,
                best_pm: None,
                pseudo_labels: 0,
                pseudo_macro_f1: None,
                error: Some(e.clone()),
            },
        }
    }
}

#[derive(Serialize)]
struct TraceRow {
    method: Method,
    fold: usize,
    cycle: usize,
    batch_size: usize,
    cumulative: usize,
    pm: f64,
    seconds: f64,
    fit_id: u64,
}

#[derive(Serialize)]
struct AuditRow<'a> {
    method: Method,
    fold: usize,
    class: &'a str,
    precision: f64,
    recall: f64,
    f1: f64,
    support: u64,
}

/// One pseudo-label with its hidden truth, as written to `pseudo_labels.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelRow {
    pub method: Method,
    pub fold: usize,
    pub cycle: usize,
    pub row_id: RowId,
    pub label: String,
    pub truth: Option<String>,
    pub confidence: f64,
    pub gamma: f64,
    pub score: f64,
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::argument(e.to_string()))
}

fn audit_rows<'a>(
    method: Method,
    fold: usize,
    audit: &'a PseudoLabelAudit,
    class_names: &'a [String],
) -> impl Iterator<Item = AuditRow<'a>> {
    class_names
        .iter()
        .zip(&audit.per_class)
        .map(move |(name, s)| AuditRow {
            method,
            fold,
            class: name,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
            support: s.support,
        })
        .chain(std::iter::once(AuditRow {
            method,
            fold,
            class: "macro",
            precision: audit.macro_precision,
            recall: audit.macro_recall,
            f1: audit.macro_f1,
            support: audit.n_labels(),
        }))
}

pub(super) fn write_report(config: &ExperimentConfig, data: &Dataset, report: &ExperimentReport) -> Result<()> {
    let dir = &config.output;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let class_names = data.schema().class_names();
    let truth: HashMap<RowId, Option<usize>> = data
        .row_ids()
        .iter()
        .zip(data.labels())
        .map(|(&id, &y)| (id, y))
        .collect();

    let mut scores = Vec::new();
    report.scores.write_csv(&mut scores)?;
    write_atomic(&dir.join("scores.csv"), &scores)?;

    let mut ranks_csv = Vec::new();
    let ranks_txt = match &report.ranks {
        Some(r) => {
            r.write_csv(&mut ranks_csv)?;
            let excluded: Vec<&str> = report
                .scores
                .methods
                .iter()
                .filter(|m| !r.methods.contains(m))
                .map(String::as_str)
                .collect();
            let mut txt = r.render_text();
            if !excluded.is_empty() {
                txt.push_str(&format!("excluded (failed folds): {}\n", excluded.join(", ")));
            }
            txt
        }
        None => "no method completed every fold\n".to_string(),
    };
    write_atomic(&dir.join("ranks.csv"), &ranks_csv)?;
    write_atomic(&dir.join("ranks.txt"), ranks_txt.as_bytes())?;

    let mut trace = Vec::new();
    let mut audit = Vec::new();
    let mut labels = Vec::new();
    for (method, fold, res) in &report.outputs {
        let Ok(out) = res else { continue };
        trace.extend(out.trace.records.iter().map(|r| TraceRow {
            method: *method,
            fold: *fold,
            cycle: r.cycle,
            batch_size: r.batch_size,
            cumulative: r.cumulative,
            pm: r.pm,
            seconds: r.seconds,
            fit_id: r.fit_id,
        }));
        if let Some(a) = out.audit.as_ref().filter(|a| a.n_labels() > 0) {
            audit.extend(audit_rows(*method, *fold, a, class_names));
        }
        for b in &out.batches {
            labels.extend(b.entries.iter().map(|e| PseudoLabelRow {
                method: *method,
                fold: *fold,
                cycle: b.cycle,
                row_id: e.row_id,
                label: class_names[e.label].clone(),
                truth: truth.get(&e.row_id).copied().flatten().map(|y| class_names[y].clone()),
                confidence: e.confidence,
                gamma: e.gamma,
                score: e.score,
            }));
        }
    }
    write_atomic(&dir.join("trace.csv"), &csv_bytes(trace)?)?;
    write_atomic(&dir.join("audit.csv"), &csv_bytes(audit)?)?;
    write_atomic(&dir.join("pseudo_labels.csv"), &csv_bytes(labels)?)?;
    write_atomic(&dir.join("summary.csv"), &csv_bytes(&report.units)?)?;
    write_atomic(&dir.join("schema.toml"), data.schema().to_toml_string().as_bytes())?;
    write_atomic(&dir.join("config.toml"), config.to_toml_string()?.as_bytes())?;
    Ok(())
}

pub fn read_pseudo_labels<R: Read>(reader: R) -> Result<Vec<PseudoLabelRow>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Rebuilds per-(method, fold) audits from `pseudo_labels.csv` rows.
pub fn audit_from_pseudo_labels(
    rows: &[PseudoLabelRow],
    schema: &FeatureSchema,
) -> Result<Vec<(Method, usize, PseudoLabelAudit)>> {
    let class = |name: &str| {
        schema
            .class_index(name)
            .ok_or_else(|| Error::argument(format!("unknown class `{name}`")))
    };
    // Groups keep file order so the output matches the run's audit.csv.
    let mut groups: Vec<(Method, usize, Vec<PseudoLabelRow>)> = Vec::new();
    let mut slot: HashMap<(Method, usize), usize> = HashMap::new();
    for r in rows {
        let i = *slot.entry((r.method, r.fold)).or_insert_with(|| {
            groups.push((r.method, r.fold, Vec::new()));
            groups.len() - 1
        });
        groups[i].2.push(r.clone());
    }
    let mut out = Vec::new();
    for (method, fold, rows) in groups {
        let mut truth = HashMap::new();
        let mut entries = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            let t = r.truth.as_deref().ok_or_else(|| {
                Error::argument(format!("row {} has no ground truth", r.row_id))
            })?;
            // A row relabeled in a later cycle keeps a single truth.
            truth.insert(r.row_id, class(t)?);
            entries.push(Candidate {
                index: i,
                row_id: r.row_id,
                label: class(&r.label)?,
                confidence: r.confidence,
                gamma: r.gamma,
                score: r.score,
            });
        }
        let batch = PseudoLabelBatch {
            strategy: method.strategy().ok_or_else(|| {
                Error::argument("supervised rows cannot carry pseudo-labels")
            })?,
            cycle: 0,
            entries,
        };
        out.push((method, fold, audit_with_truth(&[batch], &truth, schema.n_classes())?));
    }
    Ok(out)
}

/// `audit.csv` content for audits rebuilt by [`audit_from_pseudo_labels`].
pub fn audit_csv(audits: &[(Method, usize, PseudoLabelAudit)], schema: &FeatureSchema) -> Result<Vec<u8>> {
    csv_bytes(
        audits
            .iter()
            .flat_map(|(m, f, a)| audit_rows(*m, *f, a, schema.class_names())),
    )
}
