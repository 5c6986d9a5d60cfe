//! File formats: the individual-level dataset CSV, the counterfactual side
//! table of a simulated world, estimate reports and Monte Carlo reports.
//!
//! Dataset files have the header `cluster_id,arm,participation,outcome`
//! with an optional trailing `stratum_label` column, one row per person,
//! `0`/`1` codes and LF line endings. Clusters keep the order in which they
//! first appear.
//!
//! Report numbers are proportions internally. Scaling to cases per 1000
//! happens here, on output, and only for risk differences.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::causal::PotentialWorld;
use crate::estimators::{Contrast, EffectEstimate, EffectKind, EstimationError};
use crate::mc::{McReport, McRow};
use crate::model::{Arm, ClusterId, ClusterRecord, IndividualRecord, ModelError, TrialDataset};

pub const DATASET_HEADER: [&str; 4] = ["cluster_id", "arm", "participation", "outcome"];
pub const STRATUM_COLUMN: &str = "stratum_label";
pub const COUNTERFACTUAL_HEADER: [&str; 5] =
    ["cluster_id", "stratum_label", "participation", "outcome_a1", "outcome_a0"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("row {row}: {reason}")]
    Row { row: u64, reason: String },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("dataset has no rows")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn bit(field: &str, name: &str, row: u64) -> Result<bool, IoError> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(IoError::Row { row, reason: format!("{name} must be 0 or 1, got `{other}`") }),
    }
}

/// Parses a dataset file. Row numbers in errors count the header as row 1.
pub fn read_dataset<R: Read>(reader: R) -> Result<TrialDataset, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    let with_label = names.len() == 5 && names[4] == STRATUM_COLUMN;
    if names[..names.len().min(4)] != DATASET_HEADER || !(names.len() == 4 || with_label) {
        return Err(IoError::Header {
            expected: format!("{}[,{STRATUM_COLUMN}]", DATASET_HEADER.join(",")),
            found: names.join(","),
        });
    }

    struct Building {
        arm: Arm,
        label: Option<String>,
        individuals: Vec<IndividualRecord>,
    }
    let mut order: Vec<ClusterId> = Vec::new();
    let mut clusters: HashMap<ClusterId, Building> = HashMap::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k as u64 + 2;
        let record = record.map_err(|e| IoError::Row { row, reason: e.to_string() })?;
        let id = record[0].trim();
        if id.is_empty() {
            return Err(IoError::Row { row, reason: "empty cluster_id".into() });
        }
        let arm = if bit(&record[1], "arm", row)? { Arm::Vaccine } else { Arm::Control };
        let person =
            IndividualRecord::new(bit(&record[2], "participation", row)?, bit(&record[3], "outcome", row)?);
        let label = if with_label { Some(record[4].to_owned()).filter(|s| !s.is_empty()) } else { None };
        let id = ClusterId::new(id);
        match clusters.get_mut(&id) {
            Some(b) => {
                if b.arm != arm {
                    return Err(IoError::Row { row, reason: format!("arm changes within cluster {id}") });
                }
                if b.label != label {
                    return Err(IoError::Row {
                        row,
                        reason: format!("stratum_label changes within cluster {id}"),
                    });
                }
                b.individuals.push(person);
            }
            None => {
                order.push(id.clone());
                clusters.insert(id, Building { arm, label, individuals: vec![person] });
            }
        }
    }
    if order.is_empty() {
        return Err(IoError::Empty);
    }
    let records = order
        .into_iter()
        .map(|id| {
            let b = clusters.remove(&id).expect("inserted above");
            ClusterRecord::new(id, b.arm, b.label, b.individuals)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrialDataset::new(records)?)
}

/// Writes a dataset file. The label column is present iff some cluster has a
/// stratum label.
pub fn write_dataset<W: Write>(dataset: &TrialDataset, writer: W) -> Result<(), IoError> {
    let with_label = dataset.clusters().iter().any(|c| c.stratum_label().is_some());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header = DATASET_HEADER.to_vec();
    if with_label {
        header.push(STRATUM_COLUMN);
    }
    w.write_record(&header)?;
    let b = |x: bool| if x { "1" } else { "0" };
    for c in dataset.clusters() {
        let arm = c.arm().bit().to_string();
        for p in c.individuals() {
            let mut row = vec![c.id().as_str(), &arm, b(p.participation), b(p.outcome)];
            if with_label {
                row.push(c.stratum_label().unwrap_or(""));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn dataset_to_bytes(dataset: &TrialDataset) -> Vec<u8> {
    let mut buf = Vec::new();
    write_dataset(dataset, &mut buf).expect("writing to memory cannot fail");
    buf
}

/// Both potential outcome columns of every individual, in world order.
pub fn write_counterfactuals<W: Write>(world: &PotentialWorld, writer: W) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(COUNTERFACTUAL_HEADER)?;
    let b = |x: bool| if x { "1" } else { "0" };
    for c in world.clusters() {
        let label = c.stratum_label.as_deref().unwrap_or("");
        for p in &c.individuals {
            w.write_record([
                c.id.as_str(),
                label,
                b(p.participation),
                b(p.outcome_if_vaccine),
                b(p.outcome_if_control),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    #[serde(rename = "per1000")]
    Per1000,
    Raw,
}

impl Scale {
    pub fn factor(self) -> f64 {
        match self {
            Scale::Per1000 => 1000.0,
            Scale::Raw => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Ok,
    Error,
}

/// One requested effect in a report. On failure only `kind`, `status` and
/// `error` are set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportEntry {
    pub kind: EffectKind,
    pub status: EntryStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast: Option<Contrast>,
    /// `per1000` or `raw` for the numbers below; risk ratios are always raw.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<f64>,
    /// Risk differences: same scale as `point`. Risk ratios: log scale.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_treated_clusters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_control_clusters: Option<usize>,
    pub dropped_clusters: Vec<ClusterId>,
    pub warnings: Vec<String>,
}

impl ReportEntry {
    pub fn new(kind: EffectKind, result: &Result<EffectEstimate, EstimationError>, scale: Scale) -> Self {
        match result {
            Ok(e) => {
                let scale = match e.contrast {
                    Contrast::RiskDifference => scale,
                    Contrast::RiskRatio => Scale::Raw,
                };
                let f = scale.factor();
                ReportEntry {
                    kind,
                    status: EntryStatus::Ok,
                    error: None,
                    contrast: Some(e.contrast),
                    scale: Some(scale),
                    point: Some(e.point * f),
                    standard_error: Some(e.standard_error * f),
                    ci_lower: Some(e.ci_lower * f),
                    ci_upper: Some(e.ci_upper * f),
                    n_treated_clusters: Some(e.n_treated_clusters),
                    n_control_clusters: Some(e.n_control_clusters),
                    dropped_clusters: e.dropped_clusters.clone(),
                    warnings: e.warning.iter().cloned().collect(),
                }
            }
            Err(err) => ReportEntry {
                kind,
                status: EntryStatus::Error,
                error: Some(err.to_string()),
                contrast: None,
                scale: None,
                point: None,
                standard_error: None,
                ci_lower: None,
                ci_upper: None,
                n_treated_clusters: None,
                n_control_clusters: None,
                dropped_clusters: Vec::new(),
                warnings: Vec::new(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub dataset_sha256: Option<String>,
    pub n_clusters: usize,
    pub n_individuals: usize,
    pub effects: Vec<ReportEntry>,
}

impl EstimateReport {
    pub fn all_failed(&self) -> bool {
        self.effects.iter().all(|e| e.status == EntryStatus::Error)
    }

    /// Plain-text table for terminals.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<18}{:>12}{:>10}{:>12}{:>12}  note\n",
            "effect", "estimate", "se", "ci_lower", "ci_upper"
        );
        for e in &self.effects {
            match e.status {
                EntryStatus::Ok => {
                    let unit = match e.scale {
                        Some(Scale::Per1000) => "per 1000",
                        _ if e.contrast == Some(Contrast::RiskRatio) => "ratio, log-scale se",
                        _ => "raw",
                    };
                    let note =
                        if e.warnings.is_empty() { unit.to_string() } else { format!("{unit}; NOT CAUSAL") };
                    out.push_str(&format!(
                        "{:<18}{:>12.4}{:>10.4}{:>12.4}{:>12.4}  {}\n",
                        e.kind.name(),
                        e.point.unwrap_or(f64::NAN),
                        e.standard_error.unwrap_or(f64::NAN),
                        e.ci_lower.unwrap_or(f64::NAN),
                        e.ci_upper.unwrap_or(f64::NAN),
                        note
                    ));
                }
                EntryStatus::Error => out.push_str(&format!(
                    "{:<18}error: {}\n",
                    e.kind.name(),
                    e.error.as_deref().unwrap_or("")
                )),
            }
        }
        out
    }
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut writer: W) -> Result<(), IoError> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Monte Carlo rows as CSV, one line per effect kind.
pub fn write_mc_rows<W: Write>(report: &McReport, writer: W) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    for row in &report.rows {
        w.serialize(McCsvRow::from(row))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct McCsvRow {
    effect_kind: &'static str,
    true_value: Option<f64>,
    truth_is_causal: bool,
    mean_estimate: f64,
    bias: Option<f64>,
    empirical_sd: f64,
    mean_estimated_se: f64,
    coverage: Option<f64>,
    n_replicates: usize,
    n_failed: usize,
    mc_standard_error: f64,
}

impl From<&McRow> for McCsvRow {
    fn from(r: &McRow) -> Self {
        McCsvRow {
            effect_kind: r.effect_kind.name(),
            true_value: r.true_value,
            truth_is_causal: r.truth_is_causal,
            mean_estimate: r.mean_estimate,
            bias: r.bias,
            empirical_sd: r.empirical_sd,
            mean_estimated_se: r.mean_estimated_se,
            coverage: r.coverage,
            n_replicates: r.n_replicates,
            n_failed: r.n_failed,
            mc_standard_error: r.mc_standard_error,
        }
    }
}
