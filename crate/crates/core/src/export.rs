//! CSV formats: participant-level trial data and scenario metrics.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ScenarioMetrics;
use crate::trial::{assign_observed_status, CaseClass, ParticipantRecord, TrialDataset};

pub const PARTICIPANT_HEADER: [&str; 6] = [
    "id",
    "x1",
    "x2",
    "true_status",
    "observed_status",
    "case_class",
];

#[derive(Debug, Serialize)]
struct ParticipantOut<'a> {
    id: u32,
    x1: f64,
    x2: f64,
    true_status: u8,
    observed_status: u8,
    case_class: &'a str,
}

pub fn write_participants<W: Write>(data: &TrialDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &data.records {
        w.serialize(ParticipantOut {
            id: r.id,
            x1: r.x[0],
            x2: r.x[1],
            true_status: r.true_case as u8,
            observed_status: r.observed_case as u8,
            case_class: r.case_class.as_str(),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ParticipantIn {
    id: u32,
    x1: f64,
    x2: f64,
    #[serde(default)]
    true_status: Option<u8>,
    observed_status: u8,
    #[serde(default)]
    case_class: Option<String>,
}

fn status(v: u8, field: &str, row: usize) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(Error::Data(format!(
            "row {row}: {field} must be 0 or 1, got {v}"
        ))),
    }
}

/// Reads participant data. Observed cases are classed as screen-detected or
/// interval from their scores and `thresholds`. Without a `true_status`
/// column the true analysis is unavailable.
pub fn read_participants<R: Read>(input: R, thresholds: [f64; 2]) -> Result<TrialDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    for required in ["id", "x1", "x2", "observed_status"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Data(format!("missing required column `{required}`")));
        }
    }
    let has_truth = headers.iter().any(|h| h == "true_status");
    let mut records = Vec::new();
    for (i, row) in rdr.deserialize::<ParticipantIn>().enumerate() {
        // Row 1 is the header.
        let line = i + 2;
        let p = row.map_err(|e| Error::Data(format!("row {line}: {e}")))?;
        if !(p.x1.is_finite() && p.x2.is_finite()) {
            return Err(Error::Data(format!("row {line}: scores must be finite")));
        }
        let observed = status(p.observed_status, "observed_status", line)?;
        let true_case = match (has_truth, p.true_status) {
            (true, Some(t)) => status(t, "true_status", line)?,
            (true, None) => return Err(Error::Data(format!("row {line}: true_status is empty"))),
            (false, _) => observed,
        };
        if observed && !true_case {
            return Err(Error::Data(format!(
                "row {line}: an observed case must be a true case"
            )));
        }
        let x = [p.x1, p.x2];
        let below = x[0] < thresholds[0] && x[1] < thresholds[1];
        if true_case && !observed && !below {
            return Err(Error::Data(format!(
                "row {line}: a case scoring at or above a threshold must be observed"
            )));
        }
        let signs = observed && below;
        let (_, class) = assign_observed_status(x, true_case, thresholds, signs);
        if let Some(c) = p.case_class.as_deref().filter(|c| !c.is_empty()) {
            let given = CaseClass::parse(c)
                .ok_or_else(|| Error::Data(format!("row {line}: unknown case_class `{c}`")))?;
            if has_truth && given != class {
                return Err(Error::Data(format!(
                    "row {line}: case_class `{c}` contradicts scores and status (expected `{}`)",
                    class.as_str()
                )));
            }
        }
        records.push(ParticipantRecord {
            id: p.id,
            x,
            true_case,
            observed_case: observed,
            case_class: class,
            signs,
        });
    }
    Ok(TrialDataset::new(records, thresholds, has_truth))
}

pub const METRICS_HEADER: [&str; 18] = [
    "scenario_id",
    "prevalence",
    "signs_rate",
    "ascert1",
    "ascert2",
    "rho0",
    "rho1",
    "transform",
    "analysis",
    "reps",
    "rejection_rate",
    "crf",
    "wrf",
    "mean_auc1",
    "mean_auc2",
    "mean_diff",
    "mc_se",
    "degradations",
];

/// One row of the metrics table. Ascertainment columns hold the target
/// fractions, or are empty when thresholds were given directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario_id: String,
    pub prevalence: f64,
    pub signs_rate: f64,
    pub ascert1: Option<f64>,
    pub ascert2: Option<f64>,
    pub rho0: f64,
    pub rho1: f64,
    pub transform: String,
    pub analysis: String,
    pub reps: usize,
    pub rejection_rate: f64,
    pub crf: Option<f64>,
    pub wrf: Option<f64>,
    pub mean_auc1: f64,
    pub mean_auc2: f64,
    pub mean_diff: f64,
    pub mc_se: f64,
    pub degradations: usize,
}

pub fn metrics_rows(metrics: &[ScenarioMetrics]) -> Vec<MetricsRow> {
    let mut rows = Vec::new();
    for m in metrics {
        for a in &m.analyses {
            rows.push(MetricsRow {
                scenario_id: m.scenario_id.clone(),
                prevalence: m.prevalence,
                signs_rate: m.signs_rate,
                ascert1: m.targets.map(|t| t[0]),
                ascert2: m.targets.map(|t| t[1]),
                rho0: m.rho0,
                rho1: m.rho1,
                transform: m.transform.clone(),
                analysis: a.analysis.clone(),
                reps: a.reps,
                rejection_rate: a.rejection_rate,
                crf: a.crf,
                wrf: a.wrf,
                mean_auc1: a.mean_auc1,
                mean_auc2: a.mean_auc2,
                mean_diff: a.mean_diff,
                mc_se: a.mc_se,
                degradations: a.degradations,
            });
        }
    }
    rows
}

pub fn write_metrics<W: Write>(metrics: &[ScenarioMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let rows = metrics_rows(metrics);
    if rows.is_empty() {
        w.write_record(METRICS_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(METRICS_HEADER.iter().copied()) {
        return Err(Error::Data(
            "metrics header does not match the expected columns".into(),
        ));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ingest_classifies_from_scores() {
        let csv = "id,x1,x2,observed_status\n0,2.0,0.0,1\n1,0.0,0.0,1\n2,0.5,0.1,0\n";
        let d = read_participants(csv.as_bytes(), [1.0, 1.0]).unwrap();
        assert!(!d.true_status_known);
        let classes: Vec<_> = d.records.iter().map(|r| r.case_class).collect();
        assert_eq!(
            classes,
            [
                CaseClass::ScreenDetected,
                CaseClass::Interval,
                CaseClass::NonCase
            ]
        );
    }

    #[test]
    fn ingest_names_bad_rows() {
        let csv = "id,x1,x2,observed_status\n0,2.0,0.0,1\n1,abc,0.0,1\n";
        let e = read_participants(csv.as_bytes(), [1.0, 1.0]).unwrap_err();
        assert!(e.to_string().contains("row 3"), "{e}");
        let csv = "id,x1,x2,observed_status\n0,2.0,0.0,2\n";
        assert!(read_participants(csv.as_bytes(), [1.0, 1.0])
            .unwrap_err()
            .to_string()
            .contains("row 2"));
        let csv = "id,x1,observed_status\n0,2.0,1\n";
        assert!(read_participants(csv.as_bytes(), [1.0, 1.0]).is_err());
    }

    #[test]
    fn missed_cases_need_truth_column() {
        let csv = "id,x1,x2,true_status,observed_status,case_class\n0,0.0,0.0,1,0,missed\n";
        let d = read_participants(csv.as_bytes(), [1.0, 1.0]).unwrap();
        assert_eq!(d.records[0].case_class, CaseClass::Missed);
        assert_eq!(d.counts.missed, 1);
    }
}
