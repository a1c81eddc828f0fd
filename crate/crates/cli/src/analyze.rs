use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use pairscreen::analysis::{
    run_analysis, AnalysisKind, AnalysisResult, CorrectedAnalysis, CorrectedCaseCount, TestSettings,
};
use pairscreen::correct::{correct_case_distribution, CorrectedParams};
use pairscreen::export::read_participants;
use pairscreen::trial::{CaseCounts, TrialDataset};
use serde::Serialize;

use crate::charts::roc_chart;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub thresholds: [f64; 2],
    pub settings: TestSettings,
    pub case_count: CorrectedCaseCount,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct AnalyzeReport {
    pub counts: CaseCounts,
    pub results: Vec<AnalysisResult>,
    pub correction: Option<CorrectedParams>,
    /// Why the correction could not be computed.
    pub correction_failure: Option<String>,
    pub files: Vec<PathBuf>,
}

impl AnalyzeReport {
    pub fn warnings(&self) -> Vec<String> {
        self.results
            .iter()
            .flat_map(|r| r.warnings.iter().map(move |w| format!("{}: {w}", r.kind)))
            .collect()
    }

    /// Ok unless the bias correction could not be computed.
    pub fn status(&self) -> CliResult<()> {
        match &self.correction_failure {
            None => Ok(()),
            Some(why) => Err(CliError::CorrectionUnavailable(format!(
                "{why}; the corrected analysis was not written"
            ))),
        }
    }
}

#[derive(Serialize)]
struct AnalysisRow<'a> {
    analysis: &'a str,
    auc1: f64,
    auc2: f64,
    diff: f64,
    var_diff: f64,
    z: f64,
    p_value: f64,
    reject: bool,
    favored_test: &'a str,
    n_cases: usize,
    n_noncases: usize,
    case_mu1: f64,
    case_mu2: f64,
    case_var1: f64,
    case_var2: f64,
    case_rho: f64,
    noncase_mu1: f64,
    noncase_mu2: f64,
    noncase_var1: f64,
    noncase_var2: f64,
    noncase_rho: f64,
    degraded: bool,
    warnings: String,
}

impl<'a> From<&'a AnalysisResult> for AnalysisRow<'a> {
    fn from(r: &'a AnalysisResult) -> Self {
        let (c, n) = (&r.case_params, &r.noncase_params);
        AnalysisRow {
            analysis: r.kind.as_str(),
            auc1: r.auc1,
            auc2: r.auc2,
            diff: r.diff,
            var_diff: r.var_diff,
            z: r.z,
            p_value: r.p_value,
            reject: r.reject,
            favored_test: r.favored_test.as_str(),
            n_cases: r.n_cases_used,
            n_noncases: r.n_noncases_used,
            case_mu1: c.mu1(),
            case_mu2: c.mu2(),
            case_var1: c.var1(),
            case_var2: c.var2(),
            case_rho: c.rho(),
            noncase_mu1: n.mu1(),
            noncase_mu2: n.mu2(),
            noncase_var1: n.var1(),
            noncase_var2: n.var2(),
            noncase_rho: n.rho(),
            degraded: r.degraded,
            warnings: r.warnings.join("; "),
        }
    }
}

pub fn write_analysis_csv<W: Write>(results: &[AnalysisResult], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(AnalysisRow::from(r))
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct DatasetAnalysis {
    pub results: Vec<AnalysisResult>,
    pub correction: Option<CorrectedParams>,
    pub correction_failure: Option<String>,
}

/// True (when true status is known), observed and corrected analyses. The
/// corrected result is left out when the correction cannot be computed.
pub fn analyze_dataset(
    data: &TrialDataset,
    settings: &TestSettings,
    case_count: CorrectedCaseCount,
) -> CliResult<DatasetAnalysis> {
    if data.counts.observed_cases == 0 {
        return Err(CliError::Data("no observed cases".into()));
    }
    let mut results = Vec::new();
    if data.true_status_known {
        results.push(run_analysis(data, AnalysisKind::True, settings)?);
    }
    results.push(run_analysis(data, AnalysisKind::Observed, settings)?);
    let (corrected, correction) = CorrectedAnalysis { case_count }.run_detailed(data, settings)?;
    let correction_failure = match correction {
        Some(_) => {
            results.push(corrected);
            None
        }
        None => Some(
            correct_case_distribution(data)
                .err()
                .map_or_else(|| "correction unavailable".into(), |e| e.to_string()),
        ),
    };
    Ok(DatasetAnalysis {
        results,
        correction,
        correction_failure,
    })
}

pub(crate) fn create(path: &Path) -> CliResult<File> {
    File::create(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub(crate) fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes `analysis.csv` and `roc.svg` for a dataset already in memory.
pub fn write_analysis(
    data: &TrialDataset,
    opts: &AnalyzeOptions,
    title: &str,
    prefix: &str,
) -> CliResult<AnalyzeReport> {
    let DatasetAnalysis {
        results,
        correction,
        correction_failure,
    } = analyze_dataset(data, &opts.settings, opts.case_count)?;
    ensure_dir(&opts.out)?;
    let csv_path = opts.out.join(format!("{prefix}analysis.csv"));
    write_analysis_csv(&results, create(&csv_path)?)?;
    let svg_path = opts.out.join(format!("{prefix}roc.svg"));
    write_text(&svg_path, &roc_chart(title, &results))?;
    Ok(AnalyzeReport {
        counts: data.counts,
        results,
        correction,
        correction_failure,
        files: vec![csv_path, svg_path],
    })
}

pub fn cmd_analyze(data_path: &Path, opts: &AnalyzeOptions) -> CliResult<AnalyzeReport> {
    for a in opts.thresholds {
        if !a.is_finite() {
            return Err(CliError::Config(format!(
                "thresholds must be finite, got {a}"
            )));
        }
    }
    if !(opts.settings.alpha > 0.0 && opts.settings.alpha < 1.0) {
        return Err(CliError::Config(format!(
            "alpha must lie in (0, 1), got {}",
            opts.settings.alpha
        )));
    }
    let file = File::open(data_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", data_path.display())))?;
    let data = read_participants(std::io::BufReader::new(file), opts.thresholds)
        .map_err(|e| CliError::Data(format!("{}: {e}", data_path.display())))?;
    let title = format!(
        "{} ({} participants, {} observed cases)",
        data_path
            .file_name()
            .map_or_else(String::new, |f| f.to_string_lossy().into_owned()),
        data.counts.participants,
        data.counts.observed_cases
    );
    write_analysis(&data, opts, &title, "")
}
