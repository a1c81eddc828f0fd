//! The true, observed and corrected analyses of one trial.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::correct::{correct_case_distribution, CorrectedParams};
use crate::error::{Error, Result};
use crate::gauss::{BivNormParams, PairSummary};
use crate::roc::{
    difference_test, var_diff_auc_with, FavoredTest, ScoreMoments, TestMoments, VarianceModel,
};
use crate::trial::{ParticipantRecord, TrialDataset, DEFAULT_ALPHA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    True,
    Observed,
    Corrected,
}

impl AnalysisKind {
    pub const ALL: [AnalysisKind; 3] = [
        AnalysisKind::True,
        AnalysisKind::Observed,
        AnalysisKind::Corrected,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AnalysisKind::True => "true",
            AnalysisKind::Observed => "observed",
            AnalysisKind::Corrected => "corrected",
        }
    }
}

impl fmt::Display for AnalysisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisResult {
    pub kind: AnalysisKind,
    pub auc1: f64,
    pub auc2: f64,
    pub diff: f64,
    pub var_diff: f64,
    /// NaN when the test is unavailable.
    pub z: f64,
    pub p_value: f64,
    pub reject: bool,
    pub favored_test: FavoredTest,
    pub n_cases_used: usize,
    pub n_noncases_used: usize,
    pub case_params: BivNormParams,
    pub noncase_params: BivNormParams,
    /// The requested analysis could not be carried out as specified
    /// (correction unavailable, test unavailable, variance clamped).
    pub degraded: bool,
    pub warnings: Vec<String>,
}

/// Significance level and variance model of the AUC-difference test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSettings {
    pub alpha: f64,
    pub variance: VarianceModel,
}

impl Default for TestSettings {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            variance: VarianceModel::Paired,
        }
    }
}

impl TestSettings {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Default::default()
        }
    }
}

/// Plug-in moments (n - 1 variances) of one class.
fn class_params(s: &PairSummary) -> Result<BivNormParams> {
    if s.n < 2 {
        return Err(Error::InsufficientData(format!(
            "{} score pairs in a class; at least 2 are needed",
            s.n
        )));
    }
    let corr = s.corr();
    let rho = if corr.is_nan() {
        0.0
    } else {
        corr.clamp(-1.0 + 1e-12, 1.0 - 1e-12)
    };
    BivNormParams::new(s.mean[0], s.mean[1], s.sample_var(0), s.sample_var(1), rho).map_err(|e| {
        Error::InsufficientData(format!("class moments do not define a binormal model: {e}"))
    })
}

/// Score summaries of (cases, non-cases), by true or observed status.
fn class_summaries(data: &TrialDataset, by_truth: bool) -> (PairSummary, PairSummary) {
    let is_case = move |r: &&ParticipantRecord| {
        if by_truth {
            r.true_case
        } else {
            r.observed_case
        }
    };
    let cases = PairSummary::from_point_iter(data.records.iter().filter(is_case).map(|r| r.x));
    let noncases = PairSummary::from_point_iter(
        data.records
            .iter()
            .filter(move |r| !is_case(r))
            .map(|r| r.x),
    );
    (cases, noncases)
}

/// AUCs, difference variance and test from class parameters and counts.
pub fn compare_from_params(
    kind: AnalysisKind,
    case: &BivNormParams,
    noncase: &BivNormParams,
    n_cases: usize,
    n_noncases: usize,
    settings: &TestSettings,
) -> Result<AnalysisResult> {
    let test = |j: usize| TestMoments {
        case: ScoreMoments::new(case.mean(j), case.var(j)),
        noncase: ScoreMoments::new(noncase.mean(j), noncase.var(j)),
    };
    let (t1, t2) = (test(0), test(1));
    let (auc1, auc2) = (t1.auc(), t2.auc());
    let diff = auc1 - auc2;
    let v = var_diff_auc_with(
        settings.variance,
        &t1,
        &t2,
        noncase.rho(),
        case.rho(),
        n_cases,
        n_noncases,
    )?;
    let mut warnings = Vec::new();
    let mut degraded = false;
    if v.clamped {
        degraded = true;
        warnings.push(
            "variance of the AUC difference was negative and has been clamped to 0".to_string(),
        );
    }
    let (z, p_value, reject, favored_test) = match difference_test(diff, v.var_diff, settings.alpha)
    {
        Ok(t) => (t.z, t.p_value, t.reject, t.favored),
        Err(e) => {
            degraded = true;
            warnings.push(e.to_string());
            (f64::NAN, f64::NAN, false, FavoredTest::None)
        }
    };
    Ok(AnalysisResult {
        kind,
        auc1,
        auc2,
        diff,
        var_diff: v.var_diff,
        z,
        p_value,
        reject,
        favored_test,
        n_cases_used: n_cases,
        n_noncases_used: n_noncases,
        case_params: *case,
        noncase_params: *noncase,
        degraded,
        warnings,
    })
}

/// One way of analysing a trial.
pub trait Analysis: Send + Sync {
    fn kind(&self) -> AnalysisKind;
    fn run(&self, data: &TrialDataset, settings: &TestSettings) -> Result<AnalysisResult>;
}

/// Moments by true disease status; needs simulated data.
pub struct TrueAnalysis;

impl Analysis for TrueAnalysis {
    fn kind(&self) -> AnalysisKind {
        AnalysisKind::True
    }

    fn run(&self, data: &TrialDataset, settings: &TestSettings) -> Result<AnalysisResult> {
        if !data.true_status_known {
            return Err(Error::Precondition(
                "true disease status is not available".into(),
            ));
        }
        let (c, n) = class_summaries(data, true);
        compare_from_params(
            AnalysisKind::True,
            &class_params(&c)?,
            &class_params(&n)?,
            c.n,
            n.n,
            settings,
        )
    }
}

/// Moments by observed disease status; missed cases count as non-cases.
pub struct ObservedAnalysis;

impl Analysis for ObservedAnalysis {
    fn kind(&self) -> AnalysisKind {
        AnalysisKind::Observed
    }

    fn run(&self, data: &TrialDataset, settings: &TestSettings) -> Result<AnalysisResult> {
        let (c, n) = class_summaries(data, false);
        if c.n == 0 {
            return Err(Error::NoObservedCases);
        }
        compare_from_params(
            AnalysisKind::Observed,
            &class_params(&c)?,
            &class_params(&n)?,
            c.n,
            n.n,
            settings,
        )
    }
}

/// Case sample size fed to the corrected analysis's variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectedCaseCount {
    /// Number of observed cases.
    Observed,
    /// Observed cases above a threshold divided by the estimated probability
    /// of being above a threshold.
    Inflated,
}

/// Observed non-case moments with the case moments replaced by the
/// bias-corrected estimates. Falls back to the observed analysis, flagged as
/// degraded, when the correction cannot be computed.
pub struct CorrectedAnalysis {
    pub case_count: CorrectedCaseCount,
}

impl CorrectedAnalysis {
    pub fn run_detailed(
        &self,
        data: &TrialDataset,
        settings: &TestSettings,
    ) -> Result<(AnalysisResult, Option<CorrectedParams>)> {
        let (c, n) = class_summaries(data, false);
        if c.n == 0 {
            return Err(Error::NoObservedCases);
        }
        let noncase = class_params(&n)?;
        match correct_case_distribution(data) {
            Ok(corr) => {
                let n_cases = match self.case_count {
                    CorrectedCaseCount::Observed => c.n,
                    CorrectedCaseCount::Inflated => {
                        let t = data.thresholds;
                        let above = data
                            .records
                            .iter()
                            .filter(|r| r.observed_case && (r.x[0] >= t[0] || r.x[1] >= t[1]))
                            .count();
                        if corr.lambda_hat > 0.0 {
                            ((above as f64 / corr.lambda_hat).round() as usize).max(c.n)
                        } else {
                            c.n
                        }
                    }
                };
                let mut res = compare_from_params(
                    AnalysisKind::Corrected,
                    &corr.weighted,
                    &noncase,
                    n_cases,
                    n.n,
                    settings,
                )?;
                let mut w = corr.warnings();
                w.append(&mut res.warnings);
                res.warnings = w;
                if !corr.weighting_applied {
                    res.degraded = true;
                }
                Ok((res, Some(corr)))
            }
            Err(e) => {
                let mut res = ObservedAnalysis.run(data, settings)?;
                res.kind = AnalysisKind::Corrected;
                res.degraded = true;
                res.warnings
                    .insert(0, format!("{e}; reporting the observed analysis"));
                Ok((res, None))
            }
        }
    }
}

impl Analysis for CorrectedAnalysis {
    fn kind(&self) -> AnalysisKind {
        AnalysisKind::Corrected
    }

    fn run(&self, data: &TrialDataset, settings: &TestSettings) -> Result<AnalysisResult> {
        self.run_detailed(data, settings).map(|(r, _)| r)
    }
}

/// Runs the built-in analysis of the given kind.
pub fn run_analysis(
    data: &TrialDataset,
    kind: AnalysisKind,
    settings: &TestSettings,
) -> Result<AnalysisResult> {
    match kind {
        AnalysisKind::True => TrueAnalysis.run(data, settings),
        AnalysisKind::Observed => ObservedAnalysis.run(data, settings),
        AnalysisKind::Corrected => CorrectedAnalysis {
            case_count: CorrectedCaseCount::Observed,
        }
        .run(data, settings),
    }
}
