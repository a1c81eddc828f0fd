//! Binormal ROC curves, AUCs, and the paired test of an AUC difference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{std_normal_cdf, std_normal_pdf};

/// Mean and variance of one test's scores in one disease class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreMoments {
    pub mean: f64,
    pub var: f64,
}

impl ScoreMoments {
    pub fn new(mean: f64, var: f64) -> Self {
        Self { mean, var }
    }
    pub fn sd(&self) -> f64 {
        self.var.sqrt()
    }
}

/// Case and non-case moments of one test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestMoments {
    pub case: ScoreMoments,
    pub noncase: ScoreMoments,
}

impl TestMoments {
    /// Binormal (a, b): a = (mu1 - mu0) / sd1, b = sd0 / sd1.
    pub fn ab(&self) -> (f64, f64) {
        let s1 = self.case.sd();
        (
            (self.case.mean - self.noncase.mean) / s1,
            self.noncase.sd() / s1,
        )
    }

    pub fn auc(&self) -> f64 {
        binormal_auc(self.case, self.noncase)
    }
}

pub fn binormal_auc(case: ScoreMoments, noncase: ScoreMoments) -> f64 {
    std_normal_cdf((case.mean - noncase.mean) / (case.var + noncase.var).sqrt())
}

/// (false positive rate, true positive rate) when scores >= t are called positive.
pub fn binormal_roc_point(case: ScoreMoments, noncase: ScoreMoments, t: f64) -> (f64, f64) {
    (
        std_normal_cdf(-(t - noncase.mean) / noncase.sd()),
        std_normal_cdf(-(t - case.mean) / case.sd()),
    )
}

pub const ROC_POINTS: usize = 512;

/// ROC points at `ROC_POINTS` thresholds spanning the two means widened by
/// 6 pooled SDs, ordered from (1, 1) towards (0, 0).
pub fn roc_curve(case: ScoreMoments, noncase: ScoreMoments) -> Vec<(f64, f64)> {
    let pooled = (0.5 * (case.var + noncase.var)).sqrt();
    let lo = case.mean.min(noncase.mean) - 6.0 * pooled;
    let hi = case.mean.max(noncase.mean) + 6.0 * pooled;
    let step = (hi - lo) / (ROC_POINTS - 1) as f64;
    (0..ROC_POINTS)
        .map(|i| binormal_roc_point(case, noncase, lo + step * i as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffVariance {
    pub var1: f64,
    pub var2: f64,
    pub cov: f64,
    /// Var(A1 - A2), never negative.
    pub var_diff: f64,
    /// The raw value was negative and has been clamped to 0.
    pub clamped: bool,
}

/// How the variance of an AUC difference treats the pairing of the tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceModel {
    /// Includes the covariance induced by the between-test correlations.
    #[default]
    Paired,
    /// Sum of the two single-test variances, as if the tests had been
    /// applied to separate samples. Conservative for positively correlated
    /// scores.
    Independent,
}

impl VarianceModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            VarianceModel::Paired => "paired",
            VarianceModel::Independent => "independent",
        }
    }
}

/// `var_diff_auc` under the chosen variance model.
pub fn var_diff_auc_with(
    model: VarianceModel,
    test1: &TestMoments,
    test2: &TestMoments,
    rho0: f64,
    rho1: f64,
    n_cases: usize,
    n_noncases: usize,
) -> Result<DiffVariance> {
    match model {
        VarianceModel::Paired => var_diff_auc(test1, test2, rho0, rho1, n_cases, n_noncases),
        VarianceModel::Independent => var_diff_auc(test1, test2, 0.0, 0.0, n_cases, n_noncases),
    }
}

/// Delta-method variance of AUC1 - AUC2 for paired binormal plug-in
/// estimates, with `rho0`/`rho1` the between-test score correlations in
/// non-cases and cases.
pub fn var_diff_auc(
    test1: &TestMoments,
    test2: &TestMoments,
    rho0: f64,
    rho1: f64,
    n_cases: usize,
    n_noncases: usize,
) -> Result<DiffVariance> {
    if n_cases < 2 || n_noncases < 2 {
        return Err(Error::InsufficientData(format!(
            "{n_cases} cases and {n_noncases} non-cases; at least 2 of each are needed"
        )));
    }
    for r in [rho0, rho1] {
        if !(r.abs() <= 1.0) {
            return Err(Error::Domain(format!(
                "correlation must lie in [-1, 1], got {r}"
            )));
        }
    }
    for m in [test1.case, test1.noncase, test2.case, test2.noncase] {
        if !(m.var > 0.0 && m.var.is_finite() && m.mean.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "score variance must be positive, got {}",
                m.var
            )));
        }
    }
    let (n1, n0) = (n_cases as f64, n_noncases as f64);
    let (a1, b1) = test1.ab();
    let (a2, b2) = test2.ab();

    let var_a = |a: f64, b: f64| (1.0 + 0.5 * a * a) / n1 + b * b / n0;
    let var_b = |b: f64| b * b / (2.0 * n0) + b * b / (2.0 * n1);
    let cov_ab = |a: f64, b: f64| a * b / (2.0 * n1);
    // Partials of Phi(a / sqrt(1 + b^2)).
    let fg = |a: f64, b: f64| {
        let d = 1.0 + b * b;
        let phi = std_normal_pdf(a / d.sqrt());
        (phi / d.sqrt(), -a * b * phi / d.powf(1.5))
    };
    let (f1, g1) = fg(a1, b1);
    let (f2, g2) = fg(a2, b2);

    let v1 = f1 * f1 * var_a(a1, b1) + g1 * g1 * var_b(b1) + 2.0 * f1 * g1 * cov_ab(a1, b1);
    let v2 = f2 * f2 * var_a(a2, b2) + g2 * g2 * var_b(b2) + 2.0 * f2 * g2 * cov_ab(a2, b2);

    let r1sq = rho1 * rho1;
    let c_aa = rho1 / n1 + rho0 * b1 * b2 / n0 + a1 * a2 * r1sq / (2.0 * n1);
    let c_bb = rho0 * rho0 * b1 * b2 / (2.0 * n0) + r1sq * b1 * b2 / (2.0 * n1);
    let c_ab = a1 * b2 * r1sq / (2.0 * n1);
    let c_ba = a2 * b1 * r1sq / (2.0 * n1);
    let cov = f1 * f2 * c_aa + g1 * g2 * c_bb + f1 * g2 * c_ab + g1 * f2 * c_ba;

    let raw = v1 + v2 - 2.0 * cov;
    Ok(DiffVariance {
        var1: v1,
        var2: v2,
        cov,
        var_diff: raw.max(0.0),
        clamped: raw < 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FavoredTest {
    Test1,
    Test2,
    None,
}

impl FavoredTest {
    pub fn as_str(&self) -> &'static str {
        match self {
            FavoredTest::Test1 => "test1",
            FavoredTest::Test2 => "test2",
            FavoredTest::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestOutcome {
    pub z: f64,
    pub p_value: f64,
    pub reject: bool,
    pub favored: FavoredTest,
}

/// Two-sided z test of AUC1 = AUC2.
pub fn difference_test(diff: f64, var_diff: f64, alpha: f64) -> Result<TestOutcome> {
    if !(var_diff > 0.0) {
        return Err(Error::TestUnavailable);
    }
    let z = diff / var_diff.sqrt();
    let p_value = (2.0 * std_normal_cdf(-z.abs())).min(1.0);
    let reject = p_value < alpha;
    let favored = match (reject, diff > 0.0) {
        (false, _) => FavoredTest::None,
        (true, true) => FavoredTest::Test1,
        (true, false) => FavoredTest::Test2,
    };
    Ok(TestOutcome {
        z,
        p_value,
        reject,
        favored,
    })
}
