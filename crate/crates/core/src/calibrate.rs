//! Threshold calibration: turning percent-ascertainment targets into
//! referral thresholds.

use crate::error::{Error, Result};
use crate::gauss::{bvn_cdf, std_normal_cdf, std_normal_quantile, BivNormParams};

pub const DEFAULT_CALIBRATION: &str = "marginal";

pub trait ThresholdCalibration: Send + Sync {
    fn name(&self) -> &'static str;
    fn calibrate(
        &self,
        case: &BivNormParams,
        targets: [f64; 2],
        signs_rate: f64,
    ) -> Result<[f64; 2]>;
}

fn check_targets(targets: [f64; 2]) -> Result<()> {
    for t in targets {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Config(format!(
                "ascertainment target must lie in (0, 1), got {t}"
            )));
        }
    }
    Ok(())
}

/// a_j = mu_j + sd_j * Phi^-1(1 - t_j), so that P(X_j > a_j) = t_j among all true cases.
pub fn calibrate_thresholds(case: &BivNormParams, targets: [f64; 2]) -> Result<[f64; 2]> {
    check_targets(targets)?;
    let mut a = [0.0; 2];
    for j in 0..2 {
        a[j] = case.mean(j) + case.sd(j) * std_normal_quantile(1.0 - targets[j])?;
    }
    Ok(a)
}

/// Probability that a true case is observed: screen-detected, or below both
/// thresholds and showing signs.
pub fn observed_case_probability(
    case: &BivNormParams,
    thresholds: [f64; 2],
    signs_rate: f64,
) -> Result<f64> {
    let below = bvn_cdf(
        (thresholds[0] - case.mu1()) / case.sd(0),
        (thresholds[1] - case.mu2()) / case.sd(1),
        case.rho(),
    )?;
    Ok(1.0 - (1.0 - signs_rate) * below)
}

/// Expected percent ascertainment of each test: 100 P(X_j >= a_j) / P(observed).
pub fn expected_percent_ascertainment(
    case: &BivNormParams,
    thresholds: [f64; 2],
    signs_rate: f64,
) -> Result<[f64; 2]> {
    let d = observed_case_probability(case, thresholds, signs_rate)?;
    let mut out = [0.0; 2];
    for j in 0..2 {
        let above = std_normal_cdf(-(thresholds[j] - case.mean(j)) / case.sd(j));
        out[j] = 100.0 * above / d;
    }
    Ok(out)
}

/// Targets apply to the true-case marginal distribution.
#[derive(Debug, Default)]
pub struct MarginalCalibration;

impl ThresholdCalibration for MarginalCalibration {
    fn name(&self) -> &'static str {
        "marginal"
    }
    fn calibrate(
        &self,
        case: &BivNormParams,
        targets: [f64; 2],
        _signs_rate: f64,
    ) -> Result<[f64; 2]> {
        calibrate_thresholds(case, targets)
    }
}

/// Targets apply to the expected share of observed cases above each
/// threshold, i.e. the percent-ascertainment definition with the observed
/// case count as denominator. Infeasible when signs_rate = 0, since every
/// observed case is then above a threshold.
///
/// With D = P(observed | case) the thresholds satisfy
/// a_j = mu_j + sd_j Phi^-1(1 - t_j D(a)). The map D -> 1 - (1 - psi) P(below both)
/// is increasing in D, so iterating from D = 1 decreases monotonically to
/// the largest fixed point.
#[derive(Debug, Default)]
pub struct ObservedCalibration;

impl ThresholdCalibration for ObservedCalibration {
    fn name(&self) -> &'static str {
        "observed"
    }

    fn calibrate(
        &self,
        case: &BivNormParams,
        targets: [f64; 2],
        signs_rate: f64,
    ) -> Result<[f64; 2]> {
        check_targets(targets)?;
        let thresholds_for = |d: f64| -> Result<[f64; 2]> {
            calibrate_thresholds(case, [targets[0] * d, targets[1] * d])
        };
        let mut d = 1.0;
        for _ in 0..100_000 {
            let a = thresholds_for(d)?;
            let next = observed_case_probability(case, a, signs_rate)?;
            if (next - d).abs() <= 1e-15 {
                return thresholds_for(next);
            }
            d = next;
        }
        Err(Error::Config(format!(
            "ascertainment targets ({}, {}) did not calibrate to stable thresholds",
            targets[0], targets[1]
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn marginal_median() {
        let p = BivNormParams::new(1.2, -0.4, 4.0, 1.0, 0.3).unwrap();
        let a = calibrate_thresholds(&p, [0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(a[0], 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1], -0.4, epsilon = 1e-12);
        assert!(calibrate_thresholds(&p, [0.0, 0.5]).is_err());
    }

    #[test]
    fn observed_calibration_hits_expected_ascertainment() {
        let p = BivNormParams::new(1.0448, 0.7826, 1.0, 1.0, 0.3).unwrap();
        for (targets, psi) in [
            ([0.15, 0.5], 0.1),
            ([0.0001, 0.97], 0.1),
            ([0.8, 0.8], 0.0),
            ([0.5, 0.8], 0.2),
        ] {
            let a = ObservedCalibration.calibrate(&p, targets, psi).unwrap();
            let pa = expected_percent_ascertainment(&p, a, psi).unwrap();
            assert_abs_diff_eq!(pa[0], 100.0 * targets[0], epsilon = 1e-9);
            assert_abs_diff_eq!(pa[1], 100.0 * targets[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn all_observed_when_every_case_shows_signs() {
        // psi = 1 makes the observed denominator the whole case population.
        let p = BivNormParams::new(1.0, 1.0, 1.0, 1.0, 0.5).unwrap();
        let a = ObservedCalibration.calibrate(&p, [0.3, 0.6], 1.0).unwrap();
        let m = calibrate_thresholds(&p, [0.3, 0.6]).unwrap();
        assert_abs_diff_eq!(a[0], m[0], epsilon = 1e-12);
        assert_abs_diff_eq!(a[1], m[1], epsilon = 1e-12);
    }
}
