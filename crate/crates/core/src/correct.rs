//! Bias correction of the case score distribution.
//!
//! Observed cases are split by the referral thresholds, a truncated
//! bivariate normal is fitted in every populated quadrant, the fit that best
//! explains all observed cases is kept, and the case moments are then
//! rebuilt as a mixture of the above-threshold and interval samples weighted
//! by the estimated probability of scoring above a threshold.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauss::{bvn_cdf, region_mass, BivNormParams, PairSummary, Rect};
use crate::optim::{bfgs, BfgsOptions};
use crate::trial::TrialDataset;

const START_RHO_LIMIT: f64 = 1.0 - 1e-6;
const WEIGHTED_RHO_LIMIT: f64 = 1.0 - 1e-9;
pub const SMALL_SAMPLE_CASES: usize = 500;
pub const FEW_INTERVAL_CASES: usize = 5;

/// Observed cases split by the referral thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct CasePartition {
    pub thresholds: [f64; 2],
    /// Observed cases with at least one score at or above its threshold.
    pub set_a: Vec<[f64; 2]>,
    /// Observed cases with both scores below threshold.
    pub set_b: Vec<[f64; 2]>,
    /// Quadrants 1..4 at indices 0..3: both above, only test 1 above, only
    /// test 2 above, neither.
    pub quadrants: [Vec<[f64; 2]>; 4],
}

pub fn quadrant_of(x: [f64; 2], thresholds: [f64; 2]) -> usize {
    match (x[0] >= thresholds[0], x[1] >= thresholds[1]) {
        (true, true) => 1,
        (true, false) => 2,
        (false, true) => 3,
        (false, false) => 4,
    }
}

/// Truncation rectangle of quadrant `l` (1..=4).
pub fn quadrant_rect(l: usize, thresholds: [f64; 2]) -> Result<Rect> {
    let [a1, a2] = thresholds;
    let (inf, ninf) = (f64::INFINITY, f64::NEG_INFINITY);
    match l {
        1 => Rect::new([a1, a2], [inf, inf]),
        2 => Rect::new([a1, ninf], [inf, a2]),
        3 => Rect::new([ninf, a2], [a1, inf]),
        4 => Rect::new([ninf, ninf], [a1, a2]),
        _ => Err(Error::Precondition(format!(
            "quadrant id must be 1..=4, got {l}"
        ))),
    }
}

impl CasePartition {
    pub fn from_points(points: &[[f64; 2]], thresholds: [f64; 2]) -> Self {
        let mut set_a = Vec::new();
        let mut set_b = Vec::new();
        let mut quadrants: [Vec<[f64; 2]>; 4] = Default::default();
        for &x in points {
            let l = quadrant_of(x, thresholds);
            quadrants[l - 1].push(x);
            if l == 4 {
                set_b.push(x);
            } else {
                set_a.push(x);
            }
        }
        Self {
            thresholds,
            set_a,
            set_b,
            quadrants,
        }
    }

    pub fn observed(&self) -> impl Iterator<Item = &[f64; 2]> {
        self.set_a.iter().chain(self.set_b.iter())
    }

    pub fn len(&self) -> usize {
        self.set_a.len() + self.set_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn partition_cases(data: &TrialDataset) -> Result<CasePartition> {
    let points = data.observed_case_points();
    if points.is_empty() {
        return Err(Error::CorrectionUnavailable("no observed cases".into()));
    }
    Ok(CasePartition::from_points(&points, data.thresholds))
}

/// Things worth telling the investigator about a correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CorrectionNote {
    SmallSample { observed_cases: usize },
    FewIntervalCases { interval_cases: usize },
    DegenerateStart { quadrant: usize },
    QuadrantSkipped { quadrant: usize },
    NoConvergedFit,
    WeightingSkipped { set_a: usize, set_b: usize },
    NonPositiveVariance,
    RhoClamped { value: f64 },
}

impl fmt::Display for CorrectionNote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrectionNote::SmallSample { observed_cases } => {
                write!(f, "only {observed_cases} observed cases; the correction may be unreliable below {SMALL_SAMPLE_CASES}")
            }
            CorrectionNote::FewIntervalCases { interval_cases } => {
                write!(f, "only {interval_cases} interval cases; the correction may be unreliable below {FEW_INTERVAL_CASES}")
            }
            CorrectionNote::DegenerateStart { quadrant } => {
                write!(f, "quadrant {quadrant} has a zero-variance score; skipped")
            }
            CorrectionNote::QuadrantSkipped { quadrant } => {
                write!(f, "quadrant {quadrant} fit failed: truncation region carries no mass")
            }
            CorrectionNote::NoConvergedFit => write!(f, "no quadrant fit converged; using the best unconverged fit"),
            CorrectionNote::WeightingSkipped { set_a, set_b } => write!(
                f,
                "weighting needs at least 2 cases on each side of the thresholds (got {set_a} above, {set_b} below); using the truncated-likelihood estimates"
            ),
            CorrectionNote::NonPositiveVariance => {
                write!(f, "weighted variance is not positive; using the truncated-likelihood estimates")
            }
            CorrectionNote::RhoClamped { value } => write!(f, "weighted correlation {value} clamped into (-1, 1)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub mean: [f64; 2],
    /// n - 1 denominator.
    pub sd: [f64; 2],
    /// Pearson correlation; 0 when either SD is 0.
    pub corr: f64,
    pub degenerate: bool,
}

pub fn quadrant_sample_stats(points: &[[f64; 2]]) -> Result<SampleStats> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} points; at least 2 are needed",
            points.len()
        )));
    }
    let s = PairSummary::from_points(points);
    let sd = [s.sample_sd(0), s.sample_sd(1)];
    let degenerate = !(sd[0] > 0.0 && sd[1] > 0.0);
    let corr = if degenerate { 0.0 } else { s.corr() };
    Ok(SampleStats {
        mean: s.mean,
        sd,
        corr,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NathFit {
    pub params: BivNormParams,
    pub truncated_loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn params_from(theta: &[f64; 5]) -> Option<BivNormParams> {
    BivNormParams::new(
        theta[0],
        theta[1],
        (2.0 * theta[2]).exp(),
        (2.0 * theta[3]).exp(),
        theta[4].tanh(),
    )
    .ok()
}

/// Maximum likelihood fit of a bivariate normal to points truncated to
/// `rect`, optimized over (mu1, mu2, log sd1, log sd2, atanh rho).
pub fn nath_mle(points: &[[f64; 2]], rect: &Rect, start: &BivNormParams) -> Result<NathFit> {
    nath_mle_with(points, rect, start, &BfgsOptions::default())
}

pub fn nath_mle_with(
    points: &[[f64; 2]],
    rect: &Rect,
    start: &BivNormParams,
    opts: &BfgsOptions,
) -> Result<NathFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} points; at least 2 are needed",
            points.len()
        )));
    }
    if let Some(x) = points.iter().find(|x| !rect.contains(**x)) {
        return Err(Error::Precondition(format!(
            "point ({}, {}) lies outside the truncation region",
            x[0], x[1]
        )));
    }
    let summary = PairSummary::from_points(points);
    let plane = rect.is_plane();
    // Per-observation negative truncated log-likelihood.
    let objective = |theta: &[f64; 5]| -> Option<(f64, [f64; 5])> {
        let p = params_from(theta)?;
        let (ll, mut g) = summary.mean_loglik_grad(&p);
        let mut value = ll;
        if !plane {
            let mass = region_mass(&p, rect);
            if !(mass.prob > 0.0) {
                return None;
            }
            value -= mass.prob.ln();
            for (gi, mi) in g.iter_mut().zip(mass.grad) {
                *gi -= mi / mass.prob;
            }
        }
        let rho = p.rho();
        g[4] *= 1.0 - rho * rho;
        Some((-value, g.map(|v| -v)))
    };
    let rho0 = start.rho().clamp(-START_RHO_LIMIT, START_RHO_LIMIT);
    let x0 = [
        start.mu1(),
        start.mu2(),
        start.sd(0).ln(),
        start.sd(1).ln(),
        rho0.atanh(),
    ];
    let out = bfgs(objective, x0, opts).ok_or(Error::DegenerateRegion)?;
    let params = params_from(&out.x).ok_or(Error::DegenerateRegion)?;
    Ok(NathFit {
        params,
        truncated_loglik: -out.value * points.len() as f64,
        converged: out.converged,
        iterations: out.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrantFit {
    /// 1..=4
    pub quadrant: usize,
    pub params: BivNormParams,
    /// Untruncated log-likelihood over all observed cases.
    pub full_loglik: f64,
    pub converged: bool,
    pub n_points: usize,
}

/// Fits every quadrant holding at least two points with usable spread.
pub fn fit_quadrants(
    partition: &CasePartition,
    notes: &mut Vec<CorrectionNote>,
) -> Vec<QuadrantFit> {
    let observed = PairSummary::from_points(&partition.observed().copied().collect::<Vec<_>>());
    let mut fits = Vec::new();
    for l in 1..=4 {
        let points = &partition.quadrants[l - 1];
        let Ok(stats) = quadrant_sample_stats(points) else {
            continue;
        };
        if stats.degenerate {
            notes.push(CorrectionNote::DegenerateStart { quadrant: l });
            continue;
        }
        let Ok(rect) = quadrant_rect(l, partition.thresholds) else {
            notes.push(CorrectionNote::QuadrantSkipped { quadrant: l });
            continue;
        };
        let rho = stats.corr.clamp(-START_RHO_LIMIT, START_RHO_LIMIT);
        let start = BivNormParams::new(
            stats.mean[0],
            stats.mean[1],
            stats.sd[0] * stats.sd[0],
            stats.sd[1] * stats.sd[1],
            rho,
        )
        .expect("positive spread and clamped correlation");
        match nath_mle(points, &rect, &start) {
            Ok(fit) => fits.push(QuadrantFit {
                quadrant: l,
                params: fit.params,
                full_loglik: observed.mean_loglik(&fit.params) * observed.n as f64,
                converged: fit.converged,
                n_points: points.len(),
            }),
            Err(_) => notes.push(CorrectionNote::QuadrantSkipped { quadrant: l }),
        }
    }
    fits
}

/// Fit with the highest full log-likelihood over `observed`, preferring
/// converged fits; ties go to the lowest quadrant id.
pub fn select_best_fit(
    fits: &[QuadrantFit],
    observed: &[[f64; 2]],
    notes: &mut Vec<CorrectionNote>,
) -> Result<QuadrantFit> {
    if observed.is_empty() {
        return Err(Error::CorrectionUnavailable("no observed cases".into()));
    }
    let summary = PairSummary::from_points(observed);
    let best_of = |want_converged: bool| {
        let mut best: Option<(f64, &QuadrantFit)> = None;
        for f in fits.iter().filter(|f| !want_converged || f.converged) {
            let ll = summary.mean_loglik(&f.params);
            let better = match best {
                None => true,
                Some((bl, bf)) => ll > bl || (ll == bl && f.quadrant < bf.quadrant),
            };
            if ll.is_finite() && better {
                best = Some((ll, f));
            }
        }
        best.map(|(ll, f)| QuadrantFit {
            full_loglik: ll * summary.n as f64,
            ..*f
        })
    };
    if let Some(f) = best_of(true) {
        return Ok(f);
    }
    match best_of(false) {
        Some(f) => {
            notes.push(CorrectionNote::NoConvergedFit);
            Ok(f)
        }
        None => Err(Error::CorrectionUnavailable(
            "no quadrant has enough cases for a fit".into(),
        )),
    }
}

/// Estimated probability that a case scores at or above at least one threshold.
pub fn lambda_hat(nath: &BivNormParams, thresholds: [f64; 2]) -> f64 {
    let h = (thresholds[0] - nath.mu1()) / nath.sd(0);
    let k = (thresholds[1] - nath.mu2()) / nath.sd(1);
    let below = bvn_cdf(h, k, nath.rho()).expect("valid params have |rho| < 1");
    (1.0 - below).clamp(0.0, 1.0)
}

/// Second-moment components of the two-sample mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedMoments {
    pub g: [f64; 2],
    pub h: [f64; 2],
    pub p: f64,
    pub q: f64,
}

impl WeightedMoments {
    pub fn new(a: &PairSummary, b: &PairSummary, lambda: f64) -> Self {
        let wb = 1.0 - lambda;
        Self {
            g: [
                lambda * (a.mean[0] * a.mean[0] + a.m2[0]),
                lambda * (a.mean[1] * a.mean[1] + a.m2[1]),
            ],
            h: [
                wb * (b.mean[0] * b.mean[0] + b.m2[0]),
                wb * (b.mean[1] * b.mean[1] + b.m2[1]),
            ],
            p: lambda * (a.mean[0] * a.mean[1] + a.m2[2]),
            q: wb * (b.mean[0] * b.mean[1] + b.m2[2]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectedParams {
    pub lambda_hat: f64,
    pub nath: BivNormParams,
    /// Corrected case parameters: the weighted estimates, or `nath` when
    /// weighting was not possible.
    pub weighted: BivNormParams,
    pub weighting_applied: bool,
    pub selected_quadrant: usize,
    pub notes: Vec<CorrectionNote>,
}

impl CorrectedParams {
    pub fn warnings(&self) -> Vec<String> {
        self.notes.iter().map(|n| n.to_string()).collect()
    }
}

/// Mixture moments of set A (weight lambda) and set B (weight 1 - lambda).
/// Falls back to the Nath estimates when either set has fewer than two
/// points or a weighted variance is not positive.
pub fn weighted_correction(
    partition: &CasePartition,
    nath: &BivNormParams,
    lambda: f64,
) -> CorrectedParams {
    let mut out = CorrectedParams {
        lambda_hat: lambda,
        nath: *nath,
        weighted: *nath,
        weighting_applied: false,
        selected_quadrant: 0,
        notes: Vec::new(),
    };
    let (na, nb) = (partition.set_a.len(), partition.set_b.len());
    if na < 2 || nb < 2 {
        out.notes.push(CorrectionNote::WeightingSkipped {
            set_a: na,
            set_b: nb,
        });
        return out;
    }
    let a = PairSummary::from_points(&partition.set_a);
    let b = PairSummary::from_points(&partition.set_b);
    let m = WeightedMoments::new(&a, &b, lambda);
    let mu = [
        lambda * a.mean[0] + (1.0 - lambda) * b.mean[0],
        lambda * a.mean[1] + (1.0 - lambda) * b.mean[1],
    ];
    let var = [
        m.g[0] + m.h[0] - mu[0] * mu[0],
        m.g[1] + m.h[1] - mu[1] * mu[1],
    ];
    if !(var[0] > 0.0 && var[1] > 0.0) {
        out.notes.push(CorrectionNote::NonPositiveVariance);
        return out;
    }
    let raw_rho = (m.p + m.q - mu[0] * mu[1]) / (var[0] * var[1]).sqrt();
    let rho = if raw_rho.is_nan() {
        0.0
    } else {
        raw_rho.clamp(-WEIGHTED_RHO_LIMIT, WEIGHTED_RHO_LIMIT)
    };
    if rho != raw_rho {
        out.notes
            .push(CorrectionNote::RhoClamped { value: raw_rho });
    }
    match BivNormParams::new(mu[0], mu[1], var[0], var[1], rho) {
        Ok(p) => {
            out.weighted = p;
            out.weighting_applied = true;
        }
        Err(_) => out.notes.push(CorrectionNote::NonPositiveVariance),
    }
    out
}

/// Full correction pipeline for one dataset.
pub fn correct_case_distribution(data: &TrialDataset) -> Result<CorrectedParams> {
    let partition = partition_cases(data)?;
    correct_partition(&partition)
}

pub fn correct_partition(partition: &CasePartition) -> Result<CorrectedParams> {
    if partition.len() < 2 {
        return Err(Error::CorrectionUnavailable(format!(
            "{} observed case(s); at least 2 are needed",
            partition.len()
        )));
    }
    let mut notes = Vec::new();
    if partition.len() < SMALL_SAMPLE_CASES {
        notes.push(CorrectionNote::SmallSample {
            observed_cases: partition.len(),
        });
    }
    if partition.set_b.len() < FEW_INTERVAL_CASES {
        notes.push(CorrectionNote::FewIntervalCases {
            interval_cases: partition.set_b.len(),
        });
    }
    let fits = fit_quadrants(partition, &mut notes);
    let observed: Vec<[f64; 2]> = partition.observed().copied().collect();
    let best = select_best_fit(&fits, &observed, &mut notes)?;
    let lambda = lambda_hat(&best.params, partition.thresholds);
    let mut out = weighted_correction(partition, &best.params, lambda);
    out.selected_quadrant = best.quadrant;
    notes.append(&mut out.notes);
    out.notes = notes;
    Ok(out)
}
