//! Independent oracles shared by the property tests and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::PI;

use pairscreen::correct::{
    nath_mle, quadrant_rect, quadrant_sample_stats, weighted_correction, CasePartition,
};
use pairscreen::gauss::{
    bvn_cdf, std_normal_cdf, std_normal_pdf, BivNormParams, PairSummary, Rect,
};
use pairscreen::roc::{binormal_auc, var_diff_auc, ScoreMoments, TestMoments};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub fn draw(p: &BivNormParams, rng: &mut ChaCha8Rng) -> [f64; 2] {
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    let r = p.rho();
    [
        p.mu1() + p.sd(0) * z1,
        p.mu2() + p.sd(1) * (r * z1 + (1.0 - r * r).sqrt() * z2),
    ]
}

pub fn as_vec(p: &BivNormParams) -> [f64; 5] {
    [p.mu1(), p.mu2(), p.var1(), p.var2(), p.rho()]
}

/// Composite Simpson rule for int_{-12}^{x} phi(u) Phi((y - rho u) / sqrt(1 - rho^2)) du.
pub fn bvn_by_quadrature(x: f64, y: f64, rho: f64) -> f64 {
    let lo = -12.0;
    let hi = x.min(12.0);
    if hi <= lo {
        return 0.0;
    }
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let s = (1.0 - rho * rho).sqrt();
    let f = |u: f64| std_normal_pdf(u) * std_normal_cdf((y - rho * u) / s);
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

pub fn quantile_by_bisection(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if std_normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest error of bvn_cdf against the orthant arcsine identity.
pub fn bvn_arcsine_error() -> f64 {
    let mut worst = 0.0f64;
    let mut rho: f64 = -0.999;
    while rho <= 0.999 {
        let want = 0.25 + rho.asin() / (2.0 * PI);
        worst = worst.max((bvn_cdf(0.0, 0.0, rho).unwrap() - want).abs());
        rho += 0.037;
    }
    worst
}

/// Largest error of bvn_cdf against quadrature over a grid of limits and correlations.
pub fn bvn_quadrature_error() -> f64 {
    let points = [-3.5, -2.0, -0.7, 0.0, 0.4, 1.3, 2.6, 4.0];
    let rhos = [-0.95, -0.6, -0.25, 0.0, 0.3, 0.7, 0.92, 0.99];
    let mut worst = 0.0f64;
    for &x in &points {
        for &y in &points {
            for &r in &rhos {
                worst = worst.max((bvn_cdf(x, y, r).unwrap() - bvn_by_quadrature(x, y, r)).abs());
            }
        }
    }
    worst
}

/// |binormal_auc - Monte Carlo P(X_case > X_noncase)| for three score models.
pub fn auc_monte_carlo_errors(draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    [
        (1.1, 1.0, 0.0, 1.0),
        (0.4, 2.5, -0.3, 0.6),
        (2.0, 0.3, 0.5, 1.7),
    ]
    .into_iter()
    .map(|(m1, v1, m0, v0)| {
        let xc = Normal::new(m1, f64::sqrt(v1)).unwrap();
        let xn = Normal::new(m0, f64::sqrt(v0)).unwrap();
        let wins = (0..draws)
            .filter(|_| xc.sample(&mut rng) > xn.sample(&mut rng))
            .count();
        let mc = wins as f64 / draws as f64;
        (binormal_auc(ScoreMoments::new(m1, v1), ScoreMoments::new(m0, v0)) - mc).abs()
    })
    .collect()
}

/// Plug-in difference of binormal AUCs with n - 1 variances.
fn plug_in_diff(cases: &[[f64; 2]], noncases: &[[f64; 2]]) -> f64 {
    let (c, n) = (
        PairSummary::from_points(cases),
        PairSummary::from_points(noncases),
    );
    let auc = |j: usize| {
        binormal_auc(
            ScoreMoments::new(c.mean[j], c.sample_var(j)),
            ScoreMoments::new(n.mean[j], n.sample_var(j)),
        )
    };
    auc(0) - auc(1)
}

/// Relative error of the paired delta-method variance against the Monte
/// Carlo variance of the plug-in AUC difference, for five parameter sets.
pub fn variance_relative_errors(reps: usize, seed: u64) -> Vec<f64> {
    let sets = [
        (
            (1.09, 0.91, 1.0, 1.0, 0.3),
            (0.0, 0.0, 1.0, 1.0, 0.3),
            300,
            3000,
        ),
        (
            (1.2, 1.2, 1.0, 1.0, 0.6),
            (0.0, 0.0, 1.0, 1.0, 0.5),
            200,
            2000,
        ),
        (
            (0.8, 1.5, 1.5, 0.7, 0.0),
            (0.1, -0.2, 1.0, 1.3, 0.0),
            400,
            1500,
        ),
        (
            (1.6, 1.0, 0.8, 1.2, -0.3),
            (0.0, 0.3, 1.1, 0.9, 0.2),
            250,
            4000,
        ),
        (
            (0.6, 0.9, 1.0, 1.0, 0.8),
            (0.0, 0.0, 1.0, 1.0, 0.7),
            500,
            5000,
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sets.into_iter()
        .map(|(cp, np, n1, n0)| {
            let case = BivNormParams::new(cp.0, cp.1, cp.2, cp.3, cp.4).unwrap();
            let non = BivNormParams::new(np.0, np.1, np.2, np.3, np.4).unwrap();
            let mut cases = vec![[0.0; 2]; n1];
            let mut noncases = vec![[0.0; 2]; n0];
            let diffs: Vec<f64> = (0..reps)
                .map(|_| {
                    cases.iter_mut().for_each(|x| *x = draw(&case, &mut rng));
                    noncases.iter_mut().for_each(|x| *x = draw(&non, &mut rng));
                    plug_in_diff(&cases, &noncases)
                })
                .collect();
            let mean = diffs.iter().sum::<f64>() / reps as f64;
            let mc = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let t = |j: usize| TestMoments {
                case: ScoreMoments::new(case.mean(j), case.var(j)),
                noncase: ScoreMoments::new(non.mean(j), non.var(j)),
            };
            let v = var_diff_auc(&t(0), &t(1), non.rho(), case.rho(), n1, n0).unwrap();
            (v.var_diff - mc).abs() / mc
        })
        .collect()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(-2.0..2.0);
            [
                shift + u + rng.random_range(-1.0..1.0),
                shift + 0.5 * u + rng.random_range(-1.5..1.5),
            ]
        })
        .collect()
}

/// Moments of the population that puts weight lambda / |A| on every point of
/// A and (1 - lambda) / |B| on every point of B.
pub fn pooled_mixture(a: &[[f64; 2]], b: &[[f64; 2]], lambda: f64) -> [f64; 5] {
    let weighted: Vec<(f64, [f64; 2])> = a
        .iter()
        .map(|&x| (lambda / a.len() as f64, x))
        .chain(b.iter().map(|&x| ((1.0 - lambda) / b.len() as f64, x)))
        .collect();
    let m1: f64 = weighted.iter().map(|(w, x)| w * x[0]).sum();
    let m2: f64 = weighted.iter().map(|(w, x)| w * x[1]).sum();
    let v1: f64 = weighted.iter().map(|(w, x)| w * (x[0] - m1).powi(2)).sum();
    let v2: f64 = weighted.iter().map(|(w, x)| w * (x[1] - m2).powi(2)).sum();
    let c: f64 = weighted
        .iter()
        .map(|(w, x)| w * (x[0] - m1) * (x[1] - m2))
        .sum();
    [m1, m2, v1, v2, c / (v1 * v2).sqrt()]
}

/// Largest difference between the weighted correction and the pooled mixture.
pub fn mixture_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nath = BivNormParams::standard();
    let mut worst = 0.0f64;
    for (na, nb, lambda) in [(40, 7, 0.83), (300, 25, 0.5), (12, 90, 0.11), (3, 2, 0.97)] {
        let a = random_points(&mut rng, na, 1.5);
        let b = random_points(&mut rng, nb, -0.5);
        let part = CasePartition {
            thresholds: [f64::NAN; 2],
            set_a: a.clone(),
            set_b: b.clone(),
            quadrants: Default::default(),
        };
        let w = weighted_correction(&part, &nath, lambda);
        assert!(w.weighting_applied);
        let want = pooled_mixture(&a, &b, lambda);
        for (got, want) in as_vec(&w.weighted).into_iter().zip(want) {
            worst = worst.max((got - want).abs());
        }
    }
    worst
}

fn start_from(points: &[[f64; 2]]) -> BivNormParams {
    let s = quadrant_sample_stats(points).unwrap();
    BivNormParams::new(
        s.mean[0],
        s.mean[1],
        s.sd[0].powi(2),
        s.sd[1].powi(2),
        s.corr.clamp(-0.999999, 0.999999),
    )
    .unwrap()
}

/// Largest difference between an untruncated fit and the closed-form MLE.
pub fn untruncated_fit_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = BivNormParams::new(0.7, -1.3, 2.0, 0.5, -0.4).unwrap();
    let pts: Vec<_> = (0..3000).map(|_| draw(&truth, &mut rng)).collect();
    let fit = nath_mle(&pts, &Rect::plane(), &BivNormParams::standard()).unwrap();
    if !fit.converged {
        return f64::INFINITY;
    }
    let s = PairSummary::from_points(&pts);
    let want = [s.mean[0], s.mean[1], s.m2[0], s.m2[1], s.corr()];
    as_vec(&fit.params)
        .into_iter()
        .zip(want)
        .fold(0.0, |m, (g, w)| m.max((g - w).abs()))
}

/// Fits quadrant-truncated samples of random parameter sets and returns the
/// largest |estimate - truth| / bootstrap SE over all sets and parameters.
/// Non-converged fits count as infinitely far.
pub fn truncated_recovery_worst_z(sets: usize, n: usize, boot: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..sets {
        let truth = BivNormParams::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.5..2.0),
            rng.random_range(0.5..2.0),
            rng.random_range(-0.6..0.8),
        )
        .unwrap();
        let quadrant = rng.random_range(1..=4usize);
        let thresholds = [
            truth.mu1() + truth.sd(0) * rng.random_range(-0.5..0.5),
            truth.mu2() + truth.sd(1) * rng.random_range(-0.5..0.5),
        ];
        let rect = quadrant_rect(quadrant, thresholds).unwrap();
        let mut pts = Vec::with_capacity(n);
        while pts.len() < n {
            let x = draw(&truth, &mut rng);
            if rect.contains(x) {
                pts.push(x);
            }
        }
        let fit = nath_mle(&pts, &rect, &start_from(&pts)).unwrap();
        if !fit.converged {
            return f64::INFINITY;
        }
        let est = as_vec(&fit.params);
        let mut sum = [0.0; 5];
        let mut sum2 = [0.0; 5];
        let mut resample = vec![[0.0; 2]; n];
        for _ in 0..boot {
            for r in resample.iter_mut() {
                *r = pts[rng.random_range(0..n)];
            }
            let v = as_vec(&nath_mle(&resample, &rect, &fit.params).unwrap().params);
            for i in 0..5 {
                sum[i] += v[i];
                sum2[i] += v[i] * v[i];
            }
        }
        let want = as_vec(&truth);
        let b = boot as f64;
        for i in 0..5 {
            let m = sum[i] / b;
            let se = ((sum2[i] / b - m * m) * b / (b - 1.0)).sqrt();
            worst = worst.max((est[i] - want[i]).abs() / se);
        }
    }
    worst
}
