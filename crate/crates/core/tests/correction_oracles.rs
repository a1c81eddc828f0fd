mod support;

use pairscreen::analysis::{run_analysis, AnalysisKind, TestSettings};
use pairscreen::correct::{
    correct_case_distribution, lambda_hat, weighted_correction, CasePartition, WeightedMoments,
};
use pairscreen::gauss::{BivNormParams, PairSummary};
use pairscreen::harness::standard_score_model;
use pairscreen::registry::Strategies;
use pairscreen::transform::TransformSpec;
use pairscreen::trial::{Referral, ScenarioConfig, TrialGenerator};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::random_points;

#[test]
fn weighted_moments_equal_the_pooled_mixture() {
    let err = support::mixture_error(17);
    assert!(err < 1e-10, "{err:e}");
}

#[test]
fn unit_weight_returns_set_a_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_points(&mut rng, 50, 1.0);
    let b = random_points(&mut rng, 20, 0.0);
    let part = CasePartition {
        thresholds: [0.0; 2],
        set_a: a.clone(),
        set_b: b,
        quadrants: Default::default(),
    };
    let w = weighted_correction(&part, &BivNormParams::standard(), 1.0).weighted;
    let s = PairSummary::from_points(&a);
    assert!((w.mu1() - s.mean[0]).abs() < 1e-12);
    assert!((w.var2() - s.m2[1]).abs() < 1e-12);
    assert!((w.rho() - s.corr()).abs() < 1e-12);
}

#[test]
fn lambda_hat_examples() {
    let p = BivNormParams::new(0.3, -0.2, 2.0, 0.5, 0.0).unwrap();
    assert_eq!(lambda_hat(&p, [f64::NEG_INFINITY; 2]), 1.0);
    assert!((lambda_hat(&p, [0.3, -0.2]) - 0.75).abs() < 1e-12);
}

proptest! {
    #[test]
    fn variance_identity_holds(
        seed in any::<u64>(),
        na in 2usize..60,
        nb in 2usize..60,
        lambda in 0.01f64..0.99,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = PairSummary::from_points(&random_points(&mut rng, na, 1.0));
        let b = PairSummary::from_points(&random_points(&mut rng, nb, -1.0));
        let m = WeightedMoments::new(&a, &b, lambda);
        let mu = lambda * a.mean[0] + (1.0 - lambda) * b.mean[0];
        let var = lambda * a.m2[0] + (1.0 - lambda) * b.m2[0]
            + lambda * (1.0 - lambda) * (a.mean[0] - b.mean[0]).powi(2);
        prop_assert!((var + mu * mu - (m.g[0] + m.h[0])).abs() < 1e-10);
    }

    #[test]
    fn weighting_needs_two_points_in_each_set(na in 0usize..4, nb in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64((na * 10 + nb) as u64);
        let part = CasePartition {
            thresholds: [0.0; 2],
            set_a: random_points(&mut rng, na, 1.0),
            set_b: random_points(&mut rng, nb, -1.0),
            quadrants: Default::default(),
        };
        let nath = BivNormParams::new(0.5, 0.5, 1.0, 1.0, 0.2).unwrap();
        let w = weighted_correction(&part, &nath, 0.7);
        prop_assert_eq!(w.weighting_applied, na >= 2 && nb >= 2);
        if !w.weighting_applied {
            prop_assert_eq!(w.weighted, nath);
        }
    }

    #[test]
    fn lambda_hat_is_a_probability(
        m1 in -3.0f64..3.0, m2 in -3.0f64..3.0, r in -0.99f64..0.99,
        a1 in -5.0f64..5.0, a2 in -5.0f64..5.0,
    ) {
        let p = BivNormParams::new(m1, m2, 1.3, 0.8, r).unwrap();
        let l = lambda_hat(&p, [a1, a2]);
        prop_assert!((0.0..=1.0).contains(&l));
        prop_assert!(lambda_hat(&p, [a1 - 1.0, a2 - 1.0]) >= l);
    }
}

fn demo_config(reps: usize) -> ScenarioConfig {
    let (case, noncase) = standard_score_model([0.77, 0.71], 0.3, 0.3).unwrap();
    ScenarioConfig {
        n: 50_000,
        prevalence: 0.01,
        signs_rate: 0.1,
        case_params: case,
        noncase_params: noncase,
        referral: Referral::Ascertainment {
            t1: 0.0001,
            t2: 0.97,
            calibration: "marginal".into(),
        },
        transform: TransformSpec::default(),
        reps,
        seed: 2024,
        alpha: 0.05,
        variance: Default::default(),
    }
}

#[test]
fn correction_reduces_bias_in_the_demonstration_design() {
    let cfg = demo_config(1000);
    let gen = TrialGenerator::new(&cfg, Strategies::builtin()).unwrap();
    let settings = TestSettings::default();
    let mut sums = [0.0; 3];
    for rep in 0..cfg.reps as u64 {
        let data = gen.draw(rep);
        for (k, kind) in AnalysisKind::ALL.into_iter().enumerate() {
            sums[k] += run_analysis(&data, kind, &settings).unwrap().diff;
        }
    }
    let [t, o, c] = sums.map(|s| s / cfg.reps as f64);
    assert!(
        (c - t).abs() < (o - t).abs(),
        "true {t}, observed {o}, corrected {c}"
    );
}

#[test]
fn unbiased_trial_recovers_case_parameters() {
    let mut cfg = demo_config(40);
    cfg.prevalence = 0.14;
    cfg.referral = Referral::Ascertainment {
        t1: 0.8,
        t2: 0.8,
        calibration: "marginal".into(),
    };
    let truth = cfg.case_params;
    let gen = TrialGenerator::new(&cfg, Strategies::builtin()).unwrap();
    let est: Vec<[f64; 5]> = (0..cfg.reps as u64)
        .map(|rep| {
            let p = correct_case_distribution(&gen.draw(rep)).unwrap().weighted;
            [p.mu1(), p.mu2(), p.var1(), p.var2(), p.rho()]
        })
        .collect();
    let want = [
        truth.mu1(),
        truth.mu2(),
        truth.var1(),
        truth.var2(),
        truth.rho(),
    ];
    let n = est.len() as f64;
    for i in 0..5 {
        let mean = est.iter().map(|e| e[i]).sum::<f64>() / n;
        let sd = (est.iter().map(|e| (e[i] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let se = sd / n.sqrt();
        assert!(
            (mean - want[i]).abs() < 3.0 * se,
            "component {i}: {mean} vs {}",
            want[i]
        );
    }
}
