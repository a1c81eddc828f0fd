mod support;

use pairscreen::gauss::{bvn_cdf, std_normal_cdf, std_normal_quantile};
use support::quantile_by_bisection;

#[test]
fn orthant_matches_arcsine_identity() {
    let err = support::bvn_arcsine_error();
    assert!(err <= 1e-7, "{err:e}");
}

#[test]
fn matches_quadrature_on_a_grid() {
    let err = support::bvn_quadrature_error();
    assert!(err <= 1e-7, "{err:e}");
}

#[test]
fn infinite_limits_reduce_to_margins() {
    for &x in &[-2.0, 0.3, 1.7] {
        let m = bvn_cdf(x, f64::INFINITY, 0.4).unwrap();
        assert!((m - std_normal_cdf(x)).abs() < 1e-14);
        assert_eq!(bvn_cdf(x, f64::NEG_INFINITY, 0.4).unwrap(), 0.0);
    }
}

#[test]
fn quantile_matches_bisection() {
    for &p in &[
        1e-12, 1e-6, 0.0001, 0.025, 0.22, 0.5, 0.78, 0.9999, 0.9999999,
    ] {
        let q = std_normal_quantile(p).unwrap();
        let b = quantile_by_bisection(p);
        assert!((q - b).abs() <= 1e-9 * (1.0 + b.abs()), "p {p}: {q} vs {b}");
    }
    assert!(std_normal_quantile(0.0).is_err());
    assert!(std_normal_quantile(1.0).is_err());
}
