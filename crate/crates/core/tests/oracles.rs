//! Values frozen from independent 40-digit quadrature and root finding.
#![allow(clippy::excessive_precision)]

use std::sync::Arc;

use blowup_core::{kappa_alpha, tail_time_integral, ProblemParams, ScalingMap, TermContext};

fn ctx(p: f64, alpha: f64, s_max: f64) -> TermContext {
    let prm = ProblemParams::desk(p, alpha).unwrap();
    TermContext::new(Arc::new(ScalingMap::build(&prm, s_max).unwrap()))
}

#[test]
fn log_rate_at_forty() {
    let cases = [
        (2.0, 1.0, 35.70465518599778652),
        (3.0, 1.0, 17.85232759299889326),
        (2.0, -1.0, 44.51110350993088991),
    ];
    for (p, a, want) in cases {
        let prm = ProblemParams::desk(p, a).unwrap();
        let map = ScalingMap::build(&prm, 40.0).unwrap();
        let got = map.ell_at(40.0).unwrap();
        assert!((got - want).abs() <= 1e-12 * want, "p={p} a={a}: {got} vs {want}");
    }
}

#[test]
fn tail_integral_at_hundred() {
    let prm = ProblemParams::desk(2.0, 1.0).unwrap();
    let got = tail_time_integral(100.0, &prm).unwrap();
    let want = 9.148648353716833961e-4;
    assert!((got - want).abs() <= 1e-12 * want, "{got}");
}

/// `R` is an O(1/s^2) remainder of O(1) terms, so it is compared in absolute terms.
#[test]
fn remainder_against_symbolic_derivatives() {
    let c = ctx(2.0, 1.0, 110.0);
    let cases = [(0.0, 100.0, 3.125e-5), (3.0, 100.0, 2.971674101287201348e-5)];
    for (y, s, want) in cases {
        let got = c.term_r(y, s);
        assert!((got - want).abs() <= 2e-16, "y={y}: {got}");
    }
    let c3 = ctx(3.0, 1.0, 60.0);
    let got = c3.term_r(7.0, 50.0);
    let want = -1.258756636485836461e-4;
    assert!((got - want).abs() <= 2e-16, "{got}");
}

#[test]
fn log_ratio_half_amplitude() {
    let c = ctx(3.0, 1.0, 60.0);
    let got = c.stable_log_ratio(0.5, 50.0).unwrap();
    let want = 0.9695108993004317547;
    assert!((got - want).abs() <= 1e-13, "{got}");
    let ell = c.scaling().ell_at(50.0).unwrap();
    assert!((ell - 22.73426124929165041).abs() <= 1e-12 * ell);
}

#[test]
fn kappa_values() {
    let cases = [(2.0, 1.0, 0.5), (3.0, 1.0, std::f64::consts::FRAC_1_SQRT_2), (2.0, -1.0, 2.0), (3.0, 0.0, std::f64::consts::FRAC_1_SQRT_2)];
    for (p, a, want) in cases {
        let prm = ProblemParams::desk(p, a).unwrap();
        assert!((kappa_alpha(&prm).unwrap() - want).abs() < 1e-15);
    }
}
