use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use blowup_core::reconstruction::{to_physical, to_similarity};
use blowup_core::spectral::decompose;
use blowup_core::{cutoff_chi, Geometry, Grid, ProblemParams, ScalingMap, ShrinkingSetSpec, TermContext};

fn ctx(p: f64, alpha: f64) -> TermContext {
    let prm = ProblemParams::desk(p, alpha).unwrap();
    TermContext::new(Arc::new(ScalingMap::build(&prm, 60.0).unwrap()))
}

fn shared() -> &'static [TermContext] {
    static CELL: OnceLock<Vec<TermContext>> = OnceLock::new();
    CELL.get_or_init(|| vec![ctx(3.0, 1.0), ctx(2.0, -1.0), ctx(2.0, 1.0), ctx(1.5, 2.5)])
}

fn small_grid() -> Arc<Grid> {
    static CELL: OnceLock<Arc<Grid>> = OnceLock::new();
    CELL.get_or_init(|| Arc::new(Grid::radial(1, 120.0, 0.1).unwrap())).clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ratio_is_even_and_unit_at_one(which in 0usize..4, s in 20.0f64..59.0, z in -50.0f64..50.0) {
        let at = shared()[which].at(s).unwrap();
        prop_assert_eq!(at.log_ratio(1.0), 1.0);
        prop_assert_eq!(at.log_ratio(-1.0), 1.0);
        prop_assert_eq!(at.log_ratio(z), at.log_ratio(-z));
        prop_assert!(at.log_ratio(z) > 0.0);
        prop_assert_eq!(at.l(1.0), 0.0);
    }

    #[test]
    fn l_matches_ratio(which in 0usize..4, s in 20.0f64..59.0, v in 0.05f64..20.0) {
        let at = shared()[which].at(s).unwrap();
        let direct = at.log_ratio(v) - 1.0;
        prop_assert!((at.l(v) - direct).abs() <= 1e-13 * (1.0 + direct.abs()));
    }

    #[test]
    fn quadratic_b_for_p_two(q in -0.5f64..2.0, y in 0.0f64..30.0, s in 20.0f64..59.0) {
        let c = &shared()[2];
        let phi = c.profile().varphi(y, s);
        prop_assume!(q + phi >= 0.0);
        let b = c.term_b(q, y, s);
        prop_assert!((b - q * q).abs() <= 1e-12 * (1.0 + q * q), "{} vs {}", b, q * q);
    }

    #[test]
    fn b_is_superlinear(which in 0usize..4, q in -0.3f64..0.3, y in 0.0f64..5.0, s in 20.0f64..59.0) {
        let c = &shared()[which];
        let p = c.params().p;
        let b = c.term_b(q, y, s).abs();
        prop_assert!(b <= 4.0 * p * q.abs().powf(p.min(2.0)) + 1e-15);
    }

    #[test]
    fn log_rate_is_increasing(which in 0usize..4, s in 20.0f64..58.0, ds in 0.01f64..1.0) {
        let map = shared()[which].scaling();
        prop_assert!(map.ell_at(s + ds).unwrap() > map.ell_at(s).unwrap());
        prop_assert!(map.h_at(s).unwrap() > 0.0);
    }

    #[test]
    fn cutoff_is_monotone(y in 0.0f64..200.0, dy in 0.0f64..20.0, s in 1.0f64..100.0, k in 1.0f64..20.0) {
        let a = cutoff_chi(y, s, k);
        let b = cutoff_chi(y + dy, s, k);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a);
        prop_assert_eq!(a, cutoff_chi(-y, s, k));
    }

    #[test]
    fn decomposition_is_homogeneous(c0 in -1e-2f64..1e-2, c2 in -1e-3f64..1e-3, c4 in -1e-5f64..1e-5, scale in -3.0f64..3.0) {
        let g = small_grid();
        let q: Vec<f64> = g.nodes().iter().map(|&y| c0 + c2 * (y * y - 2.0) + c4 * y.powi(4)).collect();
        let qs: Vec<f64> = q.iter().map(|v| scale * v).collect();
        let a = decompose(&q, 20.0, g.clone(), 10.0).unwrap();
        let b = decompose(&qs, 20.0, g, 10.0).unwrap();
        let tol = |x: f64| 1e-12 * (1.0 + x.abs());
        prop_assert!((b.q0 - scale * a.q0).abs() <= tol(a.q0));
        prop_assert!((b.q2 - scale * a.q2).abs() <= tol(a.q2));
        prop_assert!((b.qminus_norm - scale.abs() * a.qminus_norm).abs() <= tol(a.qminus_norm));
        prop_assert!((b.qe_norm - scale.abs() * a.qe_norm).abs() <= tol(a.qe_norm));
    }

    #[test]
    fn shrinking_bounds_shrink(s in 20.0f64..200.0, a in 1.0f64..100.0) {
        let spec = ShrinkingSetSpec::new(a);
        let now = spec.bounds(s);
        let later = spec.bounds(s + 10.0);
        for i in 0..5 {
            prop_assert!(later[i] < now[i]);
        }
    }

    #[test]
    fn coordinates_round_trip(y in -150.0f64..150.0, s in 20.0f64..60.0) {
        let (x, t) = to_physical(y, s);
        let (y2, s2) = to_similarity(x, t).unwrap();
        prop_assert!((s2 - s).abs() <= 4.0 * f64::EPSILON * s);
        prop_assert!((y2 - y).abs() <= 8.0 * f64::EPSILON * y.abs());
    }
}

#[test]
fn line_and_radial_grids_agree_on_even_data() {
    let line = Grid::line(60.0, 0.1).unwrap();
    let radial = Grid::radial(1, 60.0, 0.1).unwrap();
    assert_eq!(line.geometry(), Geometry::Line);
    let f = |y: f64| 1.0 + 0.1 * y * y;
    let a = line.integrate_rho(&line.nodes().iter().map(|&y| f(y)).collect::<Vec<_>>());
    let b = radial.integrate_rho(&radial.nodes().iter().map(|&y| f(y)).collect::<Vec<_>>());
    assert!((a - b).abs() < 1e-12 && (a - 1.2).abs() < 1e-12);
}
