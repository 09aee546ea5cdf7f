use std::sync::Arc;

use blowup_core::integrator::verify_kernel_bounds;
use blowup_core::spectral::HermiteBasis;
use blowup_core::{
    rhs_w, Dynamics, Error, Geometry, Grid, GridState, Integrator, ProblemParams, ScalingMap, ShrinkingSetSpec,
    TermContext,
};

fn context(p: f64, alpha: f64, s_max: f64) -> Arc<TermContext> {
    let prm = ProblemParams::desk(p, alpha).unwrap();
    Arc::new(TermContext::new(Arc::new(ScalingMap::build(&prm, s_max).unwrap())))
}

fn grid(ctx: &TermContext, s_max: f64, dy: f64) -> Arc<Grid> {
    Arc::new(Grid::for_run(ctx.params(), Geometry::Radial { n: 1 }, s_max, dy).unwrap())
}

#[test]
fn constant_states_are_steady() {
    for alpha in [0.0, 1.0, -1.0] {
        let ctx = context(3.0, alpha, 25.0);
        let g = grid(&ctx, 25.0, 0.1);
        let mut integ = Integrator::new(ctx.clone(), g.clone(), Dynamics::W, g.step_limit()).unwrap();
        for c in [0.0, 1.0, -1.0] {
            let mut st = GridState::from_fn(20.0, g.clone(), |_| c);
            integ.advance(&mut st, 21.0).unwrap();
            let drift = st.w.iter().map(|w| (w - c).abs()).fold(0.0, f64::max);
            assert!(drift <= 1e-12, "alpha={alpha} c={c}: {drift}");
        }
    }
}

#[test]
fn linear_operator_spectrum() {
    let ctx = context(3.0, 1.0, 25.0);
    let g = grid(&ctx, 22.0, 0.1);
    let basis = HermiteBasis::new(4);
    let mut integ = Integrator::new(ctx.clone(), g.clone(), Dynamics::Linear, g.step_limit()).unwrap();
    for m in [0usize, 2, 4] {
        let mut st = GridState::from_fn(20.0, g.clone(), |y| basis.eval(m, y));
        let coeff = |st: &GridState| {
            let f: Vec<f64> = st.w.iter().zip(g.nodes()).map(|(w, &y)| w * basis.eval(m, y)).collect();
            g.integrate_rho(&f) / HermiteBasis::norm_sq(m)
        };
        let c0 = coeff(&st);
        integ.advance(&mut st, 21.0).unwrap();
        let growth = coeff(&st) / c0;
        let want = HermiteBasis::eigenvalue(m).exp();
        assert!((growth / want - 1.0).abs() < 1e-4, "m={m}: {growth} vs {want}");
    }
}

/// `rhs_w(phi) - d_s phi` must reproduce `R + D(0)` up to the stencil error.
#[test]
fn profile_residual_matches_terms() {
    let ctx = context(3.0, 1.0, 40.0);
    let s = 30.0;
    let at = ctx.at(s).unwrap();
    let profile = *ctx.profile();
    let mut errs = Vec::new();
    for dy in [0.2, 0.1] {
        let g = grid(&ctx, 35.0, dy);
        let st = GridState::from_fn(s, g.clone(), |y| profile.varphi(y, s));
        let rhs = rhs_w(&st, &ctx).unwrap();
        let interior = g.len() - 8;
        let mut worst: f64 = 0.0;
        for (i, &y) in g.nodes().iter().enumerate().take(interior) {
            let d = profile.derivs(y, s);
            let want = at.r(y) + at.d(0.0, y).unwrap();
            worst = worst.max((rhs[i] - d.ds - want).abs());
        }
        errs.push(worst);
    }
    let order = (errs[0] / errs[1]).log2();
    assert!(errs[1] < 1e-5, "{errs:?}");
    assert!(order > 1.8, "order {order} from {errs:?}");
}

#[test]
fn rejects_unstable_step() {
    let ctx = context(3.0, 1.0, 25.0);
    let g = grid(&ctx, 22.0, 0.1);
    assert!(matches!(
        Integrator::new(ctx, g, Dynamics::W, 5e-3),
        Err(Error::Cfl { .. })
    ));
}

#[test]
fn blowing_state_is_reported_as_poisoned() {
    let ctx = context(3.0, 0.0, 25.0);
    let g = grid(&ctx, 22.0, 0.1);
    let mut integ = Integrator::new(ctx.clone(), g.clone(), Dynamics::W, g.step_limit()).unwrap();
    let st = GridState::from_fn(20.0, g, |_| 40.0);
    let spec = ShrinkingSetSpec::new(20.0);
    match integ.run(st, 21.0, &spec, 0.1, false) {
        Err(Error::PoisonedState { last_valid_s, partial }) => {
            assert!((20.0..21.0).contains(&last_valid_s));
            assert!(!partial.observations.is_empty());
        }
        other => panic!("expected a poisoned state, got {:?}", other.map(|r| r.s_end())),
    }
}

fn modes_after(ctx: &Arc<TermContext>, g: Arc<Grid>, ds: f64, dynamics: Dynamics, s_end: f64) -> [f64; 5] {
    let s0 = 20.0;
    let profile = *ctx.profile();
    let bump = |y: f64| 0.02 * (-y * y / 8.0).exp();
    let st = match dynamics {
        Dynamics::W => GridState::from_fn(s0, g.clone(), |y| profile.varphi(y, s0) + bump(y)),
        _ => GridState::from_fn(s0, g.clone(), bump),
    };
    let mut integ = Integrator::new(ctx.clone(), g, dynamics, ds).unwrap();
    let spec = ShrinkingSetSpec::new(ctx.params().a);
    let rec = integ.run(st, s_end, &spec, 0.5, false).unwrap();
    rec.observations.last().unwrap().modes.components()
}

#[test]
fn far_boundary_is_invisible() {
    let ctx = context(3.0, 1.0, 25.0);
    let near = grid(&ctx, 22.0, 0.1);
    let far = Arc::new(Grid::radial(1, 2.0 * near.y_max(), 0.1).unwrap());
    let ds = far.step_limit();
    let a = modes_after(&ctx, near, ds, Dynamics::W, 22.0);
    let b = modes_after(&ctx, far, ds, Dynamics::W, 22.0);
    for i in 0..5 {
        assert!((a[i] - b[i]).abs() < 1e-6, "component {i}: {} vs {}", a[i], b[i]);
    }
}

#[test]
fn w_and_q_routes_agree() {
    let ctx = context(3.0, 1.0, 25.0);
    let g = grid(&ctx, 22.0, 0.1);
    let ds = g.step_limit();
    let a = modes_after(&ctx, g.clone(), ds, Dynamics::W, 21.0);
    let b = modes_after(&ctx, g, ds, Dynamics::Q, 21.0);
    for i in 0..5 {
        assert!((a[i] - b[i]).abs() <= 1e-6 + 1e-4 * a[i].abs(), "component {i}: {} vs {}", a[i], b[i]);
    }
}

#[test]
fn refinement_is_second_order() {
    let ctx = context(3.0, 1.0, 25.0);
    let dys = [0.2, 0.1, 0.05];
    let runs: Vec<[f64; 5]> = dys
        .iter()
        .map(|&dy| {
            let g = grid(&ctx, 22.0, dy);
            let ds = g.step_limit();
            modes_after(&ctx, g, ds, Dynamics::W, 21.0)
        })
        .collect();
    for i in [0usize, 2] {
        let e1 = (runs[0][i] - runs[1][i]).abs();
        let e2 = (runs[1][i] - runs[2][i]).abs();
        let order = (e1 / e2).log2();
        assert!(order >= 1.8, "component {i}: order {order} ({e1:e}, {e2:e})");
    }
}

#[test]
fn kernel_bounds() {
    let ctx = context(3.0, 1.0, 63.0);
    let g = grid(&ctx, 62.0, 0.1);
    let zero = GridState::from_fn(30.0, g.clone(), |_| 0.0);
    let rep = verify_kernel_bounds(&zero, 1.0, ctx.clone(), g.step_limit()).unwrap();
    assert!(rep.series.iter().all(|e| e.1 == 0.0 && e.2 == 0.0));

    let basis = HermiteBasis::new(2);
    let fitted: Vec<f64> = [30.0, 60.0]
        .iter()
        .map(|&sigma| {
            let v = GridState::from_fn(sigma, g.clone(), |y| 1e-4 * basis.eval(2, y));
            verify_kernel_bounds(&v, 1.0, ctx.clone(), g.step_limit()).unwrap().c_minus
        })
        .collect();
    assert!(fitted.iter().all(|c| c.is_finite() && *c > 0.0), "{fitted:?}");
    let spread = fitted[0].max(fitted[1]) / fitted[0].min(fitted[1]);
    assert!(spread <= 2.0, "{fitted:?}");

    let sigma: f64 = 30.0;
    let k = ctx.params().k;
    let edge = k * sigma.sqrt();
    let outer = GridState::from_fn(sigma, g.clone(), |y| if y.abs() >= edge { 1e-3 } else { 0.0 });
    let rep = verify_kernel_bounds(&outer, 1.0, ctx.clone(), g.step_limit()).unwrap();
    let rate = rep.outer_decay_rate.unwrap();
    let p = ctx.params().p;
    assert!(rate >= 0.5 / p && rate <= 2.0 / p, "rate {rate}");
}
