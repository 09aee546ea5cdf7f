//! Back to physical variables: `u(x, t) = psi(t) w(x / sqrt(T - t), -ln(T - t))`
//! with `T = 0`, and the two convergence statements checked on trajectories.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridState;
use crate::integrator::TrajectoryRecord;
use crate::numerics::linear_fit;
use crate::scaling::ScalingMap;
use crate::terms::Profile;

/// Minimal run length past `s0` before the residual is meaningful.
pub const MIN_SURVIVAL: f64 = 5.0;

/// `(y, s) -> (x, t)` with `t = -e^{-s}` and `x = y e^{-s/2}`.
pub fn to_physical(y: f64, s: f64) -> (f64, f64) {
    (y * (-0.5 * s).exp(), -(-s).exp())
}

/// `(x, t) -> (y, s)` for `t < 0`.
pub fn to_similarity(x: f64, t: f64) -> Result<(f64, f64)> {
    if !(t < 0.0) {
        return Err(Error::Domain(format!("t = {t} is not before the blowup time 0")));
    }
    let s = -(-t).ln();
    Ok((x / (-t).sqrt(), s))
}

#[derive(Debug, Clone, Serialize)]
pub struct PhysicalSnapshot {
    pub t: f64,
    pub x_nodes: Vec<f64>,
    pub u_values: Vec<f64>,
}

impl PhysicalSnapshot {
    pub fn from_state(state: &GridState, scaling: &ScalingMap) -> Result<Self> {
        let ell = scaling.ell_at(state.s)?;
        let psi = ell.exp();
        let (_, t) = to_physical(0.0, state.s);
        let x_nodes = state.grid.nodes().iter().map(|&y| to_physical(y, state.s).0).collect();
        let u_values = state.w.iter().map(|w| psi * w).collect();
        Ok(Self { t, x_nodes, u_values })
    }

    /// `u(x)` by linear interpolation between nodes.
    pub fn u_at(&self, x: f64) -> Option<f64> {
        let xs = &self.x_nodes;
        let x = if xs[0] >= 0.0 { x.abs() } else { x };
        if x < xs[0] || x > *xs.last()? {
            return None;
        }
        let i = xs.partition_point(|&v| v <= x).min(xs.len() - 1).max(1);
        let (x0, x1) = (xs[i - 1], xs[i]);
        let f = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        Some(self.u_values[i - 1] * (1.0 - f) + self.u_values[i] * f)
    }
}

fn require_survival(traj: &TrajectoryRecord) -> Result<f64> {
    let s0 = traj.s_start();
    let last_in = traj
        .observations
        .iter()
        .take_while(|o| o.membership.member)
        .last()
        .map(|o| o.s())
        .unwrap_or(s0);
    if last_in < s0 + MIN_SURVIVAL - 1e-9 {
        return Err(Error::NotSurvived(format!(
            "trajectory stays in the shrinking set only until s = {last_in} (needs {})",
            s0 + MIN_SURVIVAL
        )));
    }
    Ok(last_in)
}

/// `(s, sqrt(s) sup_y |w - f0(y/sqrt s)|)` along the in-set part of the run.
pub fn theorem_residual(traj: &TrajectoryRecord) -> Result<Vec<(f64, f64)>> {
    let last_in = require_survival(traj)?;
    Ok(traj
        .observations
        .iter()
        .filter(|o| o.s() <= last_in + 1e-9)
        .map(|o| (o.s(), o.s().sqrt() * o.sup_w_minus_f0))
        .collect())
}

/// Residual of the bare profile: `sqrt(s) sup |phi - f0| = n sqrt(s) / (2ps)`.
pub fn profile_residual(profile: &Profile, s: f64) -> f64 {
    s.sqrt() * profile.shift(s)
}

/// `(s, s * wbar2(s))`, which should approach `-1/(4p)`.
pub fn inner_coefficient_series(traj: &TrajectoryRecord) -> Vec<(f64, f64)> {
    traj.observations.iter().map(|o| (o.s(), o.s() * o.wbar2)).collect()
}

/// `(s, sqrt(s) |u(0,t)/psi(t) - 1| / A)`; note `u(0,t)/psi(t) = w(0,s)`.
pub fn center_tracking(traj: &TrajectoryRecord) -> Vec<(f64, f64)> {
    let a = traj.params.a;
    traj.observations
        .iter()
        .map(|o| (o.s(), o.s().sqrt() * (o.center_w - 1.0).abs() / a))
        .collect()
}

/// Least-squares slope of `values` against `s`.
pub fn trend_slope(series: &[(f64, f64)]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = series.iter().copied().unzip();
    linear_fit(&xs, &ys).map(|(_, b)| b)
}

/// Whether consecutive values never rise by more than `rel_tol` of the current value.
pub fn is_non_increasing(series: &[(f64, f64)], rel_tol: f64) -> bool {
    series
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 + rel_tol * w[0].1.abs())
}

/// `[(p-1)^2 x^2 / (8p |ln x|)]^{-1/(p-1)} (4 |ln x| / (p-1))^{-alpha/(p-1)}` for `0 < |x| < 1`.
pub fn final_profile_formula(x: f64, p: f64, alpha: f64) -> Option<f64> {
    let ax = x.abs();
    if !(ax > 0.0 && ax < 1.0) {
        return None;
    }
    let l = -ax.ln();
    let m = 1.0 / (p - 1.0);
    let base = (p - 1.0) * (p - 1.0) * ax * ax / (8.0 * p * l);
    Some(base.powf(-m) * (4.0 * l / (p - 1.0)).powf(-alpha * m))
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileSample {
    pub x: f64,
    pub u_star: Option<f64>,
    pub formula_ratio: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalProfile {
    pub s_last: f64,
    pub t_last: f64,
    /// Physical annulus `[x_lo, x_hi]` where the profile is resolvable.
    pub annulus: (f64, f64),
    pub samples: Vec<ProfileSample>,
    /// Log-log slope fitted over the resolvable samples.
    pub slope: Option<f64>,
    pub expected_slope: f64,
    /// `(x, measured u*(x)/u*(2x), predicted ratio)`.
    pub dyadic: Vec<(f64, f64, f64)>,
}

impl FinalProfile {
    pub const CSV_HEADER: &'static str = "x,u_star,formula_ratio";

    pub fn csv_rows(&self) -> Vec<String> {
        self.samples
            .iter()
            .filter_map(|s| Some(format!("{:e},{:e},{:e}", s.x, s.u_star?, s.formula_ratio?)))
            .collect()
    }
}

/// Resolvable annulus at the final time: similarity coordinate between
/// `z_min sqrt(s)` and the grid edge, mapped to `x`.
pub fn resolvable_annulus(traj: &TrajectoryRecord, z_min: f64) -> (f64, f64) {
    let s = traj.s_end();
    let y_hi = traj.final_state.grid.y_max();
    let y_lo = (z_min * s.sqrt()).min(y_hi);
    (to_physical(y_lo, s).0, to_physical(y_hi, s).0)
}

/// Reads `u*(x) ~ u(x, t_last)` at the samples and compares with the final
/// profile law. `z_min` sets the inner edge of the annulus in units of `sqrt(s)`.
pub fn final_profile(
    traj: &TrajectoryRecord,
    scaling: &ScalingMap,
    x_samples: &[f64],
    z_min: f64,
) -> Result<FinalProfile> {
    require_survival(traj)?;
    let prm = &traj.params;
    let snap = PhysicalSnapshot::from_state(&traj.final_state, scaling)?;
    let annulus = resolvable_annulus(traj, z_min);
    let inside = |x: f64| x.abs() >= annulus.0 * (1.0 - 1e-12) && x.abs() <= annulus.1 * (1.0 + 1e-12);
    let mut samples = Vec::with_capacity(x_samples.len());
    for &x in x_samples {
        let sample = if !inside(x) {
            ProfileSample {
                x,
                u_star: None,
                formula_ratio: None,
                skipped: Some(format!("outside resolvable annulus [{:e}, {:e}]", annulus.0, annulus.1)),
            }
        } else {
            match (snap.u_at(x), final_profile_formula(x, prm.p, prm.alpha)) {
                (Some(u), Some(f)) => ProfileSample {
                    x,
                    u_star: Some(u),
                    formula_ratio: Some(u / f),
                    skipped: None,
                },
                (None, _) => ProfileSample {
                    x,
                    u_star: None,
                    formula_ratio: None,
                    skipped: Some("not covered by the grid".into()),
                },
                (Some(u), None) => ProfileSample {
                    x,
                    u_star: Some(u),
                    formula_ratio: None,
                    skipped: Some("formula needs 0 < |x| < 1".into()),
                },
            }
        };
        samples.push(sample);
    }

    let (lx, lu): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter_map(|s| Some((s.x.abs().ln(), s.u_star?.ln())))
        .unzip();
    let slope = linear_fit(&lx, &lu).map(|(_, b)| b);

    let mut dyadic = Vec::new();
    let mut x = annulus.0;
    while 2.0 * x <= annulus.1 * (1.0 + 1e-12) {
        if let (Some(u1), Some(u2), Some(f1), Some(f2)) = (
            snap.u_at(x),
            snap.u_at(2.0 * x),
            final_profile_formula(x, prm.p, prm.alpha),
            final_profile_formula(2.0 * x, prm.p, prm.alpha),
        ) {
            dyadic.push((x, u1 / u2, f1 / f2));
        }
        x *= 2.0;
    }

    Ok(FinalProfile {
        s_last: traj.s_end(),
        t_last: snap.t,
        annulus,
        samples,
        slope,
        expected_slope: -2.0 / (prm.p - 1.0),
        dyadic,
    })
}

/// Geometric sample points across `[lo, hi]`.
pub fn geometric_samples(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let r = (hi / lo).ln();
    (0..count)
        .map(|k| lo * (r * k as f64 / (count - 1) as f64).exp())
        .collect()
}
