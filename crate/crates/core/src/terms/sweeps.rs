//! Scaling sweeps for the asymptotic bounds satisfied by the terms.
//!
//! Each sweep evaluates a quantity multiplied by the reciprocal of its
//! claimed bound at increasing values of a parameter (normally `s`). The
//! bound holds numerically when the scaled values stay finite and the
//! maximum over the upper half of the sweep is at most twice the maximum
//! over the lower half.

use std::sync::Arc;

use serde::Serialize;

use super::TermContext;
use crate::error::Result;
use crate::params::ProblemParams;
use crate::scaling::{h_expansion, ScalingMap};

/// Scaled values below this are treated as zero by the verdict.
const NEGLIGIBLE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub name: String,
    /// `(parameter, scaled quantity)`, parameter increasing.
    pub samples: Vec<(f64, f64)>,
    pub lower_max: f64,
    pub upper_max: f64,
    pub bounded: bool,
}

impl SweepReport {
    pub fn new(name: impl Into<String>, samples: Vec<(f64, f64)>) -> Self {
        let half = samples.len() / 2;
        let max_of = |xs: &[(f64, f64)]| xs.iter().map(|s| s.1).fold(0.0, f64::max);
        let lower_max = max_of(&samples[..half.max(1)]);
        let upper_max = max_of(&samples[half..]);
        let finite = samples.iter().all(|s| s.1.is_finite());
        let bounded = finite && (upper_max <= 2.0 * lower_max || upper_max <= NEGLIGIBLE);
        Self {
            name: name.into(),
            samples,
            lower_max,
            upper_max,
            bounded,
        }
    }

    pub fn constant(&self) -> f64 {
        self.lower_max.max(self.upper_max)
    }
}

/// Similarity times `20 .. 2000` on a roughly geometric ladder.
pub const S_LADDER: [f64; 9] = [20.0, 40.0, 80.0, 150.0, 300.0, 500.0, 800.0, 1200.0, 2000.0];

fn context(params: &ProblemParams, samples: &[f64]) -> Result<TermContext> {
    let map = ScalingMap::from_samples(params, samples)?;
    Ok(TermContext::new(Arc::new(map)))
}

fn linspace(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
}

/// `h(s) - h_expansion(s)` times `s^2`, which stays bounded.
pub fn h_expansion_residual(params: &ProblemParams, s_values: &[f64]) -> Result<SweepReport> {
    let map = ScalingMap::from_samples(params, s_values)?;
    let samples = s_values
        .iter()
        .zip(map.h_values())
        .map(|(&s, &h)| (s, s * s * (h - h_expansion(s, params)).abs()))
        .collect();
    Ok(SweepReport::new("h expansion residual * s^2", samples))
}

/// `|N(wbar) - p wbar^2/2|` against `|wbar| ln s/s^2 + wbar^2/s + |wbar|^3`.
pub fn n_remainder(params: &ProblemParams) -> Result<SweepReport> {
    let s_values = [20.0, 50.0, 100.0, 300.0, 1000.0, 3000.0, 1e4];
    let ctx = context(params, &s_values)?;
    let wbars: [f64; 10] = [-0.1, -0.03, -1e-2, -3e-3, -1e-3, 1e-3, 3e-3, 1e-2, 3e-2, 0.1];
    let mut samples = Vec::new();
    for &s in &s_values {
        let at = ctx.at(s)?;
        let mut worst: f64 = 0.0;
        for &wb in &wbars {
            let a = wb.abs();
            let template = a * s.ln() / (s * s) + a * a / s + a * a * a;
            worst = worst.max((at.n(wb) - 0.5 * params.p * wb * wb).abs() / template);
        }
        samples.push((s, worst));
    }
    Ok(SweepReport::new("N remainder", samples))
}

/// `s sup_{|z| <= k1} |h F(z) ratio(z) - F(z)/(p-1)|` with `F(z) = |z|^{p-1} z`.
pub fn log_ratio_bound(params: &ProblemParams, k1: f64) -> Result<SweepReport> {
    let ctx = context(params, &S_LADDER)?;
    let mut samples = Vec::new();
    for &s in &S_LADDER {
        let at = ctx.at(s)?;
        let worst = linspace(0.0, k1, 801)
            .map(|z| {
                let f = ctx.odd_power(z);
                (at.h * f * at.log_ratio(z) - f * params.inv_pm1()).abs()
            })
            .fold(0.0, f64::max);
        samples.push((s, s * worst));
    }
    Ok(SweepReport::new(format!("log-ratio bound, K1 = {k1}"), samples))
}

/// `sup_{|y| <= 2K sqrt s} |D(0, y, s)| s^3 / (ln s (1 + |y|)^4)`.
pub fn d_interior(params: &ProblemParams) -> Result<SweepReport> {
    let s_values = [50.0, 100.0, 200.0, 400.0, 800.0];
    let ctx = context(params, &s_values)?;
    let mut samples = Vec::new();
    for &s in &s_values {
        let at = ctx.at(s)?;
        let mut worst: f64 = 0.0;
        for y in linspace(0.0, 2.0 * params.k * s.sqrt(), 2001) {
            let d = at.d(0.0, y)?;
            worst = worst.max(d.abs() * s.powi(3) / (s.ln() * (1.0 + y).powi(4)));
        }
        samples.push((s, worst));
    }
    Ok(SweepReport::new("D interior", samples))
}

/// `s^3 |D(0, 0, s)| / ln s` at the origin alone.
pub fn d_origin(params: &ProblemParams) -> Result<SweepReport> {
    let s_values = [50.0, 100.0, 200.0, 400.0, 800.0];
    let ctx = context(params, &s_values)?;
    let mut samples = Vec::new();
    for &s in &s_values {
        let d = ctx.at(s)?.d(0.0, 0.0)?;
        samples.push((s, d.abs() * s.powi(3) / s.ln()));
    }
    Ok(SweepReport::new("D at origin", samples))
}

/// `s sup_y |D(q, y, s)|` over `s in [s0, s0 + 30]` for a family of bounded `q`.
pub fn d_global(params: &ProblemParams) -> Result<SweepReport> {
    let s_values: Vec<f64> = linspace(params.s0, params.s0 + 30.0, 7).collect();
    let ctx = context(params, &s_values)?;
    let mut samples = Vec::new();
    for &s in &s_values {
        let at = ctx.at(s)?;
        let y_end = 4.0 * params.k * s.sqrt();
        let amplitude = params.a * params.a / s.sqrt();
        let mut worst: f64 = 0.0;
        for y in linspace(0.0, y_end, 2001) {
            for frac in [-0.5, 0.0, 0.5] {
                let phi = ctx.profile().varphi(y, s);
                let q = (frac * amplitude).max(-phi).min(1.0);
                worst = worst.max(at.d(q, y)?.abs());
            }
        }
        samples.push((s, s * worst));
    }
    Ok(SweepReport::new("D global", samples))
}

/// `s^2 |V + (|y|^2 - 2n)/(4s)| / (1 + |y|^4)` on `|y| <= K sqrt s`.
pub fn v_expansion(params: &ProblemParams) -> Result<SweepReport> {
    let ctx = context(params, &[params.s0])?;
    let n = params.dim();
    let mut samples = Vec::new();
    for &s in &S_LADDER[..7] {
        let worst = linspace(0.0, params.k * s.sqrt(), 2001)
            .map(|y| {
                let resid = ctx.potential_v(y, s) + (y * y - 2.0 * n) / (4.0 * s);
                s * s * resid.abs() / (1.0 + y.powi(4))
            })
            .fold(0.0, f64::max);
        samples.push((s, worst));
    }
    Ok(SweepReport::new("V expansion", samples))
}

/// `s sup_y |V| / (1 + |y|^2)` over the whole line.
pub fn v_global(params: &ProblemParams) -> Result<SweepReport> {
    let ctx = context(params, &[params.s0])?;
    let mut samples = Vec::new();
    for &s in &S_LADDER[..7] {
        let worst = linspace(0.0, 6.0 * params.k * s.sqrt(), 4001)
            .map(|y| s * ctx.potential_v(y, s).abs() / (1.0 + y * y))
            .fold(0.0, f64::max);
        samples.push((s, worst));
    }
    Ok(SweepReport::new("V global", samples))
}

/// `s sup_y |R|` over `s in [20, 200]`.
pub fn r_global(params: &ProblemParams) -> Result<SweepReport> {
    let ctx = context(params, &[params.s0])?;
    let mut samples = Vec::new();
    for s in [20.0f64, 35.0, 50.0, 75.0, 100.0, 150.0, 200.0] {
        let worst = linspace(0.0, 6.0 * params.k * s.sqrt(), 4001)
            .map(|y| ctx.term_r(y, s).abs())
            .fold(0.0, f64::max);
        samples.push((s, s * worst));
    }
    Ok(SweepReport::new("R global", samples))
}

/// `s^3 |R - c_p/s^2| / (1 + |y|^4)` on `|y| <= K sqrt s`.
pub fn r_expansion(params: &ProblemParams) -> Result<SweepReport> {
    let ctx = context(params, &[params.s0])?;
    let cp = ctx.profile().remainder_constant();
    let mut samples = Vec::new();
    for &s in &S_LADDER[..7] {
        let worst = linspace(0.0, params.k * s.sqrt(), 2001)
            .map(|y| s.powi(3) * (ctx.term_r(y, s) - cp / (s * s)).abs() / (1.0 + y.powi(4)))
            .fold(0.0, f64::max);
        samples.push((s, worst));
    }
    Ok(SweepReport::new("R expansion", samples))
}

/// `|B(q)| / |q|^{min(p,2)}` over `|q| <= 1/2`, `|y| <= 4K sqrt s`.
pub fn b_bound(params: &ProblemParams) -> Result<SweepReport> {
    let ctx = context(params, &[params.s0])?;
    let pbar = params.p.min(2.0);
    let mut samples = Vec::new();
    for &s in &S_LADDER[..7] {
        let mut worst: f64 = 0.0;
        for y in linspace(0.0, 4.0 * params.k * s.sqrt(), 401) {
            for k in 0..40 {
                let mag = 0.5 * 10f64.powf(-(k as f64) / 8.0);
                for q in [mag, -mag] {
                    worst = worst.max(ctx.term_b(q, y, s).abs() / q.abs().powf(pbar));
                }
            }
        }
        samples.push((s, worst));
    }
    Ok(SweepReport::new("B bound", samples))
}

/// Richardson-style check that `s^2 R(0, s)` settles: returns `(s, s^2 R(0,s))`.
pub fn r_origin_series(params: &ProblemParams, s_values: &[f64]) -> Vec<(f64, f64)> {
    let scaling = ScalingMap::from_samples(params, &[params.s0]).expect("valid params");
    let ctx = TermContext::new(Arc::new(scaling));
    s_values.iter().map(|&s| (s, s * s * ctx.term_r(0.0, s))).collect()
}

/// Every bound sweep for one parameter pair.
pub fn all_sweeps(params: &ProblemParams) -> Result<Vec<SweepReport>> {
    Ok(vec![
        n_remainder(params)?,
        log_ratio_bound(params, 1.0)?,
        log_ratio_bound(params, 5.0)?,
        d_interior(params)?,
        d_origin(params)?,
        d_global(params)?,
        v_expansion(params)?,
        v_global(params)?,
        r_global(params)?,
        r_expansion(params)?,
        b_bound(params)?,
    ])
}
