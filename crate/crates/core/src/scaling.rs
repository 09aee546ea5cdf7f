//! The blowup rate `psi`, its similarity-time form `psi1(s) = psi(T - e^{-s})`
//! and the coefficient `h(s) = e^{-s} psi1^{p-1} ln^alpha(psi1^2 + 2)`.
//!
//! Everything is carried in the log domain: the tabulated quantity is
//! `ell(s) = ln psi1(s)`, and the blowup time is normalised by requiring
//! `T - t = e^{-s}` exactly, i.e. `ell(s)` solves
//! `ln I(e^ell) = -s` with `I(Psi) = int_Psi^inf du / (u^p ln^alpha(u^2 + 2))`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{hermite_cubic, integrate};
use crate::params::ProblemParams;

/// Default spacing of the tabulated map.
pub const DEFAULT_TABLE_STEP: f64 = 1e-2;

const QUAD_REL_TOL: f64 = 1e-14;

/// `kappa_alpha = (p-1)^{-1/(p-1)} ((p-1)/2)^{alpha/(p-1)}`.
pub fn kappa_alpha(params: &ProblemParams) -> Result<f64> {
    let p = params.p;
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
    }
    let pm1 = p - 1.0;
    Ok(pm1.powf(-1.0 / pm1) * (0.5 * pm1).powf(params.alpha / pm1))
}

/// `ln(psi^2 + 2)` written in terms of `ell = ln psi`, overflow free.
#[inline]
pub fn log_psi_sq_plus_two(ell: f64) -> f64 {
    2.0 * ell + (2.0 * (-2.0 * ell).exp()).ln_1p()
}

/// `h` as a function of `(s, ell)`, evaluated entirely through logarithms.
#[inline]
pub fn rate_h(s: f64, ell: f64, params: &ProblemParams) -> f64 {
    let mut expo = -s + (params.p - 1.0) * ell;
    if params.alpha != 0.0 {
        expo += params.alpha * log_psi_sq_plus_two(ell).ln();
    }
    expo.exp()
}

/// Number of decades integrated numerically before switching to the
/// asymptotic tail; chosen so the tail carries at most `1e-8` of the mass.
fn split_decades(p: f64) -> f64 {
    (8.0 / (p - 1.0)).ceil().max(6.0)
}

/// Returns `(ln I(e^ell), d ln I / d ell)`.
fn ln_tail_with_slope(ell: f64, params: &ProblemParams) -> (f64, f64) {
    let pm1 = params.p - 1.0;
    let alpha = params.alpha;
    let weight = |t: f64| -> f64 {
        let base = (-pm1 * t).exp();
        if alpha == 0.0 {
            base
        } else {
            base * log_psi_sq_plus_two(ell + t).powf(-alpha)
        }
    };
    let t_split = split_decades(params.p) * std::f64::consts::LN_10;
    let body = integrate(weight, 0.0, t_split, QUAD_REL_TOL, 0.0);

    // Integration by parts at U = Psi 10^m, truncated after the second term.
    let l_u = log_psi_sq_plus_two(ell + t_split);
    let x = 2.0 / (pm1 * l_u);
    let series = 1.0 - alpha * x + alpha * (alpha + 1.0) * x * x;
    let tail = weight(t_split) / pm1 * series;

    let scaled = body + tail;
    let ln_i = -pm1 * ell + scaled.ln();
    let slope = -weight(0.0) / scaled;
    (ln_i, slope)
}

/// `ln int_Psi^inf du / (u^p ln^alpha(u^2+2))` with `Psi = e^{ln_psi}`.
pub fn ln_tail_time_integral(ln_psi: f64, params: &ProblemParams) -> Result<f64> {
    params.validate()?;
    if !(ln_psi > 0.0) || !ln_psi.is_finite() {
        return Err(Error::Domain(format!(
            "tail integral needs Psi > 1, got ln Psi = {ln_psi}"
        )));
    }
    Ok(ln_tail_with_slope(ln_psi, params).0)
}

/// `T - t` as a function of the current rate value `Psi = psi(t)`.
pub fn tail_time_integral(psi: f64, params: &ProblemParams) -> Result<f64> {
    if !(psi > 1.0) {
        return Err(Error::Domain(format!("tail integral needs Psi > 1, got {psi}")));
    }
    Ok(ln_tail_time_integral(psi.ln(), params)?.exp())
}

/// Solves `ln I(e^ell) = -s` for `ell` by safeguarded Newton iteration.
pub fn solve_ell(s: f64, params: &ProblemParams, guess: Option<f64>) -> Result<f64> {
    params.validate()?;
    let pm1 = params.p - 1.0;
    let residual = |ell: f64| {
        let (v, d) = ln_tail_with_slope(ell, params);
        (v + s, d)
    };

    let mut lo = 1e-12;
    let (f_lo, _) = residual(lo);
    if !(f_lo > 0.0) {
        return Err(Error::Bracket {
            context: format!("anchoring ln psi1 at s = {s} (need s > -ln I(1))"),
            lo,
            hi: lo,
            f_lo,
            f_hi: f_lo,
        });
    }
    let mut hi = (s / pm1).max(1.0);
    let mut f_hi = residual(hi).0;
    let mut expansions = 0;
    while f_hi > 0.0 {
        lo = hi;
        hi *= 2.0;
        f_hi = residual(hi).0;
        expansions += 1;
        if expansions > 60 || !f_hi.is_finite() {
            return Err(Error::Bracket {
                context: format!("anchoring ln psi1 at s = {s}"),
                lo,
                hi,
                f_lo,
                f_hi,
            });
        }
    }

    let default_guess = {
        let g = (s - pm1.ln() - params.alpha * (2.0 * s / pm1).max(1.0).ln()) / pm1;
        if g > lo && g < hi {
            g
        } else {
            0.5 * (lo + hi)
        }
    };
    let mut ell = guess.filter(|g| *g > lo && *g < hi).unwrap_or(default_guess);
    for _ in 0..200 {
        let (f, df) = residual(ell);
        if f == 0.0 {
            return Ok(ell);
        }
        if f > 0.0 {
            lo = ell;
        } else {
            hi = ell;
        }
        let mut next = ell - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - ell).abs() <= 4.0 * f64::EPSILON * ell.abs().max(1.0) {
            return Ok(next);
        }
        ell = next;
    }
    Ok(ell)
}

/// `(1/(p-1)) (1 - alpha/s - alpha^2 ln s / s^2)`.
pub fn h_expansion(s: f64, params: &ProblemParams) -> f64 {
    let a = params.alpha;
    (1.0 - a / s - a * a * s.ln() / (s * s)) / (params.p - 1.0)
}

/// `s/(p-1) - alpha ln(s)/(p-1)`.
pub fn ln_psi1_expansion(s: f64, params: &ProblemParams) -> f64 {
    (s - params.alpha * s.ln()) / (params.p - 1.0)
}

/// Forward RK4 integration of `d ell / ds = h(s, ell)`.
///
/// Perturbations of this ODE grow like `e^{s - s_start}`, so it is only a
/// short-horizon cross-check of the tabulated map, never the source of it.
pub fn integrate_rate_ode(
    params: &ProblemParams,
    s_start: f64,
    ell_start: f64,
    s_end: f64,
    ds: f64,
) -> Vec<(f64, f64)> {
    let steps = ((s_end - s_start) / ds).round().max(0.0) as usize;
    let ds = if steps > 0 { (s_end - s_start) / steps as f64 } else { ds };
    let f = |s: f64, ell: f64| rate_h(s, ell, params);
    let mut out = Vec::with_capacity(steps + 1);
    let (mut s, mut ell) = (s_start, ell_start);
    out.push((s, ell));
    for k in 0..steps {
        let k1 = f(s, ell);
        let k2 = f(s + 0.5 * ds, ell + 0.5 * ds * k1);
        let k3 = f(s + 0.5 * ds, ell + 0.5 * ds * k2);
        let k4 = f(s + ds, ell + ds * k3);
        ell += ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s = s_start + (k + 1) as f64 * ds;
        out.push((s, ell));
    }
    out
}

/// Tabulated `ell(s) = ln psi1(s)` and `h(s)` on an increasing grid of
/// similarity times. Immutable once built.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingMap {
    #[serde(skip)]
    params: ProblemParams,
    s: Vec<f64>,
    ell: Vec<f64>,
    h: Vec<f64>,
    #[serde(skip)]
    uniform_step: Option<f64>,
}

impl ScalingMap {
    /// Tabulates `[s0, s_max]` with the default spacing.
    pub fn build(params: &ProblemParams, s_max: f64) -> Result<Self> {
        Self::build_with_step(params, s_max, DEFAULT_TABLE_STEP)
    }

    pub fn build_with_step(params: &ProblemParams, s_max: f64, step: f64) -> Result<Self> {
        params.validate()?;
        if !(s_max > params.s0) {
            return Err(Error::InvalidParameter(format!(
                "s_max = {s_max} must exceed s0 = {}",
                params.s0
            )));
        }
        if !(step > 0.0) {
            return Err(Error::InvalidParameter(format!("table step must be positive, got {step}")));
        }
        let count = ((s_max - params.s0) / step - 1e-9).ceil() as usize + 1;
        let samples: Vec<f64> = (0..count).map(|k| params.s0 + k as f64 * step).collect();
        let mut map = Self::from_samples(params, &samples)?;
        map.uniform_step = Some(step);
        Ok(map)
    }

    /// Solves the anchoring identity at every requested similarity time.
    pub fn from_samples(params: &ProblemParams, samples: &[f64]) -> Result<Self> {
        params.validate()?;
        if samples.is_empty() || samples.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "scaling samples must be non-empty and strictly increasing".into(),
            ));
        }
        let mut ell = Vec::with_capacity(samples.len());
        let mut h = Vec::with_capacity(samples.len());
        let mut guess = None;
        for (k, &s) in samples.iter().enumerate() {
            let e = solve_ell(s, params, guess)?;
            let rate = rate_h(s, e, params);
            ell.push(e);
            h.push(rate);
            if let Some(&next) = samples.get(k + 1) {
                guess = Some(e + rate * (next - s));
            }
        }
        Ok(Self {
            params: *params,
            s: samples.to_vec(),
            ell,
            h,
            uniform_step: None,
        })
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn s_grid(&self) -> &[f64] {
        &self.s
    }

    pub fn ell_values(&self) -> &[f64] {
        &self.ell
    }

    pub fn h_values(&self) -> &[f64] {
        &self.h
    }

    pub fn s_range(&self) -> (f64, f64) {
        (self.s[0], *self.s.last().unwrap())
    }

    fn locate(&self, s: f64) -> Result<usize> {
        let (lo, hi) = self.s_range();
        let slack = 1e-9 * hi.abs().max(1.0);
        if !(s >= lo - slack && s <= hi + slack) {
            return Err(Error::OutOfRange { s, lo, hi });
        }
        let last = self.s.len().saturating_sub(2);
        let i = match self.uniform_step {
            Some(step) => (((s - lo) / step).floor().max(0.0) as usize).min(last),
            None => self.s.partition_point(|&x| x <= s).saturating_sub(1).min(last),
        };
        Ok(i)
    }

    /// `ln psi1(s)`, cubic Hermite between nodes (slopes are `h`).
    pub fn ell_at(&self, s: f64) -> Result<f64> {
        if self.s.len() == 1 {
            return if (s - self.s[0]).abs() <= 1e-9 * s.abs().max(1.0) {
                Ok(self.ell[0])
            } else {
                Err(Error::OutOfRange { s, lo: self.s[0], hi: self.s[0] })
            };
        }
        let i = self.locate(s)?;
        if s == self.s[i] {
            return Ok(self.ell[i]);
        }
        Ok(hermite_cubic(
            self.s[i],
            self.s[i + 1],
            self.ell[i],
            self.ell[i + 1],
            self.h[i],
            self.h[i + 1],
            s,
        ))
    }

    pub fn h_at(&self, s: f64) -> Result<f64> {
        if let Ok(i) = self.s.binary_search_by(|x| x.total_cmp(&s)) {
            return Ok(self.h[i]);
        }
        Ok(rate_h(s, self.ell_at(s)?, &self.params))
    }

    /// `psi1(s) e^{-s/(p-1)} s^{alpha/(p-1)} / kappa_alpha`, which tends to 1.
    pub fn ratio_to_kappa(&self, s: f64) -> Result<f64> {
        let kappa = kappa_alpha(&self.params)?;
        let pm1 = self.params.p - 1.0;
        let ell = self.ell_at(s)?;
        Ok((ell - s / pm1 + self.params.alpha / pm1 * s.ln() - kappa.ln()).exp())
    }

    /// JSON table `{s, ell, h}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scaling map serializes")
    }
}
