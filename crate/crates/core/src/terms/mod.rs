//! Profiles and the terms of the `w`- and `q`-equations.
//!
//! `q = w - phi` satisfies `q_s = L q + V q + B(q) + R + D(q)`; the evaluators
//! here are pure functions of `(y, s)` and the tabulated scaling map.

pub mod sweeps;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{integrate, log_add_exp, signed_pow, Power};
use crate::params::ProblemParams;
use crate::scaling::ScalingMap;

/// Largest `|v| = |q + phi|` the nonlinear terms accept.
pub const V_MAX: f64 = 1e3;

/// The blowup profile `f0(z) = (1 + (p-1) z^2 / 4p)^{-1/(p-1)}` and its
/// corrected form `phi(y, s) = f0(y/sqrt s) + n/(2ps)`.
#[derive(Debug, Clone, Copy)]
pub struct Profile {
    p: f64,
    n: f64,
    c: f64,
    m: f64,
    neg_m: Power,
}

/// `phi` with its closed-form derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileDerivs {
    pub phi: f64,
    /// `Delta phi` (radial Laplacian in dimension n).
    pub laplacian: f64,
    /// `(1/2) y . grad phi`.
    pub half_y_grad: f64,
    /// `d phi / ds` at fixed `y`.
    pub ds: f64,
}

impl Profile {
    pub fn new(p: f64, n: usize) -> Self {
        let m = 1.0 / (p - 1.0);
        Self {
            p,
            n: n as f64,
            c: (p - 1.0) / (4.0 * p),
            m,
            neg_m: Power::new(-m),
        }
    }

    pub fn from_params(params: &ProblemParams) -> Self {
        Self::new(params.p, params.n)
    }

    pub fn f0(&self, z: f64) -> f64 {
        self.neg_m.of(1.0 + self.c * z * z)
    }

    /// The constant shift `n / (2ps)`.
    pub fn shift(&self, s: f64) -> f64 {
        self.n / (2.0 * self.p * s)
    }

    pub fn varphi(&self, y: f64, s: f64) -> f64 {
        self.f0(y / s.sqrt()) + self.shift(s)
    }

    pub fn derivs(&self, y: f64, s: f64) -> ProfileDerivs {
        let (c, m, n) = (self.c, self.m, self.n);
        let y2 = y * y;
        let a = 1.0 + c * y2 / s;
        let g = self.neg_m.of(a);
        let g1 = g / a;
        let g2 = g1 / a;
        let shift = self.shift(s);
        ProfileDerivs {
            phi: g + shift,
            laplacian: -2.0 * c * m * n / s * g1 + 4.0 * c * c * m * (m + 1.0) * y2 / (s * s) * g2,
            half_y_grad: -m * c * y2 / s * g1,
            ds: m * c * y2 / (s * s) * g1 - shift / s,
        }
    }

    /// Leading constant of `R(0, s) ~ c_p / s^2`, `n (4 + n) / (8 p)`.
    pub fn remainder_constant(&self) -> f64 {
        self.n * (4.0 + self.n) / (8.0 * self.p)
    }
}

/// Scaling map and parameters shared by all term evaluators.
#[derive(Debug, Clone)]
pub struct TermContext {
    scaling: Arc<ScalingMap>,
    params: ProblemParams,
    profile: Profile,
    pm1: Power,
}

impl TermContext {
    pub fn new(scaling: Arc<ScalingMap>) -> Self {
        let params = *scaling.params();
        Self {
            scaling,
            profile: Profile::from_params(&params),
            pm1: Power::new(params.p - 1.0),
            params,
        }
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn scaling(&self) -> &Arc<ScalingMap> {
        &self.scaling
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// `|v|^{p-1} v`.
    #[inline]
    pub fn odd_power(&self, v: f64) -> f64 {
        signed_pow(v, &self.pm1)
    }

    /// Freezes the `s`-dependent coefficients for repeated evaluation.
    pub fn at(&self, s: f64) -> Result<TermsAt<'_>> {
        let ell = self.scaling.ell_at(s)?;
        let h = self.scaling.h_at(s)?;
        Ok(TermsAt::from_parts(self, s, ell, h))
    }

    pub fn stable_log_ratio(&self, z: f64, s: f64) -> Result<f64> {
        Ok(self.at(s)?.log_ratio(z))
    }

    pub fn potential_v(&self, y: f64, s: f64) -> f64 {
        self.potential_of_phi(self.profile.varphi(y, s))
    }

    /// `V` expressed through the local value of `phi`.
    #[inline]
    pub fn potential_of_phi(&self, phi: f64) -> f64 {
        self.params.p / (self.params.p - 1.0) * (self.pm1.of(phi) - 1.0)
    }

    pub fn term_b(&self, q: f64, y: f64, s: f64) -> f64 {
        self.nonlinear_b(q, self.profile.varphi(y, s))
    }

    pub fn term_d(&self, q: f64, y: f64, s: f64) -> Result<f64> {
        self.at(s)?.d(q, y)
    }

    pub fn term_l(&self, v: f64, s: f64) -> Result<f64> {
        Ok(self.at(s)?.l(v))
    }

    pub fn term_r(&self, y: f64, s: f64) -> f64 {
        self.remainder_of(&self.profile.derivs(y, s))
    }

    /// `R` from precomputed profile derivatives.
    #[inline]
    pub fn remainder_of(&self, d: &ProfileDerivs) -> f64 {
        let inv = 1.0 / (self.params.p - 1.0);
        let phi_p = self.pm1.of(d.phi) * d.phi;
        d.laplacian - d.half_y_grad - d.phi * inv + phi_p * inv - d.ds
    }

    pub fn term_n(&self, wbar: f64, s: f64) -> Result<f64> {
        Ok(self.at(s)?.n(wbar))
    }

    /// `B = (|q+phi|^{p-1}(q+phi) - phi^p - p phi^{p-1} q)/(p-1)`.
    ///
    /// For `|q| << phi` the binomial series is summed instead, avoiding
    /// the cancellation between the first three terms.
    pub fn nonlinear_b(&self, q: f64, phi: f64) -> f64 {
        let p = self.params.p;
        let inv = 1.0 / (p - 1.0);
        if phi > 0.0 && q.abs() < 1e-3 * phi {
            let x = q / phi;
            let mut coeff = p * (p - 1.0) / 2.0;
            let mut xk = x * x;
            let mut sum = 0.0;
            for k in 2..8 {
                sum += coeff * xk;
                coeff *= (p - k as f64) / (k as f64 + 1.0);
                xk *= x;
            }
            return self.pm1.of(phi) * phi * sum * inv;
        }
        let phi_pm1 = self.pm1.of(phi);
        (self.odd_power(q + phi) - phi_pm1 * phi - p * phi_pm1 * q) * inv
    }
}

/// Term evaluators with `ell = ln psi1(s)` and `h(s)` fixed.
#[derive(Debug, Clone, Copy)]
pub struct TermsAt<'a> {
    ctx: &'a TermContext,
    pub s: f64,
    pub ell: f64,
    pub h: f64,
    eps: f64,
    /// `ln(psi1^2 + 2)`, through the same formula as the numerator at `z = 1`.
    lden: f64,
}

impl<'a> TermsAt<'a> {
    pub fn from_parts(ctx: &'a TermContext, s: f64, ell: f64, h: f64) -> Self {
        let eps = 2.0 * (-2.0 * ell).exp();
        let mut at = Self {
            ctx,
            s,
            ell,
            h,
            eps,
            lden: 0.0,
        };
        at.lden = at.log_numerator(1.0);
        at
    }

    /// `ln(psi1^2 z^2 + 2)` from `ell`.
    #[inline]
    pub fn log_numerator(&self, z: f64) -> f64 {
        let t = z * z;
        if self.eps > 0.0 {
            2.0 * self.ell + (t + self.eps).ln()
        } else if t == 0.0 {
            std::f64::consts::LN_2
        } else {
            log_add_exp(2.0 * self.ell + t.ln(), std::f64::consts::LN_2)
        }
    }

    pub fn log_denominator(&self) -> f64 {
        self.lden
    }

    /// `ln(psi1^2 z^2 + 2) - ln(psi1^2 + 2)`, accurate near `z = +-1`.
    #[inline]
    fn log_difference(&self, z: f64) -> f64 {
        if self.eps > 0.0 {
            ((z * z - 1.0) / (1.0 + self.eps)).ln_1p()
        } else {
            self.log_numerator(z) - self.lden
        }
    }

    /// `ln^alpha(psi1^2 z^2 + 2) / ln^alpha(psi1^2 + 2)`.
    #[inline]
    pub fn log_ratio(&self, z: f64) -> f64 {
        let alpha = self.ctx.params.alpha;
        if alpha == 0.0 {
            return 1.0;
        }
        let q = self.log_numerator(z) / self.lden;
        if alpha == 1.0 {
            q
        } else if alpha.fract() == 0.0 && alpha.abs() <= 16.0 {
            q.powi(alpha as i32)
        } else {
            (alpha * q.ln()).exp()
        }
    }

    /// `L(v, s) = ratio(v) - 1`.
    #[inline]
    pub fn l(&self, v: f64) -> f64 {
        let alpha = self.ctx.params.alpha;
        if alpha == 0.0 {
            return 0.0;
        }
        let rel = self.log_difference(v) / self.lden;
        if alpha == 1.0 {
            rel
        } else {
            (alpha * rel.ln_1p()).exp_m1()
        }
    }

    /// Taylor form of `L`: the linear term at `v = 1` plus the integral
    /// remainder `int_1^v f''(u)(v-u) du / f(1)` with `f(z) = ln^alpha(psi1^2 z^2 + 2)`.
    pub fn l_taylor(&self, v: f64) -> f64 {
        let alpha = self.ctx.params.alpha;
        if alpha == 0.0 {
            return 0.0;
        }
        let eps = self.eps;
        let linear = 2.0 * alpha / (self.lden * (1.0 + eps)) * (v - 1.0);
        let f2 = |u: f64| {
            let lam = self.log_numerator(u);
            let scale = (alpha * (lam / self.lden).ln()).exp();
            let d = u * u + eps;
            let g = 2.0 * u / d;
            scale
                * (alpha * (alpha - 1.0) / (lam * lam) * g * g
                    + alpha / lam * (2.0 * eps - 2.0 * u * u) / (d * d))
        };
        let remainder = integrate(|u| f2(u) * (v - u), 1.0, v, 1e-13, 1e-300);
        linear + remainder
    }

    /// `V(y, s)`.
    #[inline]
    pub fn v(&self, y: f64) -> f64 {
        self.ctx.potential_v(y, self.s)
    }

    /// `R(y, s)`.
    #[inline]
    pub fn r(&self, y: f64) -> f64 {
        self.ctx.term_r(y, self.s)
    }

    /// `B(q)` at `y`.
    #[inline]
    pub fn b(&self, q: f64, y: f64) -> f64 {
        self.ctx.term_b(q, y, self.s)
    }

    /// `D = D1 + D2` at `v = q + phi`, with
    /// `D1 = (h - 1/(p-1))(|v|^{p-1} v - v)` and `D2 = h |v|^{p-1} v L(v)`.
    #[inline]
    pub fn d_of_v(&self, v: f64, y: f64) -> Result<f64> {
        if !(v.abs() <= V_MAX) {
            return Err(Error::EscapedRegime { v: v.abs(), y, s: self.s });
        }
        let fv = self.ctx.odd_power(v);
        let d1 = (self.h - self.ctx.params.inv_pm1()) * (fv - v);
        let d2 = self.h * fv * self.l(v);
        Ok(d1 + d2)
    }

    pub fn d(&self, q: f64, y: f64) -> Result<f64> {
        self.d_of_v(q + self.ctx.profile.varphi(y, self.s), y)
    }

    /// `N(wbar) = h |wbar+1|^{p-1}(wbar+1) ratio(wbar+1) - h (wbar+1) - wbar`.
    pub fn n(&self, wbar: f64) -> f64 {
        let v = wbar + 1.0;
        self.h * self.ctx.odd_power(v) * self.log_ratio(v) - self.h * v - wbar
    }

    /// Nonlinear reaction of the `w`-equation, `-h w + h |w|^{p-1} w ratio(w)`.
    #[inline]
    pub fn reaction(&self, w: f64) -> f64 {
        self.h * (self.ctx.odd_power(w) * self.log_ratio(w) - w)
    }
}
