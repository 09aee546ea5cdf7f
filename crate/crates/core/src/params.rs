use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical and construction parameters.
///
/// `p` and `alpha` define the nonlinearity `|u|^{p-1} u ln^alpha(u^2 + 2)`;
/// `a` is the shrinking-set amplitude, `k` the cutoff scale and `s0` the
/// initial similarity time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub p: f64,
    pub alpha: f64,
    pub n: usize,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub s0: f64,
}

impl ProblemParams {
    pub fn new(p: f64, alpha: f64, n: usize, a: f64, k: f64, s0: f64) -> Result<Self> {
        let params = Self {
            p,
            alpha,
            n,
            a,
            k,
            s0,
        };
        params.validate()?;
        Ok(params)
    }

    /// Parameters used by most desk-scale experiments: `n = 1`, `A = 20`,
    /// `K = 10`, `s0 = 20`.
    pub fn desk(p: f64, alpha: f64) -> Result<Self> {
        Self::new(p, alpha, 1, 20.0, 10.0, 20.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.p.is_finite() && self.p > 1.0) {
            return bad(format!("p must exceed 1, got {}", self.p));
        }
        if !self.alpha.is_finite() {
            return bad(format!("alpha must be finite, got {}", self.alpha));
        }
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        if !(self.a >= 1.0) {
            return bad(format!("A must be at least 1, got {}", self.a));
        }
        if !(self.k >= 1.0) {
            return bad(format!("K must be at least 1, got {}", self.k));
        }
        if !(self.s0 >= 1.0) {
            return bad(format!("s0 must be at least 1, got {}", self.s0));
        }
        Ok(())
    }

    pub fn with_s0(mut self, s0: f64) -> Result<Self> {
        self.s0 = s0;
        self.validate()?;
        Ok(self)
    }

    /// `1 / (p - 1)`, the limit of `h(s)`.
    pub fn inv_pm1(&self) -> f64 {
        1.0 / (self.p - 1.0)
    }

    pub fn dim(&self) -> f64 {
        self.n as f64
    }
}
