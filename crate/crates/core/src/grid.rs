//! Uniform grids in the similarity variable `y` and the state carried on them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ProblemParams;

/// Extra room beyond the cutoff support `2 K sqrt(s_max)`.
pub const DEFAULT_MARGIN: f64 = 4.0;

/// Production spacing.
pub const DEFAULT_DY: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    /// Radial half-line `[0, y_max]` in dimension `n`.
    Radial { n: usize },
    /// Full line `[-y_max, y_max]`, one space dimension, no symmetry imposed.
    Line,
}

impl Geometry {
    pub fn dim(&self) -> usize {
        match self {
            Geometry::Radial { n } => *n,
            Geometry::Line => 1,
        }
    }
}

/// Surface area of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    let mut area = if n % 2 == 1 { 2.0 } else { 2.0 * std::f64::consts::PI };
    let mut k = if n % 2 == 1 { 1 } else { 2 };
    while k < n {
        area *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    area
}

/// A uniform grid with precomputed (row-sum zero) stencils for `Delta - (1/2) y . grad`
/// and Simpson weights against the Gaussian `rho`.
#[derive(Debug, Clone)]
pub struct Grid {
    geometry: Geometry,
    dy: f64,
    nodes: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rho_weights: Vec<f64>,
}

impl Grid {
    /// Radial grid on `[0, y_max]`; the node count is rounded up so Simpson
    /// sees an even number of intervals.
    pub fn radial(n: usize, y_max: f64, dy: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let intervals = Self::interval_count(y_max, dy)?;
        let nodes = (0..=intervals).map(|i| i as f64 * dy).collect();
        Ok(Self::assemble(Geometry::Radial { n }, dy, nodes))
    }

    /// Full-line grid on `[-y_max, y_max]`.
    pub fn line(y_max: f64, dy: f64) -> Result<Self> {
        let half = Self::interval_count(y_max, dy)? as i64;
        let nodes = (-half..=half).map(|i| i as f64 * dy).collect();
        Ok(Self::assemble(Geometry::Line, dy, nodes))
    }

    /// Grid wide enough to hold the cutoff support up to `s_max`.
    pub fn for_run(params: &ProblemParams, geometry: Geometry, s_max: f64, dy: f64) -> Result<Self> {
        params.validate()?;
        if geometry.dim() != params.n {
            return Err(Error::InvalidParameter(format!(
                "geometry dimension {} does not match n = {}",
                geometry.dim(),
                params.n
            )));
        }
        let y_max = 2.0 * params.k * s_max.sqrt() + DEFAULT_MARGIN;
        match geometry {
            Geometry::Radial { n } => Self::radial(n, y_max, dy),
            Geometry::Line => Self::line(y_max, dy),
        }
    }

    fn interval_count(y_max: f64, dy: f64) -> Result<usize> {
        if !(dy > 0.0 && y_max > 0.0 && y_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid needs positive extent and spacing, got y_max = {y_max}, dy = {dy}"
            )));
        }
        let mut k = (y_max / dy - 1e-9).ceil() as usize;
        if k % 2 == 1 {
            k += 1;
        }
        if k < 4 {
            return Err(Error::GridTooCoarse(format!("only {k} intervals on [0, {y_max}]")));
        }
        Ok(k)
    }

    fn assemble(geometry: Geometry, dy: f64, nodes: Vec<f64>) -> Self {
        let len = nodes.len();
        let inv2 = 1.0 / (dy * dy);
        let mut lower = vec![0.0; len];
        let mut upper = vec![0.0; len];
        let (n, radial) = match geometry {
            Geometry::Radial { n } => (n as f64, true),
            Geometry::Line => (1.0, false),
        };
        // First-order coefficient of the operator at y: (n-1)/y - y/2.
        let drift = |y: f64| if radial { (n - 1.0) / y - 0.5 * y } else { -0.5 * y };
        for i in 0..len {
            let y = nodes[i];
            if radial && i == 0 {
                upper[i] = 2.0 * n * inv2;
            } else if i == len - 1 {
                // Ghost node from zero second derivative.
                let c = drift(y) / dy;
                lower[i] = -c;
            } else if !radial && i == 0 {
                let c = drift(y) / dy;
                upper[i] = c;
            } else {
                let c = drift(y) / (2.0 * dy);
                lower[i] = inv2 - c;
                upper[i] = inv2 + c;
            }
        }

        let simpson = |i: usize| -> f64 {
            let w = if i == 0 || i == len - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * dy / 3.0
        };
        let rho_weights = (0..len)
            .map(|i| {
                let y = nodes[i];
                let gauss = (-0.25 * y * y).exp();
                let measure = if radial {
                    sphere_area(n as usize) * y.powi(n as i32 - 1)
                        / (4.0 * std::f64::consts::PI).powf(0.5 * n)
                } else {
                    1.0 / (4.0 * std::f64::consts::PI).sqrt()
                };
                simpson(i) * gauss * measure
            })
            .collect();

        Self {
            geometry,
            dy,
            nodes,
            lower,
            upper,
            rho_weights,
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn y_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Simpson weights times the `rho` measure: `sum_i f_i weights_i`
    /// approximates `int f rho dy` over `R^n`.
    pub fn rho_weights(&self) -> &[f64] {
        &self.rho_weights
    }

    /// Explicit stability limit: `0.4 dy^2` from diffusion, and
    /// `3 dy / y_max` from the drift `y/2` at the outer edge.
    pub fn step_limit(&self) -> f64 {
        let diffusion = 0.4 * self.dy * self.dy;
        let drift = 3.0 * self.dy / self.y_max().max(f64::MIN_POSITIVE);
        diffusion.min(drift)
    }

    /// Index of the node at `y = 0`.
    pub fn origin(&self) -> usize {
        match self.geometry {
            Geometry::Radial { .. } => 0,
            Geometry::Line => self.nodes.len() / 2,
        }
    }

    /// `out = (Delta - (1/2) y . grad) w`, discretely.
    #[inline]
    pub fn apply_drift_diffusion(&self, w: &[f64], out: &mut [f64]) {
        let len = w.len();
        debug_assert_eq!(len, self.nodes.len());
        debug_assert_eq!(len, out.len());
        // Written in differences so constants are annihilated exactly.
        out[0] = self.upper[0] * (w[1] - w[0]);
        for i in 1..len - 1 {
            let wi = w[i];
            out[i] = self.lower[i] * (w[i - 1] - wi) + self.upper[i] * (w[i + 1] - wi);
        }
        out[len - 1] = self.lower[len - 1] * (w[len - 2] - w[len - 1]);
    }

    /// `int f rho` by quadrature.
    pub fn integrate_rho(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.rho_weights).map(|(a, b)| a * b).sum()
    }
}

/// Values of `w` on a grid at similarity time `s`.
#[derive(Debug, Clone)]
pub struct GridState {
    pub s: f64,
    pub grid: Arc<Grid>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub s: f64,
    pub y_nodes: Vec<f64>,
    pub w_values: Vec<f64>,
}

impl GridState {
    pub fn new(s: f64, grid: Arc<Grid>, w: Vec<f64>) -> Result<Self> {
        if w.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "state has {} values for {} nodes",
                w.len(),
                grid.len()
            )));
        }
        Ok(Self { s, grid, w })
    }

    pub fn from_fn(s: f64, grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let w = grid.nodes().iter().map(|&y| f(y)).collect();
        Self { s, grid, w }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|v| v.is_finite())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            s: self.s,
            y_nodes: self.grid.nodes().to_vec(),
            w_values: self.w.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_checkpoint()).expect("checkpoint serializes")
    }

    /// Restores a checkpoint onto a grid with matching nodes.
    pub fn from_checkpoint(cp: &Checkpoint, grid: Arc<Grid>) -> Result<Self> {
        let tol = 1e-12 * grid.y_max();
        if cp.y_nodes.len() != grid.len()
            || cp.y_nodes.iter().zip(grid.nodes()).any(|(a, b)| (a - b).abs() > tol)
        {
            return Err(Error::InvalidParameter("checkpoint nodes do not match the grid".into()));
        }
        Self::new(cp.s, grid, cp.w_values.clone())
    }
}
