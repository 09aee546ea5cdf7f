use std::sync::Arc;

use serde::Serialize;

use super::hermite::orthogonality_defect;
use super::shrinking::{Membership, ShrinkingSetSpec};
use crate::error::{Error, Result};
use crate::grid::{Geometry, Grid};

/// Tolerance of the Gram-matrix self test run when a decomposer is built.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Quintic bridge from 1 at `t <= 0` to 0 at `t >= 1`.
#[inline]
pub fn smoothstep_bridge(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// `chi(y, s) = chi_0(|y| / (K sqrt s))`, equal to 1 on `[0, 1]` and 0 past 2.
#[inline]
pub fn cutoff_chi(y: f64, s: f64, k: f64) -> f64 {
    smoothstep_bridge(y.abs() / (k * s.sqrt()) - 1.0)
}

/// The five components of `q = q_b + q_e` at one similarity time.
///
/// In radial geometry `q1` is identically zero and `q2` is the common
/// diagonal entry of the (isotropic) quadratic-mode matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeDecomposition {
    pub s: f64,
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub qminus_norm: f64,
    pub qe_norm: f64,
}

impl ModeDecomposition {
    pub fn zero(s: f64) -> Self {
        Self {
            s,
            q0: 0.0,
            q1: 0.0,
            q2: 0.0,
            qminus_norm: 0.0,
            qe_norm: 0.0,
        }
    }

    /// Degree-two-or-less part `q0 + q1 y + q2 (|y|^2/2 - n)`.
    pub fn polynomial_part(&self, y: f64, n: usize) -> f64 {
        self.q0 + self.q1 * y + self.q2 * (0.5 * y * y - n as f64)
    }

    pub fn components(&self) -> [f64; 5] {
        [self.q0, self.q1, self.q2, self.qminus_norm, self.qe_norm]
    }

    pub const CSV_HEADER: &'static str = "s,q0,q1,q2,qminus_norm,qe_norm,member_flag,violator";

    pub fn csv_row(&self, membership: &Membership) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{},{}",
            self.s,
            self.q0,
            self.q1,
            self.q2,
            self.qminus_norm,
            self.qe_norm,
            u8::from(membership.member),
            membership.violator.map(|c| c.label()).unwrap_or("")
        )
    }

    pub fn membership(&self, spec: &ShrinkingSetSpec) -> Membership {
        spec.classify(self)
    }
}

/// Precomputed quadrature data for repeated decompositions on one grid.
#[derive(Debug, Clone)]
pub struct Decomposer {
    grid: Arc<Grid>,
    k: f64,
    /// `rho` weights times `|y|^2/(4n) - 1/2`.
    w_quadratic: Vec<f64>,
    /// `rho` weights times `y / 2` (full line only).
    w_linear: Option<Vec<f64>>,
    cubic_scale: Vec<f64>,
}

impl Decomposer {
    /// Builds the tables and runs the Gram-matrix self test.
    pub fn new(grid: Arc<Grid>, k: f64) -> Result<Self> {
        let defect = orthogonality_defect(&grid, 4);
        if !(defect <= ORTHOGONALITY_TOL) {
            return Err(Error::GridTooCoarse(format!(
                "Hermite Gram defect {defect:.3e} exceeds {ORTHOGONALITY_TOL:e} (dy = {}, y_max = {})",
                grid.dy(),
                grid.y_max()
            )));
        }
        let n = grid.dim() as f64;
        let rho = grid.rho_weights();
        let nodes = grid.nodes();
        let w_quadratic = nodes
            .iter()
            .zip(rho)
            .map(|(&y, &r)| r * (0.25 * y * y / n - 0.5))
            .collect();
        let w_linear = match grid.geometry() {
            Geometry::Line => Some(nodes.iter().zip(rho).map(|(&y, &r)| 0.5 * r * y).collect()),
            Geometry::Radial { .. } => None,
        };
        let cubic_scale = nodes.iter().map(|&y| 1.0 / (1.0 + y.abs().powi(3))).collect();
        Ok(Self {
            grid,
            k,
            w_quadratic,
            w_linear,
            cubic_scale,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn check_support(&self, s: f64) -> Result<()> {
        let need = 2.0 * self.k * s.sqrt();
        if self.grid.y_max() < need {
            return Err(Error::GridTooCoarse(format!(
                "grid ends at {} but the cutoff support at s = {s} reaches {need}",
                self.grid.y_max()
            )));
        }
        Ok(())
    }

    /// Decomposes `q` given on the grid nodes.
    pub fn decompose(&self, q: &[f64], s: f64) -> Result<ModeDecomposition> {
        Ok(self.decompose_with_remainder(q, s)?.0)
    }

    /// As [`Decomposer::decompose`], also returning `q_-` at every node.
    pub fn decompose_with_remainder(&self, q: &[f64], s: f64) -> Result<(ModeDecomposition, Vec<f64>)> {
        self.check_support(s)?;
        if q.len() != self.grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for {} nodes",
                q.len(),
                self.grid.len()
            )));
        }
        let nodes = self.grid.nodes();
        let rho = self.grid.rho_weights();
        let n = self.grid.dim();

        let mut qb = Vec::with_capacity(q.len());
        let mut qe_norm: f64 = 0.0;
        for (&y, &v) in nodes.iter().zip(q) {
            let chi = cutoff_chi(y, s, self.k);
            qb.push(chi * v);
            qe_norm = qe_norm.max(((1.0 - chi) * v).abs());
        }

        let q0: f64 = qb.iter().zip(rho).map(|(a, b)| a * b).sum();
        let q2: f64 = qb.iter().zip(&self.w_quadratic).map(|(a, b)| a * b).sum();
        let q1: f64 = match &self.w_linear {
            Some(wl) => qb.iter().zip(wl).map(|(a, b)| a * b).sum(),
            None => 0.0,
        };
        let mut dec = ModeDecomposition {
            s,
            q0,
            q1,
            q2,
            qminus_norm: 0.0,
            qe_norm,
        };
        let mut qminus = qb;
        let mut worst: f64 = 0.0;
        for ((qm, &y), &scale) in qminus.iter_mut().zip(nodes).zip(&self.cubic_scale) {
            *qm -= dec.polynomial_part(y, n);
            worst = worst.max(qm.abs() * scale);
        }
        dec.qminus_norm = worst;
        Ok((dec, qminus))
    }

    /// Coefficient of `|y|^2 - 2n` in the projection of `v` (no cutoff).
    pub fn quadratic_coefficient(&self, v: &[f64]) -> f64 {
        0.5 * v.iter().zip(&self.w_quadratic).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// One-shot decomposition; builds (and self-tests) the tables each call.
pub fn decompose(q: &[f64], s: f64, grid: Arc<Grid>, k: f64) -> Result<ModeDecomposition> {
    Decomposer::new(grid, k)?.decompose(q, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::HermiteBasis;

    fn radial(n: usize) -> Arc<Grid> {
        Arc::new(Grid::radial(n, 145.0, 0.05).unwrap())
    }

    #[test]
    fn cutoff_plateaus_and_transition() {
        assert_eq!(cutoff_chi(0.0, 25.0, 10.0), 1.0);
        assert_eq!(cutoff_chi(200.0, 25.0, 10.0), 0.0);
        assert_eq!(cutoff_chi(-50.0, 25.0, 10.0), 1.0);
        let mid = cutoff_chi(75.0, 25.0, 10.0);
        assert!(mid > 0.0 && mid < 1.0);
        assert!((mid - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for k in 0..=200 {
            let v = cutoff_chi(50.0 + k as f64 * 0.25, 25.0, 10.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn second_hermite_mode() {
        let d = Decomposer::new(radial(1), 10.0).unwrap();
        let b = HermiteBasis::new(2);
        let q: Vec<f64> = d.grid().nodes().iter().map(|&y| b.eval(2, y)).collect();
        let dec = d.decompose(&q, 50.0).unwrap();
        assert!((dec.q2 - 2.0).abs() < 1e-8);
        assert!(dec.q0.abs() < 1e-8);
        assert_eq!(dec.q1, 0.0);
        // Only the part removed by the cutoff is left over.
        let tail = d
            .grid()
            .nodes()
            .iter()
            .map(|&y| (1.0 - cutoff_chi(y, 50.0, 10.0)) * (y * y - 2.0).abs() / (1.0 + y.powi(3)))
            .fold(0.0, f64::max);
        assert!((dec.qminus_norm - tail).abs() < 1e-8);
        assert!(tail < 1e-2);
    }

    #[test]
    fn zero_and_constant() {
        let d = Decomposer::new(radial(1), 10.0).unwrap();
        let z = vec![0.0; d.grid().len()];
        assert_eq!(d.decompose(&z, 30.0).unwrap(), ModeDecomposition::zero(30.0));
        let c = vec![-0.3; d.grid().len()];
        let dec = d.decompose(&c, 30.0).unwrap();
        assert!((dec.q0 + 0.3).abs() < 0.3 * 1e-8);
        assert!(dec.q2.abs() < 1e-9);
        let tail = d
            .grid()
            .nodes()
            .iter()
            .map(|&y| 0.3 * (1.0 - cutoff_chi(y, 30.0, 10.0)) / (1.0 + y.powi(3)))
            .fold(0.0, f64::max);
        assert!((dec.qminus_norm - tail).abs() < 1e-9);
        assert!((dec.qe_norm - 0.3).abs() < 1e-15);
    }

    #[test]
    fn line_geometry_recovers_odd_mode() {
        let g = Arc::new(Grid::line(145.0, 0.05).unwrap());
        let d = Decomposer::new(g, 10.0).unwrap();
        let q: Vec<f64> = d
            .grid()
            .nodes()
            .iter()
            .map(|&y| 0.1 + 0.2 * y + 0.3 * (0.5 * y * y - 1.0))
            .collect();
        let dec = d.decompose(&q, 50.0).unwrap();
        assert!((dec.q0 - 0.1).abs() < 1e-9);
        assert!((dec.q1 - 0.2).abs() < 1e-9);
        assert!((dec.q2 - 0.3).abs() < 1e-9);
    }

    #[test]
    fn radial_quadratic_in_higher_dimension() {
        for n in 2..=3 {
            let d = Decomposer::new(radial(n), 10.0).unwrap();
            let q: Vec<f64> = d
                .grid()
                .nodes()
                .iter()
                .map(|&r| 0.7 * (0.5 * r * r - n as f64) - 0.05)
                .collect();
            let dec = d.decompose(&q, 50.0).unwrap();
            let tol = if n % 2 == 1 { 1e-8 } else { 1e-6 };
            assert!((dec.q2 - 0.7).abs() < tol, "n = {n}");
            assert!((dec.q0 + 0.05).abs() < tol);
        }
    }

    #[test]
    fn remainder_is_orthogonal_to_low_modes() {
        let d = Decomposer::new(radial(1), 10.0).unwrap();
        let q: Vec<f64> = d
            .grid()
            .nodes()
            .iter()
            .map(|&y| (-0.1 * y * y).exp() * (1.0 + y.powi(4) / 50.0))
            .collect();
        let (_, rem) = d.decompose_with_remainder(&q, 50.0).unwrap();
        let g = d.grid();
        let m0 = g.integrate_rho(&rem);
        let m2: f64 = rem
            .iter()
            .zip(g.nodes())
            .map(|(r, y)| r * (y * y - 2.0))
            .zip(g.rho_weights())
            .map(|(a, b)| a * b)
            .sum();
        assert!(m0.abs() < 1e-10 && m2.abs() < 1e-10);
    }

    #[test]
    fn support_and_coarseness_errors() {
        let d = Decomposer::new(Arc::new(Grid::radial(1, 60.0, 0.05).unwrap()), 10.0).unwrap();
        assert!(matches!(d.decompose(&vec![0.0; d.grid().len()], 50.0), Err(Error::GridTooCoarse(_))));
        assert!(matches!(
            Decomposer::new(Arc::new(Grid::radial(1, 145.0, 1.5).unwrap()), 10.0),
            Err(Error::GridTooCoarse(_))
        ));
    }
}
