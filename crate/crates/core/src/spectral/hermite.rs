use crate::grid::{Geometry, Grid};

/// One-dimensional Hermite polynomials
/// `h_m(y) = sum_l m! / (l! (m-2l)!) (-1)^l y^{m-2l}`,
/// orthogonal against `e^{-y^2/4}/sqrt(4 pi)` with `||h_m||^2 = m! 2^m`.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    max_degree: usize,
    /// `coefficients[m][k]` multiplies `y^k` in `h_m`.
    coefficients: Vec<Vec<f64>>,
}

impl HermiteBasis {
    pub fn new(max_degree: usize) -> Self {
        let mut coefficients = Vec::with_capacity(max_degree + 1);
        for m in 0..=max_degree {
            let mut c = vec![0.0; m + 1];
            let mut l = 0;
            while 2 * l <= m {
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                c[m - 2 * l] = sign * factorial(m) / (factorial(l) * factorial(m - 2 * l));
                l += 1;
            }
            coefficients.push(c);
        }
        Self {
            max_degree,
            coefficients,
        }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn coefficients(&self, m: usize) -> &[f64] {
        &self.coefficients[m]
    }

    /// `h_m(y)` by Horner on the coefficient table.
    pub fn eval(&self, m: usize, y: f64) -> f64 {
        self.coefficients[m].iter().rev().fold(0.0, |acc, c| acc * y + c)
    }

    /// `h_0(y) .. h_{max_degree}(y)` by the three-term recurrence
    /// `h_{m+1} = y h_m - 2 m h_{m-1}`.
    pub fn eval_all(&self, y: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.max_degree + 1);
        out.push(1.0);
        if self.max_degree >= 1 {
            out.push(y);
        }
        for m in 1..self.max_degree {
            let next = y * out[m] - 2.0 * m as f64 * out[m - 1];
            out.push(next);
        }
        out
    }

    /// `m! 2^m`.
    pub fn norm_sq(m: usize) -> f64 {
        factorial(m) * 2f64.powi(m as i32)
    }

    /// Eigenvalue of `L` on `h_m`.
    pub fn eigenvalue(m: usize) -> f64 {
        1.0 - 0.5 * m as f64
    }
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// Quadrature Gram matrix `int h_i h_j rho` in one dimension.
///
/// On a half-line grid the integrand is extended by reflection, so odd
/// pairings vanish exactly and even ones use the one-sided nodes.
pub fn orthogonality_matrix(grid: &Grid, max_degree: usize) -> Vec<Vec<f64>> {
    let basis = HermiteBasis::new(max_degree);
    let dy = grid.dy();
    let nodes = grid.nodes();
    let len = nodes.len();
    let gauss = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    let simpson = |i: usize| {
        let w = if i == 0 || i == len - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w * dy / 3.0
    };
    let mut gram = vec![vec![0.0; max_degree + 1]; max_degree + 1];
    for (k, &y) in nodes.iter().enumerate() {
        let rho = simpson(k) * gauss * (-0.25 * y * y).exp();
        let hv = basis.eval_all(y);
        let hm = match grid.geometry() {
            Geometry::Line => None,
            Geometry::Radial { .. } => Some(basis.eval_all(-y)),
        };
        for i in 0..=max_degree {
            for j in 0..=max_degree {
                let v = match &hm {
                    None => hv[i] * hv[j],
                    Some(neg) => hv[i] * hv[j] + neg[i] * neg[j],
                };
                gram[i][j] += rho * v;
            }
        }
    }
    gram
}

/// `max_{i,j} |G_ij - i! 2^i delta_ij|` for the Gram matrix above.
pub fn orthogonality_defect(grid: &Grid, max_degree: usize) -> f64 {
    let gram = orthogonality_matrix(grid, max_degree);
    let mut worst: f64 = 0.0;
    for (i, row) in gram.iter().enumerate() {
        for (j, &g) in row.iter().enumerate() {
            let target = if i == j { HermiteBasis::norm_sq(i) } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}
