//! Small numerical kernels shared by the modules: adaptive quadrature,
//! log-domain helpers, interpolation and least squares.

/// A real exponent with a fast path for small integers.
#[derive(Debug, Clone, Copy)]
pub struct Power {
    exp: f64,
    int: Option<i32>,
}

impl Power {
    pub fn new(exp: f64) -> Self {
        let int = (exp.fract() == 0.0 && exp.abs() <= 16.0).then_some(exp as i32);
        Self { exp, int }
    }

    pub fn exponent(&self) -> f64 {
        self.exp
    }

    /// `x^exp` for `x >= 0`, with `0^0 = 1`.
    #[inline]
    pub fn of(&self, x: f64) -> f64 {
        match self.int {
            Some(0) => 1.0,
            Some(1) => x,
            Some(2) => x * x,
            Some(k) => x.powi(k),
            None => x.powf(self.exp),
        }
    }
}

/// `|v|^{p-1} v`, the odd power used by the nonlinearity. Zero maps to zero.
#[inline]
pub fn signed_pow(v: f64, pm1: &Power) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        pm1.of(v.abs()) * v
    }
}

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod 7/15 panel: returns (kronrod, |kronrod - gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    (k * half, ((k - g) * half).abs())
}

/// Adaptive Gauss-Kronrod quadrature on a finite interval.
///
/// Panels are bisected until each satisfies its share of
/// `max(abs_tol, rel_tol * |I|)`; `max_depth` bounds the recursion.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    let (whole, _) = gk15(&f, a, b);
    let target = abs_tol.max(rel_tol * whole.abs());
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0;
    let width = b - a;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        let share = target * (hi - lo) / width;
        if err <= share.max(f64::MIN_POSITIVE) || depth >= 40 {
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

/// Cubic Hermite interpolation on `[x0, x1]` with values and slopes.
#[inline]
pub fn hermite_cubic(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Ordinary least-squares fit `y = intercept + slope * x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Linear interpolation in a table with uniform spacing starting at `x0`.
pub fn lerp_uniform(values: &[f64], x0: f64, dx: f64, x: f64) -> Option<f64> {
    let t = (x - x0) / dx;
    if t < 0.0 || values.is_empty() {
        return None;
    }
    let i = t.floor() as usize;
    if i + 1 >= values.len() {
        return (i + 1 == values.len() && t - i as f64 == 0.0).then(|| values[i]);
    }
    let frac = t - i as f64;
    Some(values[i] * (1.0 - frac) + values[i + 1] * frac)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_integrates_smooth_functions() {
        let v = integrate(|x| x.exp(), 0.0, 1.0, 1e-14, 0.0);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-14);
        let v = integrate(|x| (-x * x).exp(), -8.0, 8.0, 1e-13, 0.0);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        let v = integrate(|x| x.sqrt(), 0.0, 1.0, 1e-12, 0.0);
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn log_add_exp_handles_extremes() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 2.0), 2.0);
        assert!((log_add_exp(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn power_fast_paths_match_powf() {
        for e in [0.0, 1.0, 2.0, 3.0, 0.5, 1.7] {
            let pw = Power::new(e);
            for x in [0.0, 0.3, 1.0, 2.5] {
                let want = if e == 0.0 { 1.0 } else { f64::powf(x, e) };
                assert!((pw.of(x) - want).abs() <= 1e-15 * want.abs().max(1.0));
            }
        }
        assert_eq!(signed_pow(-2.0, &Power::new(2.0)), -8.0);
        assert_eq!(signed_pow(0.0, &Power::new(0.5)), 0.0);
    }

    #[test]
    fn hermite_cubic_reproduces_cubics() {
        let f = |x: f64| x * x * x - 2.0 * x;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let v = hermite_cubic(1.0, 2.0, f(1.0), f(2.0), df(1.0), df(2.0), 1.3);
        assert!((v - f(1.3)).abs() < 1e-14);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (b, m) = linear_fit(&xs, &ys).unwrap();
        assert!((b - 2.0).abs() < 1e-14 && (m + 0.5).abs() < 1e-14);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }
}
