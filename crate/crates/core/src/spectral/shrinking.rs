use serde::Serialize;

use super::decompose::ModeDecomposition;

/// The five components constrained by the shrinking set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Component {
    Q0,
    Q1,
    Q2,
    QMinus,
    QE,
}

impl Component {
    pub const ALL: [Component; 5] = [
        Component::Q0,
        Component::Q1,
        Component::Q2,
        Component::QMinus,
        Component::QE,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Component::Q0 => "q0",
            Component::Q1 => "q1",
            Component::Q2 => "q2",
            Component::QMinus => "qminus",
            Component::QE => "qe",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }

    /// Whether the component belongs to the finite-dimensional (unstable)
    /// part through which exits are expected.
    pub fn is_unstable(&self) -> bool {
        matches!(self, Component::Q0 | Component::Q1)
    }
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// `S_A(s)`: bounds `(A/s^2, A/s^2, A^2 ln^2 s/s^2, A/s^2, A^2/sqrt s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShrinkingSetSpec {
    pub a: f64,
}

/// Outcome of a membership test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub s: f64,
    /// `|component| / bound`, in the order of [`Component::ALL`].
    pub ratios: [f64; 5],
    pub inside: [bool; 5],
    pub member: bool,
    /// Component with the largest ratio above 1, if any.
    pub violator: Option<Component>,
}

impl Membership {
    pub fn ratio(&self, c: Component) -> f64 {
        self.ratios[c.index()]
    }
}

impl ShrinkingSetSpec {
    pub fn new(a: f64) -> Self {
        Self { a }
    }

    pub fn bounds(&self, s: f64) -> [f64; 5] {
        let a = self.a;
        let inv_s2 = 1.0 / (s * s);
        let ln_s = s.ln();
        [
            a * inv_s2,
            a * inv_s2,
            a * a * ln_s * ln_s * inv_s2,
            a * inv_s2,
            a * a / s.sqrt(),
        ]
    }

    pub fn classify(&self, dec: &ModeDecomposition) -> Membership {
        let bounds = self.bounds(dec.s);
        let values = dec.components();
        let mut ratios = [0.0; 5];
        let mut inside = [true; 5];
        let mut violator = None;
        let mut worst = 1.0;
        for (i, c) in Component::ALL.iter().enumerate() {
            let r = values[i].abs() / bounds[i];
            ratios[i] = r;
            // NaN compares false and therefore counts as outside.
            inside[i] = r <= 1.0;
            if !inside[i] && (violator.is_none() || r > worst || r.is_nan()) {
                worst = r;
                violator = Some(*c);
            }
        }
        Membership {
            s: dec.s,
            ratios,
            inside,
            member: inside.iter().all(|&b| b),
            violator,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_member() {
        let m = ShrinkingSetSpec::new(20.0).classify(&ModeDecomposition::zero(25.0));
        assert!(m.member);
        assert_eq!(m.ratios, [0.0; 5]);
        assert_eq!(m.violator, None);
    }

    #[test]
    fn q0_violation() {
        let spec = ShrinkingSetSpec::new(20.0);
        let s = 25.0;
        let mut d = ModeDecomposition::zero(s);
        d.q0 = 2.0 * 20.0 / (s * s);
        let m = spec.classify(&d);
        assert!(!m.member);
        assert_eq!(m.violator, Some(Component::Q0));
        assert!((m.ratio(Component::Q0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_is_closed() {
        let spec = ShrinkingSetSpec::new(20.0);
        let s = 25.0;
        let mut d = ModeDecomposition::zero(s);
        d.q2 = spec.bounds(s)[2];
        let m = spec.classify(&d);
        assert!(m.member);
        assert_eq!(m.ratio(Component::Q2), 1.0);
    }

    #[test]
    fn largest_ratio_wins() {
        let spec = ShrinkingSetSpec::new(2.0);
        let s = 10.0;
        let b = spec.bounds(s);
        let mut d = ModeDecomposition::zero(s);
        d.q0 = -1.5 * b[0];
        d.qe_norm = 3.0 * b[4];
        assert_eq!(spec.classify(&d).violator, Some(Component::QE));
    }

    #[test]
    fn bounds_decrease_past_e() {
        let spec = ShrinkingSetSpec::new(5.0);
        let mut prev = spec.bounds(3.0);
        for k in 1..200 {
            let cur = spec.bounds(3.0 + k as f64 * 0.5);
            for i in 0..5 {
                assert!(cur[i] > 0.0 && cur[i] < prev[i]);
            }
            prev = cur;
        }
    }
}
