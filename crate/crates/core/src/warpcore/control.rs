use serde::{Deserialize, Serialize};

/// Control weight v₀ on R^d; radial, submultiplicative for c ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ControlWeight {
    /// v₀ ≡ c.
    Constant { c: f64 },
    /// v₀(τ) = c·(1+|τ|)^a.
    Polynomial { c: f64, a: f64 },
    /// v₀(τ) = c·(1+|τ|)·e^{|τ|}.
    Exponential { c: f64 },
}

impl ControlWeight {
    pub fn at_radius(&self, r: f64) -> f64 {
        match *self {
            ControlWeight::Constant { c } => c,
            ControlWeight::Polynomial { c, a } => c * (1.0 + r).powf(a),
            ControlWeight::Exponential { c } => c * (1.0 + r) * r.exp(),
        }
    }

    pub fn eval(&self, tau: &[f64]) -> f64 {
        self.at_radius(crate::util::norm(tau))
    }

    pub fn constant(&self) -> f64 {
        match *self {
            ControlWeight::Constant { c } | ControlWeight::Polynomial { c, .. } | ControlWeight::Exponential { c } => c,
        }
    }

    pub fn with_constant(&self, c: f64) -> Self {
        match *self {
            ControlWeight::Constant { .. } => ControlWeight::Constant { c },
            ControlWeight::Polynomial { a, .. } => ControlWeight::Polynomial { c, a },
            ControlWeight::Exponential { .. } => ControlWeight::Exponential { c },
        }
    }

    /// The induced weight w₀ = v₀^d.
    pub fn power(&self, tau: &[f64], d: usize) -> f64 {
        self.eval(tau).powi(d as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families() {
        assert_eq!(ControlWeight::Constant { c: 2.0 }.eval(&[5.0]), 2.0);
        assert!((ControlWeight::Polynomial { c: 1.0, a: 2.0 }.eval(&[3.0, 4.0]) - 36.0).abs() < 1e-12);
        assert!((ControlWeight::Exponential { c: 1.0 }.eval(&[1.0]) - 2.0 * 1f64.exp()).abs() < 1e-12);
        let w = ControlWeight::Exponential { c: 1.0 }.with_constant(3.0);
        assert_eq!(w.constant(), 3.0);
    }
}
