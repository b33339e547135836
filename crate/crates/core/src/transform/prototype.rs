//! Windows θ on warped-frequency space.

use crate::error::{Error, Result};
use crate::quad::{integrate_1d, integrate_box, unit_sphere_area, QuadConfig};
use crate::util;
use serde::{Deserialize, Serialize};

/// Radius beyond which e^{−π|υ|²} drops below 1e−16.
pub const GAUSSIAN_RADIUS: f64 = 3.42;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PrototypeFamily {
    /// e^{−π|υ|²}.
    Gaussian,
    /// exp(−1/(1−|υ/r|²)) on B_r(0).
    Bump { r: f64 },
    /// (υ₁/r)·exp(−1/(1−|υ/r|²)); orthogonal to every radial window.
    OddBump { r: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub family: PrototypeFamily,
    pub d: usize,
    pub amplitude: f64,
    norm_sq: f64,
}

fn bump_profile(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn hermite(n: usize, y: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * y);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = 2.0 * y * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

impl Prototype {
    fn build(family: PrototypeFamily, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if let PrototypeFamily::Bump { r } | PrototypeFamily::OddBump { r } = family {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("bump radius must be positive, got {r}")));
            }
        }
        let mut p = Self { family, d, amplitude: 1.0, norm_sq: 0.0 };
        p.norm_sq = p.compute_norm_sq();
        Ok(p)
    }

    pub fn gaussian(d: usize) -> Result<Self> {
        Self::build(PrototypeFamily::Gaussian, d)
    }

    pub fn bump(d: usize, r: f64) -> Result<Self> {
        Self::build(PrototypeFamily::Bump { r }, d)
    }

    pub fn odd_bump(d: usize, r: f64) -> Result<Self> {
        Self::build(PrototypeFamily::OddBump { r }, d)
    }

    /// Parses "gauss", "bump" or "bump:r".
    pub fn parse(spec: &str, d: usize) -> Result<Self> {
        let spec = spec.trim();
        match spec {
            "gauss" | "gaussian" => Self::gaussian(d),
            "bump" => Self::bump(d, 1.0),
            _ => {
                if let Some(r) = spec.strip_prefix("bump:") {
                    let r: f64 = r.parse().map_err(|_| Error::InvalidParameter(format!("bad bump radius in {spec:?}")))?;
                    Self::bump(d, r)
                } else {
                    Err(Error::InvalidParameter(format!("unknown prototype {spec:?}")))
                }
            }
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut p = self.clone();
        p.amplitude *= a;
        p.norm_sq *= a * a;
        p
    }

    pub fn name(&self) -> String {
        match self.family {
            PrototypeFamily::Gaussian => "gauss".into(),
            PrototypeFamily::Bump { r } => format!("bump:{r}"),
            PrototypeFamily::OddBump { r } => format!("oddbump:{r}"),
        }
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self.family, PrototypeFamily::Gaussian)
    }

    /// Radius outside which θ vanishes (exactly for bumps, below 1e−16 for the Gaussian).
    pub fn support_radius(&self) -> f64 {
        match self.family {
            PrototypeFamily::Gaussian => GAUSSIAN_RADIUS,
            PrototypeFamily::Bump { r } | PrototypeFamily::OddBump { r } => r,
        }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        let a = self.amplitude;
        match self.family {
            PrototypeFamily::Gaussian => a * (-std::f64::consts::PI * u.iter().map(|x| x * x).sum::<f64>()).exp(),
            PrototypeFamily::Bump { r } => a * bump_profile(util::norm(u) / r),
            PrototypeFamily::OddBump { r } => a * (u[0] / r) * bump_profile(util::norm(u) / r),
        }
    }

    /// ∂^α θ(υ): Hermite closed form for the Gaussian, nested central
    /// differences otherwise.
    pub fn partial(&self, alpha: &[usize], u: &[f64]) -> f64 {
        match self.family {
            PrototypeFamily::Gaussian => {
                let sp = std::f64::consts::PI.sqrt();
                let mut v = self.amplitude;
                for (&n, &x) in alpha.iter().zip(u) {
                    let y = sp * x;
                    v *= (-sp).powi(n as i32) * hermite(n, y) * (-y * y).exp();
                }
                v
            }
            _ => {
                let f = |p: &[f64]| nalgebra::DMatrix::from_element(1, 1, self.eval(p));
                crate::admissibility::fd_partial(&f, u, alpha)[(0, 0)]
            }
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    fn compute_norm_sq(&self) -> f64 {
        let d = self.d;
        let a2 = self.amplitude * self.amplitude;
        match self.family {
            PrototypeFamily::Gaussian => a2 * 2f64.powf(-(d as f64) / 2.0),
            PrototypeFamily::Bump { r } | PrototypeFamily::OddBump { r } => {
                let odd = matches!(self.family, PrototypeFamily::OddBump { .. });
                let cfg = QuadConfig { rel_tol: 1e-13, abs_tol: 0.0, max_panels: 4096, ..Default::default() };
                let radial = integrate_1d(
                    &|s: f64| {
                        let b = bump_profile(s);
                        let extra = if odd { s * s / d as f64 } else { 1.0 };
                        b * b * extra * s.powi(d as i32 - 1)
                    },
                    0.0,
                    1.0,
                    &cfg,
                )
                .value;
                a2 * unit_sphere_area(d) * radial * r.powi(d as i32)
            }
        }
    }

    /// ⟨a, b⟩ in L²(R^d), by quadrature over the common support box.
    pub fn inner(a: &Prototype, b: &Prototype) -> Result<f64> {
        if a.d != b.d {
            return Err(Error::DimensionMismatch { expected: a.d, got: b.d });
        }
        if a.family == b.family {
            return Ok(a.amplitude * b.amplitude * a.norm_sq / (a.amplitude * a.amplitude));
        }
        let r = a.support_radius().min(b.support_radius());
        let lo = vec![-r; a.d];
        let hi = vec![r; a.d];
        let cfg = QuadConfig { rel_tol: 1e-11, abs_tol: 1e-15, max_panels: if a.d == 1 { 2048 } else { 64 }, ..Default::default() };
        let f = |u: &[f64]| a.eval(u) * b.eval(u);
        Ok(integrate_box(&f, &lo, &hi, &cfg).value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_match_independent_quadrature() {
        for d in 1..=2 {
            for p in [Prototype::gaussian(d).unwrap(), Prototype::bump(d, 1.3).unwrap(), Prototype::odd_bump(d, 0.8).unwrap()] {
                let r = p.support_radius();
                let cfg = QuadConfig { rel_tol: 1e-10, max_panels: 256, ..Default::default() };
                let q = integrate_box(&|u: &[f64]| p.eval(u).powi(2), &vec![-r; d], &vec![r; d], &cfg).value;
                assert!((q - p.norm_sq()).abs() < 1e-8 * q, "{} d={d}: {q} vs {}", p.name(), p.norm_sq());
            }
        }
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let p = Prototype::bump(2, 1.0).unwrap();
        assert_eq!(p.eval(&[0.8, 0.6]), 0.0);
        assert_eq!(p.eval(&[3.0, 0.0]), 0.0);
        assert!(p.eval(&[0.5, 0.5]) > 0.0);
    }

    #[test]
    fn gaussian_partials() {
        let p = Prototype::gaussian(2).unwrap();
        let u = [0.3, -0.2];
        let pi = std::f64::consts::PI;
        let expect = (-2.0 * pi * u[0]) * p.eval(&u);
        assert!((p.partial(&[1, 0], &u) - expect).abs() < 1e-14);
        let expect2 = (4.0 * pi * pi * u[1] * u[1] - 2.0 * pi) * p.eval(&u);
        assert!((p.partial(&[0, 2], &u) - expect2).abs() < 1e-13);
    }

    #[test]
    fn odd_and_even_are_orthogonal() {
        let a = Prototype::bump(1, 1.0).unwrap();
        let b = Prototype::odd_bump(1, 1.0).unwrap();
        assert!(Prototype::inner(&a, &b).unwrap().abs() < 1e-14);
        assert!((Prototype::inner(&a, &a.scaled(2.0)).unwrap() - 2.0 * a.norm_sq()).abs() < 1e-15);
    }

    #[test]
    fn parse_specs() {
        assert!(matches!(Prototype::parse("bump:2", 1).unwrap().family, PrototypeFamily::Bump { r } if r == 2.0));
        assert!(Prototype::parse("gauss", 3).is_ok());
        assert!(Prototype::parse("box", 1).is_err());
    }
}
