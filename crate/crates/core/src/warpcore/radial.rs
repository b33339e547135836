//! Scalar radial components: candidate profiles ς and their slow-start
//! modification ρ, linear near the origin and equal to ς away from it.

use crate::error::{Error, Result};
use crate::quad::gl_rule;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Central finite difference of order `n` for `f`, second-order accurate.
pub fn central_difference(f: &dyn Fn(f64) -> f64, x: f64, n: usize) -> f64 {
    if n == 0 {
        return f(x);
    }
    let h = f64::EPSILON.powf(1.0 / (n as f64 + 2.0)) * (1.0 + x.abs());
    let mut acc = 0.0;
    let mut binom = 1.0;
    for j in 0..=n {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f(x + (n as f64 / 2.0 - j as f64) * h);
        binom = binom * (n - j) as f64 / (j + 1) as f64;
    }
    acc / h.powi(n as i32)
}

fn falling(a: f64, m: usize) -> f64 {
    (0..m).map(|i| a - i as f64).product()
}

/// Built-in candidate profiles ς on [0, ∞).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SigmaFamily {
    /// ς(ξ) = ln(1+ξ), ς⁻¹(t) = eᵗ − 1.
    Log,
    /// ς(ξ) = (1+ξ)^{1/p} − 1, ς⁻¹(t) = (1+t)^p − 1.
    Power { p: f64 },
    /// ς(ξ) = e^{ξ²} − 1, ς⁻¹(t) = √ln(1+t).
    ExpSquare,
}

impl SigmaFamily {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            SigmaFamily::Log => x.ln_1p(),
            SigmaFamily::Power { p } => (x.ln_1p() / p).exp_m1(),
            SigmaFamily::ExpSquare => (x * x).exp_m1(),
        }
    }

    pub fn deriv(&self, m: usize, x: f64) -> f64 {
        if m == 0 {
            return self.value(x);
        }
        match *self {
            SigmaFamily::Log => {
                let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
                sign * falling(m as f64 - 1.0, m - 1) / (1.0 + x).powi(m as i32)
            }
            SigmaFamily::Power { p } => falling(1.0 / p, m) * (1.0 + x).powf(1.0 / p - m as f64),
            SigmaFamily::ExpSquare => {
                let d1 = |t: f64| 2.0 * t * (t * t).exp();
                central_difference(&d1, x, m - 1)
            }
        }
    }

    pub fn inverse(&self, t: f64) -> f64 {
        match *self {
            SigmaFamily::Log => t.exp_m1(),
            SigmaFamily::Power { p } => (p * t.ln_1p()).exp_m1(),
            SigmaFamily::ExpSquare => t.ln_1p().sqrt(),
        }
    }

    /// m-th derivative of ς⁻¹.
    pub fn inverse_deriv(&self, m: usize, t: f64) -> f64 {
        if m == 0 {
            return self.inverse(t);
        }
        match *self {
            SigmaFamily::Log => t.exp(),
            SigmaFamily::Power { p } => falling(p, m) * (1.0 + t).powf(p - m as f64),
            SigmaFamily::ExpSquare => {
                let d1 = |s: f64| 1.0 / (2.0 * (1.0 + s) * s.ln_1p().sqrt());
                central_difference(&d1, t, m - 1)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            SigmaFamily::Log => "log".into(),
            SigmaFamily::Power { p } => format!("power(p={p})"),
            SigmaFamily::ExpSquare => "expsquare".into(),
        }
    }
}

/// Mollifier used to blend the linear segment into ς.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mollifier {
    /// exp(−1/(1−s²)) on s ∈ (−1, 1), rescaled to (ε, 2ε).
    #[default]
    Bump,
}

const TABLE_PANELS: usize = 512;

struct BumpTable {
    /// Cumulative integral of the raw bump at panel edges.
    edges: Vec<f64>,
    total: f64,
}

fn raw_bump(s: f64) -> f64 {
    if s <= -1.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn gl_panel(a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    gl_rule(16).iter().map(|&(x, w)| w * raw_bump(a + half * (x + 1.0))).sum::<f64>() * half
}

fn bump_table() -> &'static BumpTable {
    static T: OnceLock<BumpTable> = OnceLock::new();
    T.get_or_init(|| {
        let h = 2.0 / TABLE_PANELS as f64;
        let mut edges = Vec::with_capacity(TABLE_PANELS + 1);
        let mut acc = 0.0;
        edges.push(0.0);
        for i in 0..TABLE_PANELS {
            let a = -1.0 + i as f64 * h;
            acc += gl_panel(a, a + h);
            edges.push(acc);
        }
        BumpTable { edges, total: acc }
    })
}

impl Mollifier {
    /// Normalized cumulative distribution on s ∈ [−1, 1].
    pub fn cdf(&self, s: f64) -> f64 {
        if s <= -1.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        let t = bump_table();
        let h = 2.0 / TABLE_PANELS as f64;
        let i = (((s + 1.0) / h).floor() as usize).min(TABLE_PANELS - 1);
        let a = -1.0 + i as f64 * h;
        (t.edges[i] + gl_panel(a, s)) / t.total
    }

    /// Normalized density on s ∈ (−1, 1).
    pub fn density(&self, s: f64) -> f64 {
        raw_bump(s) / bump_table().total
    }
}

/// A slow-started radial component ρ built from a profile ς.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialComponent {
    pub sigma: SigmaFamily,
    pub epsilon: f64,
    pub slope: f64,
    #[serde(default)]
    pub mollifier: Mollifier,
}

impl RadialComponent {
    /// Slow-start construction. `slope = None` picks the midpoint of the
    /// admissible interval (0, ς(ε)/(2ε)).
    pub fn slow_start(sigma: SigmaFamily, epsilon: f64, slope: Option<f64>, mollifier: Mollifier) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if let SigmaFamily::Power { p } = sigma {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidParameter(format!("power exponent must be positive, got {p}")));
            }
        }
        if sigma.value(0.0) != 0.0 {
            return Err(Error::InvalidParameter("profile must vanish at the origin".into()));
        }
        let n = 2000;
        let mut prev = sigma.value(0.0);
        for i in 1..=n {
            let x = 20.0 * epsilon * i as f64 / n as f64;
            let v = sigma.value(x);
            if v.is_infinite() {
                break;
            }
            if !(v > prev) {
                return Err(Error::NotIncreasing(x));
            }
            prev = v;
        }
        let cmax = sigma.value(epsilon) / (2.0 * epsilon);
        let c = slope.unwrap_or(0.5 * cmax);
        if !(c > 0.0 && c < cmax) {
            return Err(Error::InvalidParameter(format!("slope {c} outside (0, {cmax})")));
        }
        Ok(Self { sigma, epsilon, slope: c, mollifier })
    }

    /// Ω on [0, ∞): 1 on [0, ε], 0 on [2ε, ∞).
    pub fn omega(&self, x: f64) -> f64 {
        let x = x.abs();
        let e = self.epsilon;
        if x <= e {
            1.0
        } else if x >= 2.0 * e {
            0.0
        } else {
            1.0 - self.mollifier.cdf((2.0 * x - 3.0 * e) / e)
        }
    }

    /// Mollifier density on (ε, 2ε), normalized to unit integral.
    pub fn mollifier_density(&self, x: f64) -> f64 {
        let e = self.epsilon;
        if x <= e || x >= 2.0 * e {
            0.0
        } else {
            self.mollifier.density((2.0 * x - 3.0 * e) / e) * 2.0 / e
        }
    }

    fn rho_pos(&self, x: f64) -> f64 {
        let e = self.epsilon;
        if x < e {
            self.slope * x
        } else if x >= 2.0 * e {
            self.sigma.value(x)
        } else {
            let om = self.omega(x);
            self.slope * x * om + (1.0 - om) * self.sigma.value(x)
        }
    }

    pub fn rho(&self, x: f64) -> f64 {
        if x < 0.0 {
            -self.rho_pos(-x)
        } else {
            self.rho_pos(x)
        }
    }

    /// ρ′ (even function).
    pub fn rho_d1(&self, x: f64) -> f64 {
        let x = x.abs();
        let e = self.epsilon;
        if x < e {
            self.slope
        } else if x >= 2.0 * e {
            self.sigma.deriv(1, x)
        } else {
            let om = self.omega(x);
            let s = self.sigma.value(x);
            self.slope * om + (1.0 - om) * self.sigma.deriv(1, x) + self.mollifier_density(x) * (s - self.slope * x)
        }
    }

    /// m-th derivative of ρ: closed form on the linear and ς regions,
    /// finite differences of ρ′ on the transition zone.
    pub fn rho_deriv(&self, m: usize, x: f64) -> f64 {
        match m {
            0 => self.rho(x),
            1 => self.rho_d1(x),
            _ => {
                let a = x.abs();
                let sign = if x < 0.0 && m % 2 == 0 { -1.0 } else { 1.0 };
                if a < self.epsilon {
                    0.0
                } else if a >= 2.0 * self.epsilon {
                    sign * self.sigma.deriv(m, a)
                } else {
                    central_difference(&|t| self.rho_d1(t), x, m - 1)
                }
            }
        }
    }

    /// Start of the ς region in the target variable, ς(2ε).
    pub fn upper_knot(&self) -> f64 {
        self.sigma.value(2.0 * self.epsilon)
    }

    fn inv_pos(&self, t: f64) -> f64 {
        let e = self.epsilon;
        let c = self.slope;
        if t < c * e {
            return t / c;
        }
        let top = self.upper_knot();
        if t >= top {
            return self.sigma.inverse(t);
        }
        let (mut lo, mut hi) = (e, 2.0 * e);
        while hi - lo > 1e-3 * e {
            let mid = 0.5 * (lo + hi);
            if self.rho_pos(mid) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..50 {
            let f = self.rho_pos(x) - t;
            if f == 0.0 {
                break;
            }
            if f < 0.0 {
                lo = lo.max(x);
            } else {
                hi = hi.min(x);
            }
            let mut nx = x - f / self.rho_d1(x);
            if !(nx > lo && nx < hi) {
                nx = 0.5 * (lo + hi);
            }
            let done = (nx - x).abs() <= 1e-15 * x;
            x = nx;
            if done {
                break;
            }
        }
        x
    }

    /// ρ∗ = ρ⁻¹.
    pub fn inv(&self, t: f64) -> f64 {
        if t < 0.0 {
            -self.inv_pos(-t)
        } else {
            self.inv_pos(t)
        }
    }

    /// ρ∗′ (even function).
    pub fn inv_d1(&self, t: f64) -> f64 {
        let a = t.abs();
        if a < self.slope * self.epsilon {
            1.0 / self.slope
        } else if a >= self.upper_knot() {
            self.sigma.inverse_deriv(1, a)
        } else {
            1.0 / self.rho_d1(self.inv_pos(a))
        }
    }

    /// m-th derivative of ρ∗.
    pub fn inv_deriv(&self, m: usize, t: f64) -> f64 {
        match m {
            0 => self.inv(t),
            1 => self.inv_d1(t),
            _ => {
                let a = t.abs();
                let sign = if t < 0.0 && m % 2 == 0 { -1.0 } else { 1.0 };
                if a < self.slope * self.epsilon {
                    0.0
                } else if a >= self.upper_knot() {
                    sign * self.sigma.inverse_deriv(m, a)
                } else {
                    central_difference(&|s| self.inv_d1(s), t, m - 1)
                }
            }
        }
    }

    /// ρ̃(t) = ρ(t)/t for t ≥ 0, with the constant slope near 0.
    pub fn rho_tilde(&self, t: f64) -> f64 {
        if t < 0.5 * self.epsilon {
            self.slope
        } else {
            self.rho_pos(t) / t
        }
    }

    /// ρ̃∗(t) = ρ∗(t)/t for t ≥ 0, with 1/c near 0.
    pub fn inv_tilde(&self, t: f64) -> f64 {
        if t < 0.5 * self.slope * self.epsilon {
            1.0 / self.slope
        } else {
            self.inv_pos(t) / t
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_component() -> RadialComponent {
        RadialComponent::slow_start(SigmaFamily::Log, 1.0, Some(0.3 * 2f64.ln()), Mollifier::Bump).unwrap()
    }

    #[test]
    fn linear_and_sigma_regions() {
        let r = log_component();
        assert_eq!(r.rho(0.5), 0.5 * r.slope);
        assert_eq!(r.rho(3.0), 4f64.ln());
        let v = r.rho(1.5);
        assert!(v > r.slope * 1.5 && v < 2.5f64.ln());
    }

    #[test]
    fn mollifier_cdf_is_normalized_and_symmetric() {
        let m = Mollifier::Bump;
        assert_eq!(m.cdf(-1.0), 0.0);
        assert_eq!(m.cdf(1.0), 1.0);
        assert!((m.cdf(0.0) - 0.5).abs() < 1e-14);
        for s in [-0.7, -0.2, 0.3, 0.9] {
            assert!((m.cdf(s) + m.cdf(-s) - 1.0).abs() < 1e-14);
        }
        // density integrates to the cdf increment
        let inc = crate::quad::integrate_1d(&|s| m.density(s), -0.4, 0.6, &Default::default()).value;
        assert!((inc - (m.cdf(0.6) - m.cdf(-0.4))).abs() < 1e-13);
    }

    #[test]
    fn omega_matches_its_integral_definition() {
        // Ω(ξ) = ∫_{-∞}^{ξ} (φ(−η) − φ(η)) dη, evaluated by independent quadrature.
        let r = log_component();
        for x in [1.1, 1.37, 1.5, 1.8, 1.99] {
            let q = crate::quad::integrate_1d(&|t| r.mollifier_density(t), 1.0, x, &Default::default()).value;
            assert!((r.omega(x) - (1.0 - q)).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn slope_validation() {
        let cmax = 2f64.ln() / 2.0;
        assert!(RadialComponent::slow_start(SigmaFamily::Log, 1.0, Some(cmax), Mollifier::Bump).is_err());
        assert!(RadialComponent::slow_start(SigmaFamily::Log, 1.0, Some(0.0), Mollifier::Bump).is_err());
        let r = RadialComponent::slow_start(SigmaFamily::Log, 1.0, None, Mollifier::Bump).unwrap();
        assert!((r.slope - 0.5 * cmax).abs() < 1e-15);
    }

    #[test]
    fn inverse_round_trip_all_regions() {
        let r = log_component();
        for i in -400..=400 {
            let x = i as f64 * 0.0137;
            let y = r.inv(r.rho(x));
            assert!((y - x).abs() <= 1e-13 * (1.0 + x.abs()), "x={x} y={y}");
        }
    }

    #[test]
    fn derivatives_against_finite_differences() {
        let r = log_component();
        for x in [0.3, 1.2, 1.5, 1.9, 2.5, -1.6] {
            let h = 1e-6;
            let fd = (r.rho(x + h) - r.rho(x - h)) / (2.0 * h);
            assert!((fd - r.rho_d1(x)).abs() < 1e-7, "x={x}");
            let t = r.rho(x);
            let fdi = (r.inv(t + h) - r.inv(t - h)) / (2.0 * h);
            assert!((fdi - r.inv_d1(t)).abs() < 1e-6 * (1.0 + fdi.abs()), "t={t}");
        }
    }

    #[test]
    fn sigma_closed_forms() {
        let p = SigmaFamily::Power { p: 2.0 };
        assert!((p.value(3.0) - 1.0).abs() < 1e-15);
        assert!((p.inverse(1.0) - 3.0).abs() < 1e-14);
        assert_eq!(p.inverse_deriv(3, 1.0), 0.0);
        assert!((p.inverse_deriv(2, 0.5) - 2.0).abs() < 1e-14);
        let l = SigmaFamily::Log;
        assert!((l.deriv(2, 1.0) + 0.25).abs() < 1e-15);
        assert!((l.deriv(3, 1.0) - 0.25).abs() < 1e-15);
        let e = SigmaFamily::ExpSquare;
        assert!((e.inverse(e.value(1.3)) - 1.3).abs() < 1e-12);
        assert!((e.deriv(2, 0.7) - (2.0 + 4.0 * 0.49) * 0.49f64.exp()).abs() < 1e-5);
    }

    #[test]
    fn expsquare_is_increasing_and_accepted() {
        assert!(RadialComponent::slow_start(SigmaFamily::ExpSquare, 0.5, None, Mollifier::Bump).is_ok());
    }
}
