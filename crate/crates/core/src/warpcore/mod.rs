//! Warping functions Φ: D → R^d together with Φ⁻¹, the inverse Jacobian
//! A(τ) = DΦ⁻¹(τ) and the weight w(τ) = det A(τ).

mod control;
pub mod radial;

pub use control::ControlWeight;
pub use radial::{central_difference, Mollifier, RadialComponent, SigmaFamily};

use crate::error::{Error, Result};
use crate::util;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Building blocks of a warp. Components of `Separable` are one-dimensional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WarpKind {
    Identity,
    /// Φ = ln on (0, ∞); one-dimensional.
    Log,
    Separable { components: Vec<WarpKind> },
    Exotic2d,
    Radial { component: RadialComponent },
}

/// Frequency domain D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Full,
    PositiveOrthant,
    Product { intervals: Vec<(f64, f64)> },
}

fn default_margin() -> f64 {
    1e-9
}

/// A warping function on a d-dimensional domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warp {
    pub d: usize,
    #[serde(flatten)]
    pub kind: WarpKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlWeight>,
    /// Relative interior margin for domain membership tests.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

impl WarpKind {
    fn is_scalar(&self) -> bool {
        matches!(self, WarpKind::Identity | WarpKind::Log | WarpKind::Radial { .. })
    }

    fn fwd1(&self, x: f64) -> f64 {
        match self {
            WarpKind::Log => x.ln(),
            WarpKind::Radial { component } => component.rho(x),
            _ => x,
        }
    }

    fn inv1(&self, t: f64) -> f64 {
        match self {
            WarpKind::Log => t.exp(),
            WarpKind::Radial { component } => component.inv(t),
            _ => t,
        }
    }

    fn a1(&self, t: f64) -> f64 {
        match self {
            WarpKind::Log => t.exp(),
            WarpKind::Radial { component } => component.inv_d1(t),
            _ => 1.0,
        }
    }

    fn interval1(&self) -> (f64, f64) {
        match self {
            WarpKind::Log => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn name(&self) -> String {
        match self {
            WarpKind::Identity => "identity".into(),
            WarpKind::Log => "log".into(),
            WarpKind::Separable { components } => {
                let names: Vec<String> = components.iter().map(|c| c.name()).collect();
                format!("separable({})", names.join(","))
            }
            WarpKind::Exotic2d => "exotic2d".into(),
            WarpKind::Radial { component } => format!("radial[{}]", component.sigma.name()),
        }
    }
}

impl Warp {
    pub fn identity(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(Self { d, kind: WarpKind::Identity, control: Some(ControlWeight::Constant { c: 1.0 }), margin: default_margin() })
    }

    /// The pure logarithmic warp on (0, ∞).
    pub fn log() -> Self {
        Self { d: 1, kind: WarpKind::Log, control: Some(ControlWeight::Exponential { c: 1.0 }), margin: default_margin() }
    }

    /// Coordinate-wise product of one-dimensional warps.
    pub fn separable(components: Vec<Warp>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("separable warp needs at least one component".into()));
        }
        let mut kinds = Vec::with_capacity(components.len());
        for c in &components {
            if c.d != 1 || !c.kind.is_scalar() {
                return Err(Error::InvalidParameter(format!("component {} is not one-dimensional", c.kind.name())));
            }
            kinds.push(c.kind.clone());
        }
        // Identity and log components are dominated by (1+|τ|)e^{|τ|}; radial
        // components need a fitted constant, so none is attached then.
        let control = if kinds.iter().all(|k| matches!(k, WarpKind::Identity | WarpKind::Log)) {
            Some(ControlWeight::Exponential { c: 1.0 })
        } else {
            None
        };
        Ok(Self { d: kinds.len(), kind: WarpKind::Separable { components: kinds }, control, margin: default_margin() })
    }

    pub fn exotic2d() -> Self {
        Self { d: 2, kind: WarpKind::Exotic2d, control: None, margin: default_margin() }
    }

    /// Radial warp ξ ↦ ρ̃(|ξ|)·ξ.
    pub fn radial(component: RadialComponent, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(Self { d, kind: WarpKind::Radial { component }, control: None, margin: default_margin() })
    }

    pub fn with_control(mut self, control: Option<ControlWeight>) -> Self {
        self.control = control;
        self
    }

    /// Checks structural consistency, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            WarpKind::Log if self.d != 1 => Err(Error::DimensionMismatch { expected: 1, got: self.d }),
            WarpKind::Exotic2d if self.d != 2 => Err(Error::DimensionMismatch { expected: 2, got: self.d }),
            WarpKind::Separable { components } => {
                if components.len() != self.d {
                    return Err(Error::DimensionMismatch { expected: components.len(), got: self.d });
                }
                if components.iter().any(|c| !c.is_scalar()) {
                    return Err(Error::InvalidParameter("separable components must be one-dimensional".into()));
                }
                Ok(())
            }
            WarpKind::Radial { component } => {
                RadialComponent::slow_start(component.sigma, component.epsilon, Some(component.slope), component.mollifier)?;
                if self.d == 0 {
                    return Err(Error::InvalidParameter("dimension must be at least 1".into()));
                }
                Ok(())
            }
            _ if self.d == 0 => Err(Error::InvalidParameter("dimension must be at least 1".into())),
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn name(&self) -> String {
        self.kind.name()
    }

    pub fn control(&self) -> Option<&ControlWeight> {
        self.control.as_ref()
    }

    pub fn radial_component(&self) -> Option<&RadialComponent> {
        match &self.kind {
            WarpKind::Radial { component } => Some(component),
            _ => None,
        }
    }

    /// Per-coordinate open intervals whose product is D.
    pub fn domain_intervals(&self) -> Vec<(f64, f64)> {
        match &self.kind {
            WarpKind::Log => vec![(0.0, f64::INFINITY)],
            WarpKind::Separable { components } => components.iter().map(|c| c.interval1()).collect(),
            _ => vec![(f64::NEG_INFINITY, f64::INFINITY); self.d],
        }
    }

    pub fn domain(&self) -> Domain {
        let iv = self.domain_intervals();
        if iv.iter().all(|&(a, b)| a == f64::NEG_INFINITY && b == f64::INFINITY) {
            Domain::Full
        } else if iv.iter().all(|&(a, b)| a == 0.0 && b == f64::INFINITY) {
            Domain::PositiveOrthant
        } else {
            Domain::Product { intervals: iv }
        }
    }

    /// Membership in D with the configured relative interior margin.
    pub fn contains(&self, xi: &[f64]) -> bool {
        if xi.len() != self.d {
            return false;
        }
        self.domain_intervals().iter().zip(xi).all(|(&(a, b), &x)| {
            let lo_ok = a == f64::NEG_INFINITY || x > a + self.margin * a.abs().max(1.0);
            let hi_ok = b == f64::INFINITY || x < b - self.margin * b.abs().max(1.0);
            x.is_finite() && lo_ok && hi_ok
        })
    }

    /// Φ(ξ). Outside D the result is not meaningful; use [`Warp::try_forward`] to check.
    pub fn forward(&self, xi: &[f64]) -> Vec<f64> {
        match &self.kind {
            WarpKind::Identity => xi.to_vec(),
            WarpKind::Log => vec![xi[0].ln()],
            WarpKind::Separable { components } => components.iter().zip(xi).map(|(c, &x)| c.fwd1(x)).collect(),
            WarpKind::Exotic2d => vec![xi[1].exp() * xi[0], xi[1]],
            WarpKind::Radial { component } => {
                if self.d == 1 {
                    return vec![component.rho(xi[0])];
                }
                let r = util::norm(xi);
                util::scale(xi, component.rho_tilde(r))
            }
        }
    }

    pub fn try_forward(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: xi.len() });
        }
        if !self.contains(xi) {
            return Err(Error::OutsideDomain(xi.to_vec()));
        }
        Ok(self.forward(xi))
    }

    /// Φ⁻¹(τ).
    pub fn inverse(&self, tau: &[f64]) -> Vec<f64> {
        match &self.kind {
            WarpKind::Identity => tau.to_vec(),
            WarpKind::Log => vec![tau[0].exp()],
            WarpKind::Separable { components } => components.iter().zip(tau).map(|(c, &t)| c.inv1(t)).collect(),
            WarpKind::Exotic2d => vec![(-tau[1]).exp() * tau[0], tau[1]],
            WarpKind::Radial { component } => {
                if self.d == 1 {
                    return vec![component.inv(tau[0])];
                }
                let s = util::norm(tau);
                util::scale(tau, component.inv_tilde(s))
            }
        }
    }

    /// A(τ) = DΦ⁻¹(τ).
    pub fn inv_jacobian(&self, tau: &[f64]) -> DMatrix<f64> {
        let d = self.d;
        match &self.kind {
            WarpKind::Identity => DMatrix::identity(d, d),
            WarpKind::Log => DMatrix::from_element(1, 1, tau[0].exp()),
            WarpKind::Separable { components } => {
                let mut m = DMatrix::zeros(d, d);
                for (i, c) in components.iter().enumerate() {
                    m[(i, i)] = c.a1(tau[i]);
                }
                m
            }
            WarpKind::Exotic2d => {
                let e = (-tau[1]).exp();
                DMatrix::from_row_slice(2, 2, &[e, -e * tau[0], 0.0, 1.0])
            }
            WarpKind::Radial { component } => {
                if d == 1 {
                    return DMatrix::from_element(1, 1, component.inv_d1(tau[0]));
                }
                let s = util::norm(tau);
                if s < component.slope * component.epsilon {
                    return DMatrix::identity(d, d) / component.slope;
                }
                let tl = component.inv_tilde(s);
                let dv = component.inv_d1(s);
                let mut m = DMatrix::identity(d, d) * tl;
                for i in 0..d {
                    for j in 0..d {
                        m[(i, j)] += (dv - tl) * tau[i] * tau[j] / (s * s);
                    }
                }
                m
            }
        }
    }

    /// w(τ) = det A(τ), from the closed forms.
    pub fn weight(&self, tau: &[f64]) -> f64 {
        match &self.kind {
            WarpKind::Identity => 1.0,
            WarpKind::Log => tau[0].exp(),
            WarpKind::Separable { components } => components.iter().zip(tau).map(|(c, &t)| c.a1(t)).product(),
            WarpKind::Exotic2d => (-tau[1]).exp(),
            WarpKind::Radial { component } => {
                if self.d == 1 {
                    return component.inv_d1(tau[0]);
                }
                let s = util::norm(tau);
                if s < component.slope * component.epsilon {
                    return component.slope.powi(-(self.d as i32));
                }
                component.inv_d1(s) * component.inv_tilde(s).powi(self.d as i32 - 1)
            }
        }
    }
}

/// φ_τ(υ) = (A⁻¹(τ)·A(υ+τ))ᵀ.
pub fn phi_tau(warp: &Warp, tau: &[f64], upsilon: &[f64]) -> DMatrix<f64> {
    phi_tau_checked(warp, tau, upsilon, f64::INFINITY).0
}

/// As [`phi_tau`], also reporting whether cond(A(τ)) exceeds `cond_cap`.
pub fn phi_tau_checked(warp: &Warp, tau: &[f64], upsilon: &[f64], cond_cap: f64) -> (DMatrix<f64>, bool) {
    let a_tau = warp.inv_jacobian(tau);
    let a_shift = warp.inv_jacobian(&util::add(upsilon, tau));
    let (smin, smax) = util::singular_extremes(&a_tau);
    let near_singular = !(smax / smin <= cond_cap);
    let inv = a_tau.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(warp.d, warp.d, f64::NAN));
    ((inv * a_shift).transpose(), near_singular)
}

/// Splits η into its component along ξ and the orthogonal remainder.
pub fn projection_split(xi: &[f64], eta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = util::norm(xi);
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    let unit = util::scale(xi, 1.0 / n);
    let par = util::scale(&unit, util::dot(eta, &unit));
    let perp = util::sub(eta, &par);
    Ok((par, perp))
}

/// Central-difference Jacobian of `map` at `x` with step `h`, improved by one
/// Richardson extrapolation step.
pub fn fd_jacobian(map: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DMatrix<f64> {
    let d = x.len();
    let diff = |step: f64, j: usize| {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += step;
        xm[j] -= step;
        let fp = map(&xp);
        let fm = map(&xm);
        fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * step)).collect::<Vec<f64>>()
    };
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        let c1 = diff(h, j);
        let c2 = diff(0.5 * h, j);
        for i in 0..d {
            m[(i, j)] = (4.0 * c2[i] - c1[i]) / 3.0;
        }
    }
    m
}
