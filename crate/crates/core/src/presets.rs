//! Named warps: the four example families plus the pure logarithm.
//!
//! Radial presets and the exotic warp carry a control weight fitted on the
//! default pair grid at derivative order [`FIT_ORDER`].

use crate::admissibility::{fit_control_weight, PairGrid};
use crate::error::{Error, Result};
use crate::warpcore::{ControlWeight, Mollifier, RadialComponent, SigmaFamily, Warp};

pub const FIT_ORDER: usize = 1;

/// Slow-start transition parameter used by the radial presets.
pub const EPSILON: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    Gabor { d: usize },
    Wavelet1d,
    Alpha { d: usize, p: f64 },
    Exotic2d,
    RadialLog { d: usize },
    Log,
}

pub const NAMES: &[&str] = &["gabor[:d]", "wavelet1d", "alpha[:d[:p]]", "exotic2d", "radial-log[:d]", "log"];

fn parse_dim(s: Option<&str>, default: usize) -> Result<usize> {
    match s {
        None => Ok(default),
        Some(t) => match t.parse::<usize>() {
            Ok(d) if d >= 1 => Ok(d),
            _ => Err(Error::InvalidParameter(format!("bad dimension '{t}'"))),
        },
    }
}

impl Preset {
    pub fn parse(spec: &str) -> Result<Self> {
        let mut parts = spec.trim().split(':');
        let name = parts.next().unwrap_or("");
        let a = parts.next();
        let b = parts.next();
        let extra = parts.next();
        let no_args = |p: Preset| {
            if a.is_some() {
                Err(Error::InvalidParameter(format!("preset '{name}' takes no arguments")))
            } else {
                Ok(p)
            }
        };
        let preset = match name {
            "gabor" => Preset::Gabor { d: parse_dim(a, 1)? },
            "wavelet1d" => no_args(Preset::Wavelet1d)?,
            "alpha" => {
                let p = match b {
                    None => 2.0,
                    Some(t) => t
                        .parse::<f64>()
                        .ok()
                        .filter(|p| *p > 0.0 && p.is_finite())
                        .ok_or_else(|| Error::InvalidParameter(format!("bad exponent '{t}'")))?,
                };
                Preset::Alpha { d: parse_dim(a, 1)?, p }
            }
            "exotic2d" => no_args(Preset::Exotic2d)?,
            "radial-log" => Preset::RadialLog { d: parse_dim(a, 2)? },
            "log" => no_args(Preset::Log)?,
            _ => {
                return Err(Error::InvalidParameter(format!("unknown preset '{name}' (known: {})", NAMES.join(", "))));
            }
        };
        let arity = match preset {
            Preset::Alpha { .. } => 2,
            Preset::Gabor { .. } | Preset::RadialLog { .. } => 1,
            _ => 0,
        };
        let given = a.is_some() as usize + b.is_some() as usize + extra.is_some() as usize;
        if given > arity {
            return Err(Error::InvalidParameter(format!("too many arguments in preset '{spec}'")));
        }
        Ok(preset)
    }

    pub fn dim(&self) -> usize {
        match *self {
            Preset::Gabor { d } | Preset::Alpha { d, .. } | Preset::RadialLog { d } => d,
            Preset::Wavelet1d | Preset::Log => 1,
            Preset::Exotic2d => 2,
        }
    }

    /// Builds the warp, fitting a control weight where none is known in
    /// closed form.
    pub fn build(&self) -> Result<Warp> {
        self.build_with(&PairGrid::default())
    }

    pub fn build_with(&self, grid: &PairGrid) -> Result<Warp> {
        let radial = |sigma: SigmaFamily, d: usize| -> Result<Warp> {
            let rho = RadialComponent::slow_start(sigma, EPSILON, None, Mollifier::Bump)?;
            Warp::radial(rho, d)
        };
        let fitted = |w: Warp, family: ControlWeight| {
            let v0 = fit_control_weight(&w, &family, FIT_ORDER, grid);
            w.with_control(Some(v0))
        };
        let exp = ControlWeight::Exponential { c: 1.0 };
        Ok(match *self {
            Preset::Gabor { d } => Warp::identity(d)?,
            Preset::Wavelet1d => fitted(radial(SigmaFamily::Log, 1)?, exp),
            Preset::RadialLog { d } => fitted(radial(SigmaFamily::Log, d)?, exp),
            Preset::Alpha { d, p } => {
                let family = ControlWeight::Polynomial { c: 1.0, a: 1.0 + (p - 1.0).abs() };
                fitted(radial(SigmaFamily::Power { p }, d)?, family)
            }
            Preset::Exotic2d => fitted(Warp::exotic2d(), exp),
            Preset::Log => Warp::log(),
        })
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Preset::Gabor { d } => write!(f, "gabor:{d}"),
            Preset::Wavelet1d => write!(f, "wavelet1d"),
            Preset::Alpha { d, p } => write!(f, "alpha:{d}:{p}"),
            Preset::Exotic2d => write!(f, "exotic2d"),
            Preset::RadialLog { d } => write!(f, "radial-log:{d}"),
            Preset::Log => write!(f, "log"),
        }
    }
}

/// Resolves a preset name or a path to a JSON warp descriptor.
pub fn resolve_warp(spec: &str) -> Result<Warp> {
    let path = std::path::Path::new(spec);
    if spec.ends_with(".json") || path.is_file() {
        let text = std::fs::read_to_string(path)?;
        let warp: Warp = serde_json::from_str(&text)?;
        warp.validate()?;
        return Ok(warp);
    }
    Preset::parse(spec)?.build()
}
