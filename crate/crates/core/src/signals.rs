//! Deterministic test signals on a frequency grid.
//!
//! Non-trivial signals are tapered to the band interior: the grid points
//! not covered by any edge channel.

use crate::error::{Error, Result};
use crate::transform::{FreqGrid, PhaseGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalKind {
    Zero,
    /// Unit spike at the grid point nearest the interior center.
    Impulse,
    /// Tapered quadratic-phase sweep e^{iπ·rate·|ξ|²}.
    Chirp { rate: f64 },
    /// Tapered sum of random complex Gaussian bumps.
    Random,
}

impl SignalKind {
    pub fn parse(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let kind = match name {
            "zero" => SignalKind::Zero,
            "impulse" => SignalKind::Impulse,
            "random" => SignalKind::Random,
            "chirp" => {
                let rate = match arg {
                    None => 0.25,
                    Some(a) => a.parse::<f64>().ok().filter(|r| r.is_finite()).ok_or_else(|| Error::InvalidParameter(format!("bad chirp rate '{a}'")))?,
                };
                return Ok(SignalKind::Chirp { rate });
            }
            _ => return Err(Error::InvalidParameter(format!("unknown signal '{s}' (zero|impulse|chirp[:rate]|random)"))),
        };
        if arg.is_some() {
            return Err(Error::InvalidParameter(format!("signal '{name}' takes no argument")));
        }
        Ok(kind)
    }
}

/// Smooth taper equal to 1 on the middle of [lo, hi] and vanishing with all
/// derivatives at the ends.
fn taper1(x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if w <= 0.0 || x <= lo || x >= hi {
        return 0.0;
    }
    let ramp = 0.25 * w;
    let s = ((x - lo).min(hi - x) / ramp).min(1.0);
    if s >= 1.0 {
        return 1.0;
    }
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    f(s) / (f(s) + f(1.0 - s))
}

/// Bounding box of the interior points, shrunk by one grid step.
fn interior_box(grid: &FreqGrid, mask: &[bool]) -> Option<(Vec<f64>, Vec<f64>)> {
    let d = grid.dim();
    let h = grid.spacing();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut any = false;
    for (j, &m) in mask.iter().enumerate() {
        if m {
            any = true;
            let p = grid.point(j);
            for i in 0..d {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
    }
    if !any {
        return None;
    }
    for i in 0..d {
        lo[i] += h[i];
        hi[i] -= h[i];
    }
    Some((lo, hi))
}

/// Interior taper at every grid point; zero off the mask.
pub fn interior_taper(grid: &FreqGrid, mask: &[bool]) -> Vec<f64> {
    let Some((lo, hi)) = interior_box(grid, mask) else {
        return vec![0.0; grid.len()];
    };
    (0..grid.len())
        .map(|j| {
            if !mask[j] {
                return 0.0;
            }
            let p = grid.point(j);
            (0..p.len()).map(|i| taper1(p[i], lo[i], hi[i])).product()
        })
        .collect()
}

pub fn generate(kind: SignalKind, phase: &PhaseGrid, seed: u64) -> Result<Vec<Complex64>> {
    let grid = &phase.grid;
    let mask = phase.interior_mask();
    let n = grid.len();
    let zero = Complex64::new(0.0, 0.0);
    if kind == SignalKind::Zero {
        return Ok(vec![zero; n]);
    }
    let (lo, hi) = interior_box(grid, &mask).ok_or(Error::EmptySampling)?;
    if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
        return Err(Error::EmptySampling);
    }
    let taper = interior_taper(grid, &mask);
    let d = grid.dim();
    Ok(match kind {
        SignalKind::Zero => unreachable!(),
        SignalKind::Impulse => {
            let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            let j = (0..n)
                .filter(|&j| mask[j])
                .min_by(|&a, &b| {
                    let da = crate::util::norm(&crate::util::sub(&grid.point(a), &mid));
                    let db = crate::util::norm(&crate::util::sub(&grid.point(b), &mid));
                    da.total_cmp(&db)
                })
                .ok_or(Error::EmptySampling)?;
            let mut f = vec![zero; n];
            f[j] = Complex64::new(1.0, 0.0);
            f
        }
        SignalKind::Chirp { rate } => (0..n)
            .map(|j| {
                let p = grid.point(j);
                let r2: f64 = p.iter().map(|x| x * x).sum();
                Complex64::from_polar(taper[j], PI * rate * r2)
            })
            .collect(),
        SignalKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let width: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
            let bumps: Vec<(Vec<f64>, f64, Complex64)> = (0..12)
                .map(|_| {
                    let c: Vec<f64> = (0..d).map(|i| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>()).collect();
                    let s = width * (0.05 + 0.15 * rng.random::<f64>());
                    let a = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                    (c, s, a)
                })
                .collect();
            (0..n)
                .map(|j| {
                    if taper[j] == 0.0 {
                        return zero;
                    }
                    let p = grid.point(j);
                    let v: Complex64 = bumps
                        .iter()
                        .map(|(c, s, a)| {
                            let r2: f64 = p.iter().zip(c).map(|(x, y)| (x - y) * (x - y)).sum();
                            a * (-r2 / (2.0 * s * s)).exp()
                        })
                        .sum();
                    v * taper[j]
                })
                .collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warpcore::Warp;

    fn phase() -> PhaseGrid {
        let warp = Warp::identity(1).unwrap();
        let grid = FreqGrid::new(vec![-4.0], vec![4.0], vec![161]).unwrap();
        PhaseGrid::new(&warp, grid, 0.5, 1.0, &Default::default()).unwrap()
    }

    #[test]
    fn parse_kinds() {
        assert_eq!(SignalKind::parse("chirp:0.5").unwrap(), SignalKind::Chirp { rate: 0.5 });
        assert_eq!(SignalKind::parse("chirp").unwrap(), SignalKind::Chirp { rate: 0.25 });
        assert!(SignalKind::parse("zero:1").is_err());
        assert!(SignalKind::parse("noise").is_err());
    }

    #[test]
    fn signals_vanish_off_the_interior() {
        let pg = phase();
        let mask = pg.interior_mask();
        assert!(mask.iter().any(|m| !m));
        for kind in [SignalKind::Impulse, SignalKind::Chirp { rate: 0.3 }, SignalKind::Random] {
            let f = generate(kind, &pg, 3).unwrap();
            assert!(f.iter().zip(&mask).all(|(v, m)| *m || v.norm() == 0.0));
            assert!(f.iter().any(|v| v.norm() > 0.0));
        }
        assert!(generate(SignalKind::Zero, &pg, 0).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let pg = phase();
        let a = generate(SignalKind::Random, &pg, 11).unwrap();
        assert_eq!(a, generate(SignalKind::Random, &pg, 11).unwrap());
        assert_ne!(a, generate(SignalKind::Random, &pg, 12).unwrap());
    }
}
