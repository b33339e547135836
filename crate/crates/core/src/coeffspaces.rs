//! Weighted mixed-norm coefficient spaces ℓ^{p,q}_κ and the indicator-sum
//! norms ‖Σ|c_j|1_{V_j}‖ and ‖Σ|c_j|/μ(V_j)·1_{V_j}‖ on L^{p,q}_κ(Λ).

use crate::covering::Covering;
use crate::error::{Error, Result};
use crate::transform::Coefficients;
use crate::util;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Exponents p, q ∈ [1, ∞].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedNormSpec {
    pub p: f64,
    pub q: f64,
}

impl MixedNormSpec {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p >= 1.0) || !(q >= 1.0) {
            return Err(Error::InvalidParameter(format!("exponents must be at least 1, got p={p}, q={q}")));
        }
        Ok(Self { p, q })
    }
}

/// Parses "1", "2.5", "inf".
pub fn parse_exponent(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        t => t.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad exponent {t:?}"))),
    }
}

/// (Σ |x|^p)^{1/p}, or the max for p = ∞; `weights` multiply each term before the power.
fn lp(vals: impl Iterator<Item = (f64, f64)>, p: f64) -> f64 {
    if p.is_infinite() {
        vals.map(|(v, _)| v).fold(0.0, f64::max)
    } else {
        vals.map(|(v, m)| v.powf(p) * m).sum::<f64>().powf(1.0 / p)
    }
}

/// ‖k ↦ ‖κ(·,k)c_{·,k}‖_{ℓ^p}‖_{ℓ^q}: inner norm over the time index of each
/// channel, outer over channels. κ ≡ 1 when absent.
pub fn lpq_norm(c: &[Vec<Complex64>], kappa: Option<&[Vec<f64>]>, spec: MixedNormSpec) -> Result<f64> {
    if let Some(k) = kappa {
        if k.len() != c.len() || k.iter().zip(c).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::IndexMismatch("weights and coefficients have different shapes".into()));
        }
        if k.iter().flatten().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParameter("weights must be strictly positive".into()));
        }
    }
    let inner: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(k, ch)| lp(ch.iter().enumerate().map(|(l, v)| (v.norm() * kappa.map_or(1.0, |w| w[k][l]), 1.0)), spec.p))
        .collect();
    Ok(lp(inner.into_iter().map(|v| (v, 1.0)), spec.q))
}

/// Splits a cell-aligned vector into per-channel groups, in covering order.
pub fn group_by_channel<T: Clone>(cov: &Covering, values: &[T]) -> Result<Vec<Vec<T>>> {
    if values.len() != cov.len() {
        return Err(Error::IndexMismatch(format!("{} values for {} cells", values.len(), cov.len())));
    }
    let mut out: Vec<Vec<T>> = vec![Vec::new(); cov.freq.len()];
    for (cell, v) in cov.cells.iter().zip(values) {
        out[cell.kf].push(v.clone());
    }
    Ok(out.into_iter().filter(|g| !g.is_empty()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterConfig {
    /// Raster points per cell and axis, at least 4.
    pub points_per_cell: usize,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self { points_per_cell: 8 }
    }
}

/// ‖Σ_j |c_j|·1_{V_j}‖_{L^{p,q}_κ} on a raster of the covered region.
pub fn flat_norm(c: &[Complex64], cov: &Covering, kappa: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync), spec: MixedNormSpec, cfg: &RasterConfig) -> Result<f64> {
    let mags: Vec<f64> = c.iter().map(|v| v.norm()).collect();
    raster_norm(&mags, cov, kappa, spec, cfg)
}

/// ‖Σ_j |c_j|/μ(V_j)·1_{V_j}‖_{L^{p,q}_κ} with μ(V_j) = μ₁μ₂.
pub fn sharp_norm(c: &[Complex64], cov: &Covering, kappa: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync), spec: MixedNormSpec, cfg: &RasterConfig) -> Result<f64> {
    let mags: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let (m1, m2) = cov.cell_measures(i);
            v.norm() / (m1 * m2)
        })
        .collect();
    raster_norm(&mags, cov, kappa, spec, cfg)
}

/// Raster: frequency rows uniform in warped coordinates with step 2δ/n; each
/// row gets its own uniform time step, n points across the narrowest time
/// cell that meets the row.
fn raster_norm(mags: &[f64], cov: &Covering, kappa: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync), spec: MixedNormSpec, cfg: &RasterConfig) -> Result<f64> {
    if mags.len() != cov.len() {
        return Err(Error::IndexMismatch(format!("{} coefficients for {} cells", mags.len(), cov.len())));
    }
    let n = cfg.points_per_cell;
    if n < 4 {
        return Err(Error::RasterTooCoarse(format!("{n} points per cell and axis; at least 4 are required")));
    }
    let d = cov.dim();
    let delta = cov.delta;
    let warp = &cov.warp;
    // Cells of each frequency index are contiguous in covering order.
    let mut ranges = vec![(usize::MAX, 0usize); cov.freq.len()];
    for (i, cell) in cov.cells.iter().enumerate() {
        let r = &mut ranges[cell.kf];
        r.0 = r.0.min(i);
        r.1 = r.1.max(i + 1);
    }
    let mut tlo = vec![f64::INFINITY; d];
    let mut thi = vec![f64::NEG_INFINITY; d];
    for f in &cov.freq {
        for i in 0..d {
            tlo[i] = tlo[i].min(f.tau[i] - delta);
            thi[i] = thi[i].max(f.tau[i] + delta);
        }
    }
    let ht = 2.0 * delta / n as f64;
    let counts: Vec<i64> = (0..d).map(|i| ((thi[i] - tlo[i]) / ht).ceil() as i64).collect();
    let rows: Vec<Vec<i64>> = util::multi_range(&vec![0; d], &counts.iter().map(|c| c - 1).collect::<Vec<_>>());
    let inverse: Vec<nalgebra::DMatrix<f64>> = cov.freq.iter().map(|f| f.shape.clone().try_inverse().expect("invertible cell shape")).collect();
    // (row norm, row measure, cells hit)
    let results: Vec<(f64, f64, Vec<usize>)> = rows
        .par_iter()
        .map(|idx| {
            let tau: Vec<f64> = (0..d).map(|i| tlo[i] + (idx[i] as f64 + 0.5) * ht).collect();
            let omega = warp.inverse(&tau);
            let row_measure = warp.weight(&tau) * ht.powi(d as i32);
            let ks: Vec<usize> = (0..cov.freq.len()).filter(|&kf| ranges[kf].0 != usize::MAX && util::dist(&cov.freq[kf].tau, &tau) < delta).collect();
            if ks.is_empty() {
                return (0.0, row_measure, Vec::new());
            }
            // time step and window for this row
            let mut hy = f64::INFINITY;
            let mut ylo = vec![f64::INFINITY; d];
            let mut yhi = vec![f64::NEG_INFINITY; d];
            for &kf in &ks {
                let f = &cov.freq[kf];
                let (smin, _) = util::singular_extremes(&f.shape);
                hy = hy.min(2.0 * smin / n as f64);
                let hw: Vec<f64> = (0..d).map(|i| f.shape.row(i).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
                for ci in ranges[kf].0..ranges[kf].1 {
                    let c = &cov.cells[ci].time_center;
                    for i in 0..d {
                        ylo[i] = ylo[i].min(c[i] - hw[i]);
                        yhi[i] = yhi[i].max(c[i] + hw[i]);
                    }
                }
            }
            let ny: Vec<usize> = (0..d).map(|i| ((yhi[i] - ylo[i]) / hy).ceil() as usize).collect();
            let total: usize = ny.iter().product();
            let mut field = vec![0.0f64; total];
            let mut hit = Vec::new();
            let strides: Vec<usize> = (0..d).map(|i| ny[i + 1..].iter().product()).collect();
            for &kf in &ks {
                let f = &cov.freq[kf];
                let hw: Vec<f64> = (0..d).map(|i| f.shape.row(i).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
                for ci in ranges[kf].0..ranges[kf].1 {
                    let c = &cov.cells[ci].time_center;
                    let lo: Vec<i64> = (0..d).map(|i| (((c[i] - hw[i] - ylo[i]) / hy - 0.5).floor() as i64).max(0)).collect();
                    let hi: Vec<i64> = (0..d).map(|i| (((c[i] + hw[i] - ylo[i]) / hy - 0.5).ceil() as i64).min(ny[i] as i64 - 1)).collect();
                    let mut any = false;
                    for p in util::multi_range(&lo, &hi) {
                        let y: Vec<f64> = (0..d).map(|i| ylo[i] + (p[i] as f64 + 0.5) * hy).collect();
                        if util::norm(&util::mat_vec(&inverse[kf], &util::sub(&y, c))) < 1.0 {
                            let flat: usize = (0..d).map(|i| p[i] as usize * strides[i]).sum();
                            field[flat] += mags[ci];
                            any = true;
                        }
                    }
                    if any {
                        hit.push(ci);
                    }
                }
            }
            let ym = hy.powi(d as i32);
            let vals = field.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(flat, v)| {
                let y: Vec<f64> = (0..d).map(|i| ylo[i] + (((flat / strides[i]) % ny[i]) as f64 + 0.5) * hy).collect();
                (v * kappa(&y, &omega), ym)
            });
            (lp(vals, spec.p), row_measure, hit)
        })
        .collect();
    // Every cell with a nonzero coefficient must carry raster points in some row.
    let mut seen = vec![false; cov.len()];
    for (_, _, hit) in &results {
        for &ci in hit {
            seen[ci] = true;
        }
    }
    if let Some(ci) = (0..cov.len()).find(|&ci| mags[ci] != 0.0 && !seen[ci]) {
        return Err(Error::RasterTooCoarse(format!("cell {ci} contains no raster points")));
    }
    Ok(lp(results.into_iter().map(|(v, m, _)| (v, m)), spec.q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    /// Keep |c| ≥ fraction·max|c|.
    Fraction(f64),
    /// Keep |c| ≥ value.
    Absolute(f64),
}

/// Zeroes coefficients below the threshold; returns the result and the number retained.
pub fn threshold(c: &Coefficients, t: Threshold) -> (Coefficients, usize) {
    let cut = match t {
        Threshold::Absolute(a) => a,
        Threshold::Fraction(f) => f * c.channels.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max),
    };
    let mut kept = 0;
    let channels = c
        .channels
        .iter()
        .map(|ch| {
            ch.iter()
                .map(|v| {
                    if cut.is_finite() && v.norm() >= cut {
                        kept += 1;
                        *v
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    (Coefficients { channels }, kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warpcore::Warp;

    fn cz(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn lpq_examples() {
        let s = MixedNormSpec::new(2.0, 2.0).unwrap();
        let c = vec![vec![cz(3.0), cz(0.0)], vec![cz(4.0)]];
        assert!((lpq_norm(&c, None, s).unwrap() - 5.0).abs() < 1e-14);
        let single = vec![vec![cz(0.0), Complex64::new(0.0, -2.5)], vec![cz(0.0)]];
        for p in [1.0, 2.0, f64::INFINITY] {
            for q in [1.0, 2.0, f64::INFINITY] {
                assert!((lpq_norm(&single, None, MixedNormSpec { p, q }).unwrap() - 2.5).abs() < 1e-14);
            }
        }
        let two = vec![vec![cz(1.0), cz(2.0)], vec![cz(5.0)]];
        assert_eq!(lpq_norm(&two, None, MixedNormSpec { p: 1.0, q: f64::INFINITY }).unwrap(), 5.0);
        assert!(matches!(lpq_norm(&two, Some(&[vec![1.0]]), s), Err(Error::IndexMismatch(_))));
        assert!(MixedNormSpec::new(0.5, 1.0).is_err());
    }

    #[test]
    fn single_cell_flat_norm_is_cell_measure() {
        let warp = Warp::identity(1).unwrap();
        let cov = Covering::build(&warp, 1.0, (vec![-0.2], vec![0.2]), (vec![-0.2], vec![0.2])).unwrap();
        let i = cov.find(&[0], &[0]).unwrap();
        let mut c = vec![cz(0.0); cov.len()];
        c[i] = cz(1.5);
        let one = |_: &[f64], _: &[f64]| 1.0;
        let v = flat_norm(&c, &cov, &one, MixedNormSpec { p: 1.0, q: 1.0 }, &RasterConfig { points_per_cell: 64 }).unwrap();
        assert!((v - 1.5 * 4.0).abs() < 1e-9, "{v}");
        let s = sharp_norm(&c, &cov, &one, MixedNormSpec { p: 1.0, q: 1.0 }, &RasterConfig { points_per_cell: 64 }).unwrap();
        assert!((s - 1.5).abs() < 1e-9, "{s}");
        assert!(matches!(flat_norm(&c, &cov, &one, MixedNormSpec { p: 1.0, q: 1.0 }, &RasterConfig { points_per_cell: 3 }), Err(Error::RasterTooCoarse(_))));
    }

    #[test]
    fn threshold_examples() {
        let c = Coefficients { channels: vec![vec![cz(1.0), cz(-3.0)], vec![cz(0.5)]] };
        assert_eq!(threshold(&c, Threshold::Absolute(0.0)), (c.clone(), 3));
        let (z, n) = threshold(&c, Threshold::Absolute(f64::INFINITY));
        assert_eq!(n, 0);
        assert!(z.channels.iter().flatten().all(|v| v.norm() == 0.0));
        let (h, n) = threshold(&c, Threshold::Fraction(0.5));
        assert_eq!(n, 1);
        assert_eq!(h.channels[0][1], cz(-3.0));
    }
}
