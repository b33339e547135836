//! Φ-induced δ-fine phase-space coverings.
//!
//! Cell (ℓ,k) is A^{−T}(τ_k)⟨δ·B₁(ℓ/√d)⟩ × Φ⁻¹(δ·B₁(k/√d)) with τ_k = δk/√d.
//! Frequency cells are stored as warped-coordinate balls; time cells are
//! ellipsoids with center L_k ℓ, L_k = A^{−T}(τ_k)·δ/√d, and shape A^{−T}(τ_k)·δ.

use crate::error::{Error, Result};
use crate::quad::{gl_rule, unit_ball_volume};
use crate::util;
use crate::warpcore::{ControlWeight, Warp};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Per-k data shared by all time cells of a frequency channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqCell {
    pub k: Vec<i64>,
    pub tau: Vec<f64>,
    /// Φ⁻¹(τ_k).
    pub center: Vec<f64>,
    pub bbox_min: Vec<f64>,
    pub bbox_max: Vec<f64>,
    /// Lattice matrix L_k; time-cell centers are L_k ℓ.
    pub lattice: DMatrix<f64>,
    /// Ellipsoid shape A^{−T}(τ_k)·δ.
    pub shape: DMatrix<f64>,
    pub mu1: f64,
    pub mu2: f64,
    pub mu2_converged: bool,
}

impl FreqCell {
    pub fn time_center(&self, l: &[i64]) -> Vec<f64> {
        let lf: Vec<f64> = l.iter().map(|&x| x as f64).collect();
        util::mat_vec(&self.lattice, &lf)
    }

    /// min{1, μ₁, μ₂, μ₁μ₂}.
    pub fn weight(&self) -> f64 {
        covering_weight_of(self.mu1, self.mu2)
    }
}

pub fn covering_weight_of(mu1: f64, mu2: f64) -> f64 {
    1f64.min(mu1).min(mu2).min(mu1 * mu2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub l: Vec<i64>,
    /// Index into [`Covering::freq`].
    pub kf: usize,
    pub time_center: Vec<f64>,
}

/// Exported description of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub l: Vec<i64>,
    pub k: Vec<i64>,
    pub freq_center: Vec<f64>,
    pub freq_bbox: [Vec<f64>; 2],
    pub time_lattice_matrix: Vec<Vec<f64>>,
    pub time_center: Vec<f64>,
    pub mu1: f64,
    pub mu2: f64,
    pub w_u: f64,
    pub sample_point: [Vec<f64>; 2],
}

#[derive(Debug, Clone)]
pub struct Covering {
    pub warp: Warp,
    pub delta: f64,
    pub freq_box: (Vec<f64>, Vec<f64>),
    pub time_extent: (Vec<f64>, Vec<f64>),
    pub freq: Vec<FreqCell>,
    pub cells: Vec<Cell>,
    kindex: HashMap<Vec<i64>, usize>,
    index: HashMap<(Vec<i64>, Vec<i64>), usize>,
}

/// Do the open ellipsoids c₁ + M₁B and c₂ + M₂B intersect?
/// Uses max over s ∈ (0,1) of cᵀ(Σ₁/(1−s) + Σ₂/s)⁻¹c < 1 with c = c₂ − c₁.
pub fn ellipsoids_intersect(c1: &[f64], m1: &DMatrix<f64>, c2: &[f64], m2: &DMatrix<f64>) -> bool {
    let d = c1.len();
    let c = nalgebra::DVector::from_vec(util::sub(c2, c1));
    if c.norm() == 0.0 {
        return true;
    }
    let s1 = m1 * m1.transpose();
    let s2 = m2 * m2.transpose();
    let f = |s: f64| -> f64 {
        let m = &s1 / (1.0 - s) + &s2 / s;
        match m.cholesky() {
            Some(ch) => c.dot(&ch.solve(&c)),
            None => f64::INFINITY,
        }
    };
    // The function is concave on (0,1); golden-section search for its maximum.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (1e-12, 1.0 - 1e-12);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if f1 >= 1.0 || f2 >= 1.0 {
            return false;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
        if b - a < 1e-12 {
            break;
        }
    }
    let _ = d;
    f1.max(f2) < 1.0
}

/// Squared ellipsoid distance min over x in the box of |M⁻¹(x − c)|², by
/// coordinate descent on the convex quadratic.
fn box_ellipsoid_gap(c: &[f64], m: &DMatrix<f64>, lo: &[f64], hi: &[f64]) -> f64 {
    let d = c.len();
    let minv = match m.clone().try_inverse() {
        Some(v) => v,
        None => return f64::INFINITY,
    };
    let q = minv.transpose() * &minv;
    let mut x: Vec<f64> = (0..d).map(|i| c[i].clamp(lo[i], hi[i])).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..d {
            // minimize over x_i with others fixed
            let mut lin = 0.0;
            for j in 0..d {
                if j != i {
                    lin += q[(i, j)] * (x[j] - c[j]);
                }
            }
            let xi = (c[i] - lin / q[(i, i)]).clamp(lo[i], hi[i]);
            moved = moved.max((xi - x[i]).abs());
            x[i] = xi;
        }
        if moved < 1e-14 {
            break;
        }
    }
    let v = nalgebra::DVector::from_vec(util::sub(&x, c));
    (&v.transpose() * &q * &v)[(0, 0)]
}

/// Lebesgue measure of Φ⁻¹(c + r·B₁) as the boundary integral
/// (1/d)∮ ⟨Φ⁻¹(τ) − Φ⁻¹(c), det A · A⁻ᵀ n⟩ dS, where A = DΦ⁻¹. Subtracting
/// Φ⁻¹(c) leaves the value unchanged (cofactor fields are divergence-free)
/// and avoids cancellation far from the origin. The integrand is smooth and
/// periodic in the azimuth, so trapezoid sums converge fast there.
fn preimage_volume(warp: &Warp, c: &[f64], r: f64, rel_tol: f64) -> (f64, bool) {
    let d = c.len();
    let base = warp.inverse(c);
    if d == 1 {
        return (warp.inverse(&[c[0] + r])[0] - warp.inverse(&[c[0] - r])[0], true);
    }
    let integrand = |u: &[f64]| -> f64 {
        let tau: Vec<f64> = c.iter().zip(u).map(|(a, b)| a + r * b).collect();
        let a = warp.inv_jacobian(&tau);
        let det = a.determinant();
        let Some(y) = a.transpose().lu().solve(&nalgebra::DVector::from_column_slice(u)) else {
            return f64::NAN;
        };
        let x = warp.inverse(&tau);
        det * x.iter().zip(&base).zip(y.iter()).map(|((p, q), yi)| (p - q) * yi).sum::<f64>()
    };
    let max_level = match d {
        2 => 8,
        3 => 4,
        _ => 2,
    };
    let mut prev = f64::NAN;
    let mut cur = f64::NAN;
    for level in 0..=max_level {
        cur = sphere_integral(d, level, &integrand) * r.powi(d as i32 - 1) / d as f64;
        if (cur - prev).abs() <= rel_tol * cur.abs() {
            return (cur, true);
        }
        prev = cur;
    }
    (cur, false)
}

/// ∫ over S^{d−1} in hyperspherical angles: composite 16-point Gauss–Legendre
/// with 2^level panels per polar angle, 16·2^(level+1) trapezoid nodes in the
/// azimuth.
fn sphere_integral(d: usize, level: usize, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> f64 {
    use std::f64::consts::{PI, TAU};
    let n_az = 32usize << level;
    let panels = 1usize << level;
    let h = PI / panels as f64;
    let polar: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| gl_rule(16).iter().map(move |&(x, w)| (h * (p as f64 + 0.5 * (x + 1.0)), 0.5 * h * w)))
        .collect();
    let polar_idx: Vec<Vec<usize>> = util::multi_range(&vec![0; d - 2], &vec![polar.len() as i64 - 1; d - 2])
        .into_iter()
        .map(|v| v.into_iter().map(|i| i as usize).collect())
        .collect();
    polar_idx
        .par_iter()
        .map(|idx| {
            let mut u = vec![0.0; d];
            let mut sprod = 1.0;
            let mut weight = TAU / n_az as f64;
            for (i, &j) in idx.iter().enumerate() {
                let (t, w) = polar[j];
                u[i] = sprod * t.cos();
                weight *= w * t.sin().powi((d - 2 - i) as i32);
                sprod *= t.sin();
            }
            (0..n_az)
                .map(|m| {
                    let phi = TAU * m as f64 / n_az as f64;
                    u[d - 2] = sprod * phi.cos();
                    u[d - 1] = sprod * phi.sin();
                    f(&u)
                })
                .sum::<f64>()
                * weight
        })
        .sum()
}

/// Do the warped balls of channels `a` and `b` overlap, i.e. |a − b|² < 4d?
pub fn within_shell(a: &[i64], b: &[i64]) -> bool {
    let sq: i64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    sq < 4 * a.len() as i64
}

fn k_tau(k: &[i64], delta: f64) -> Vec<f64> {
    let sd = (k.len() as f64).sqrt();
    k.iter().map(|&x| delta * x as f64 / sd).collect()
}

/// Dense sample of a box including its faces.
fn box_samples(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let n = per_axis as i64 - 1;
    util::multi_range(&vec![0; d], &vec![n; d])
        .into_iter()
        .map(|idx| idx.iter().enumerate().map(|(i, &m)| lo[i] + (hi[i] - lo[i]) * m as f64 / n as f64).collect())
        .collect()
}

impl Covering {
    /// Retains k whose warped ball meets Φ(freq_box) and ℓ whose time cell
    /// meets the time extent.
    pub fn build(warp: &Warp, delta: f64, freq_box: (Vec<f64>, Vec<f64>), time_extent: (Vec<f64>, Vec<f64>)) -> Result<Self> {
        let d = warp.dim();
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        for (name, b) in [("frequency box", &freq_box), ("time extent", &time_extent)] {
            if b.0.len() != d || b.1.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: b.0.len() });
            }
            if b.0.iter().zip(&b.1).any(|(a, c)| !(c > a)) {
                return Err(Error::InvalidParameter(format!("{name} must have max > min")));
            }
        }
        for corner in util::multi_range(&vec![0; d], &vec![1; d]) {
            let p: Vec<f64> = corner.iter().enumerate().map(|(i, &c)| if c == 0 { freq_box.0[i] } else { freq_box.1[i] }).collect();
            if !warp.contains(&p) {
                return Err(Error::OutsideDomain(p));
            }
        }
        let per_axis = match d {
            1 => 4097,
            2 => 129,
            3 => 33,
            _ => 9,
        };
        let samples: Vec<Vec<f64>> = box_samples(&freq_box.0, &freq_box.1, per_axis).par_iter().map(|p| warp.forward(p)).collect();
        let sd = (d as f64).sqrt();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for t in &samples {
            for i in 0..d {
                lo[i] = lo[i].min(t[i]);
                hi[i] = hi[i].max(t[i]);
            }
        }
        let klo: Vec<i64> = lo.iter().map(|&v| ((v - delta) * sd / delta).floor() as i64).collect();
        let khi: Vec<i64> = hi.iter().map(|&v| ((v + delta) * sd / delta).ceil() as i64).collect();
        let monotone_1d = d == 1;
        let mut freq: Vec<FreqCell> = util::multi_range(&klo, &khi)
            .par_iter()
            .filter_map(|k| {
                let tau = k_tau(k, delta);
                let hit = if monotone_1d {
                    // Φ is increasing, so Φ(box) is an interval.
                    let a = warp.forward(&freq_box.0)[0];
                    let b = warp.forward(&freq_box.1)[0];
                    tau[0] > a - delta && tau[0] < b + delta
                } else {
                    let om = warp.inverse(&tau);
                    let inside = om.iter().enumerate().all(|(i, &x)| x >= freq_box.0[i] && x <= freq_box.1[i]);
                    inside || samples.iter().any(|t| util::dist(t, &tau) < delta)
                };
                if !hit {
                    return None;
                }
                Some(Self::freq_cell(warp, delta, k))
            })
            .collect();
        freq.sort_by(|a, b| a.k.cmp(&b.k));
        if freq.is_empty() {
            return Err(Error::EmptySampling);
        }
        let kindex: HashMap<Vec<i64>, usize> = freq.iter().enumerate().map(|(i, f)| (f.k.clone(), i)).collect();
        let per_k: Vec<Vec<Cell>> = freq
            .par_iter()
            .enumerate()
            .map(|(kf, fc)| {
                let (llo, lhi) = lattice_range(&fc.lattice, &fc.shape, &time_extent.0, &time_extent.1);
                util::multi_range(&llo, &lhi)
                    .into_iter()
                    .filter_map(|l| {
                        let c = fc.time_center(&l);
                        if box_ellipsoid_gap(&c, &fc.shape, &time_extent.0, &time_extent.1) < 1.0 {
                            Some(Cell { l, kf, time_center: c })
                        } else {
                            None
                        }
                    })
                    .collect()
            })
            .collect();
        let cells: Vec<Cell> = per_k.into_iter().flatten().collect();
        let index = cells.iter().enumerate().map(|(i, c)| ((c.l.clone(), freq[c.kf].k.clone()), i)).collect();
        Ok(Self { warp: warp.clone(), delta, freq_box, time_extent, freq, cells, kindex, index })
    }

    fn freq_cell(warp: &Warp, delta: f64, k: &[i64]) -> FreqCell {
        let d = warp.dim();
        let sd = (d as f64).sqrt();
        let tau = k_tau(k, delta);
        let center = warp.inverse(&tau);
        let a = warp.inv_jacobian(&tau);
        let ainvt = a.clone().try_inverse().expect("A(τ) is invertible").transpose();
        let lattice = &ainvt * (delta / sd);
        let shape = &ainvt * delta;
        let mu1 = unit_ball_volume(d) * delta.powi(d as i32) / warp.weight(&tau);
        let (mu2, mu2_converged) = preimage_volume(warp, &tau, delta, 1e-10);
        // Bounding box of the preimage from 2d + 2^d boundary probes, padded 5%.
        let mut probes = Vec::new();
        for i in 0..d {
            for s in [-1.0, 1.0] {
                let mut p = tau.clone();
                p[i] += s * delta;
                probes.push(p);
            }
        }
        for corner in util::multi_range(&vec![0; d], &vec![1; d]) {
            probes.push(tau.iter().zip(&corner).map(|(t, &c)| t + delta / sd * if c == 0 { -1.0 } else { 1.0 }).collect());
        }
        let mut bmin = vec![f64::INFINITY; d];
        let mut bmax = vec![f64::NEG_INFINITY; d];
        for p in probes {
            let x = warp.inverse(&p);
            for i in 0..d {
                bmin[i] = bmin[i].min(x[i]);
                bmax[i] = bmax[i].max(x[i]);
            }
        }
        for i in 0..d {
            let pad = 0.05 * (bmax[i] - bmin[i]);
            bmin[i] -= pad;
            bmax[i] += pad;
        }
        FreqCell { k: k.to_vec(), tau, center, bbox_min: bmin, bbox_max: bmax, lattice, shape, mu1, mu2, mu2_converged }
    }

    pub fn dim(&self) -> usize {
        self.warp.dim()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn find(&self, l: &[i64], k: &[i64]) -> Option<usize> {
        self.index.get(&(l.to_vec(), k.to_vec())).copied()
    }

    pub fn freq_cell_of(&self, k: &[i64]) -> Option<&FreqCell> {
        self.kindex.get(k).map(|&i| &self.freq[i])
    }

    pub fn cell_k(&self, i: usize) -> &[i64] {
        &self.freq[self.cells[i].kf].k
    }

    /// Data of frequency index k, computed on the fly if k was not retained.
    pub fn freq_cell_any(&self, k: &[i64]) -> FreqCell {
        match self.freq_cell_of(k) {
            Some(f) => f.clone(),
            None => Self::freq_cell(&self.warp, self.delta, k),
        }
    }

    /// (μ₁, μ₂) of cell `i`.
    pub fn cell_measures(&self, i: usize) -> (f64, f64) {
        let f = &self.freq[self.cells[i].kf];
        (f.mu1, f.mu2)
    }

    pub fn covering_weight(&self, i: usize) -> f64 {
        self.freq[self.cells[i].kf].weight()
    }

    /// Sample point λ = (time-cell center, Φ⁻¹(τ_k)).
    pub fn sample_point(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let c = &self.cells[i];
        (c.time_center.clone(), self.freq[c.kf].center.clone())
    }

    /// Does cell (ℓ,k) contain (y, ω)?
    pub fn cell_contains(&self, fc: &FreqCell, l: &[i64], y: &[f64], omega: &[f64]) -> bool {
        if !self.warp.contains(omega) || util::dist(&self.warp.forward(omega), &fc.tau) >= self.delta {
            return false;
        }
        let c = fc.time_center(l);
        let minv = match fc.shape.clone().try_inverse() {
            Some(m) => m,
            None => return false,
        };
        util::norm(&util::mat_vec(&minv, &util::sub(y, &c))) < 1.0
    }

    /// All (ℓ,k) of the full covering of Λ whose cell contains (y, ω).
    pub fn cells_containing(&self, y: &[f64], omega: &[f64]) -> Vec<(Vec<i64>, Vec<i64>)> {
        let d = self.dim();
        let sd = (d as f64).sqrt();
        let tau = self.warp.forward(omega);
        let klo: Vec<i64> = tau.iter().map(|&t| ((t - self.delta) * sd / self.delta).floor() as i64).collect();
        let khi: Vec<i64> = tau.iter().map(|&t| ((t + self.delta) * sd / self.delta).ceil() as i64).collect();
        let mut out = Vec::new();
        for k in util::multi_range(&klo, &khi) {
            if util::dist(&k_tau(&k, self.delta), &tau) >= self.delta {
                continue;
            }
            let fc = self.freq_cell_any(&k);
            let (llo, lhi) = lattice_range(&fc.lattice, &fc.shape, y, y);
            for l in util::multi_range(&llo, &lhi) {
                if self.cell_contains(&fc, &l, y, omega) {
                    out.push((l, k.clone()));
                }
            }
        }
        out
    }

    /// All (ℓ₀,k₀) in the full covering whose cell meets cell `i`: frequency
    /// indices are pruned to |k − k₀| < 2√d, time cells tested exactly.
    pub fn neighbors(&self, i: usize) -> Vec<(Vec<i64>, Vec<i64>)> {
        let cell = &self.cells[i];
        let fc = &self.freq[cell.kf];
        let d = self.dim();
        // Warped balls meet iff |k − k₀| < 2√d; decided in integers so tangent
        // pairs are excluded exactly.
        let r = (2.0 * (d as f64).sqrt()).floor() as i64;
        let lo: Vec<i64> = fc.k.iter().map(|k| k - r).collect();
        let hi: Vec<i64> = fc.k.iter().map(|k| k + r).collect();
        let mut out = Vec::new();
        for k0 in util::multi_range(&lo, &hi) {
            if !within_shell(&k0, &fc.k) {
                continue;
            }
            let f0 = self.freq_cell_any(&k0);
            // Candidate ℓ₀: centers within the bounding box of cell i grown by f0's half-widths.
            let half1 = half_widths(&fc.shape);
            let half0 = half_widths(&f0.shape);
            let blo: Vec<f64> = (0..d).map(|j| cell.time_center[j] - half1[j] - half0[j]).collect();
            let bhi: Vec<f64> = (0..d).map(|j| cell.time_center[j] + half1[j] + half0[j]).collect();
            let (llo, lhi) = lattice_range(&f0.lattice, &DMatrix::zeros(d, d), &blo, &bhi);
            for l0 in util::multi_range(&llo, &lhi) {
                let c0 = f0.time_center(&l0);
                if ellipsoids_intersect(&cell.time_center, &fc.shape, &c0, &f0.shape) {
                    out.push((l0, k0.clone()));
                }
            }
        }
        out
    }

    /// (1+4d)^d·(1+2√d(1+v₀(2δ)))^d.
    pub fn neighbor_bound(&self, v0: &ControlWeight) -> f64 {
        let d = self.dim();
        let df = d as f64;
        let mut two_delta = vec![0.0; d];
        two_delta[0] = 2.0 * self.delta;
        (1.0 + 4.0 * df).powi(d as i32) * (1.0 + 2.0 * df.sqrt() * (1.0 + v0.eval(&two_delta))).powi(d as i32)
    }

    /// μ₂ / (μ(B₁)δ^d·w(τ_k)) for frequency cell `kf`; the sandwich asks for
    /// this to lie in [v₀(δ)^{−d}, v₀(δ)^d].
    pub fn measure_ratio(&self, kf: usize) -> f64 {
        let f = &self.freq[kf];
        let d = self.dim();
        f.mu2 / (unit_ball_volume(d) * self.delta.powi(d as i32) * self.warp.weight(&f.tau))
    }

    /// Probe points of cell `i`: offsets {−1,0,1}^d/√d·0.99 in both time and
    /// warped frequency coordinates (3^{2d} points).
    pub fn probes(&self, i: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        let c = &self.cells[i];
        let fc = &self.freq[c.kf];
        let d = self.dim();
        let s = 0.99 / (d as f64).sqrt();
        let offs: Vec<Vec<f64>> = util::multi_range(&vec![-1; d], &vec![1; d]).into_iter().map(|o| o.iter().map(|&x| x as f64 * s).collect()).collect();
        let mut out = Vec::with_capacity(offs.len() * offs.len());
        for ot in &offs {
            let y = util::add(&c.time_center, &util::mat_vec(&fc.shape, ot));
            for of in &offs {
                let om = self.warp.inverse(&util::add(&fc.tau, &util::scale(of, self.delta)));
                out.push((y.clone(), om));
            }
        }
        out
    }

    /// (κ♭, κ♯) with κ♭ = μ₁^{1/p}μ₂^{1/q}κ_{ℓ,k} and κ♯ = μ₁^{1/p−1}μ₂^{1/q−1}κ_{ℓ,k},
    /// κ_{ℓ,k} the max of κ over the cell probes. Infinite exponents give 1/p = 0.
    pub fn discrete_weights(&self, kappa: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync), p: f64, q: f64) -> (Vec<f64>, Vec<f64>) {
        let ip = if p.is_infinite() { 0.0 } else { 1.0 / p };
        let iq = if q.is_infinite() { 0.0 } else { 1.0 / q };
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let kap = self.probes(i).iter().map(|(y, om)| kappa(y, om)).fold(0.0f64, f64::max);
                let (m1, m2) = self.cell_measures(i);
                (m1.powf(ip) * m2.powf(iq) * kap, m1.powf(ip - 1.0) * m2.powf(iq - 1.0) * kap)
            })
            .unzip()
    }

    /// Supersets y + P and Q of every cell containing λ = (y, ω):
    /// P = v₀(δ)·A^{−T}(Φ(ω))⟨B_{2δ}(0)⟩, Q = Φ⁻¹(Φ(ω) + B_{2δ}(0)).
    pub fn oscillation_superset(&self, y: &[f64], omega: &[f64]) -> Result<OscSuperset> {
        let v0 = self.warp.control().ok_or(Error::MissingControlWeight)?;
        let d = self.dim();
        let tau = self.warp.try_forward(omega)?;
        let mut dv = vec![0.0; d];
        dv[0] = self.delta;
        let a = self.warp.inv_jacobian(&tau);
        let ainvt = a.try_inverse().expect("A(τ) is invertible").transpose();
        Ok(OscSuperset { time_center: y.to_vec(), time_shape: ainvt * (2.0 * self.delta * v0.eval(&dv)), freq_center: tau, freq_radius: 2.0 * self.delta })
    }

    pub fn records(&self) -> Vec<CellRecord> {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let f = &self.freq[c.kf];
                let (y, om) = self.sample_point(i);
                CellRecord {
                    l: c.l.clone(),
                    k: f.k.clone(),
                    freq_center: f.center.clone(),
                    freq_bbox: [f.bbox_min.clone(), f.bbox_max.clone()],
                    time_lattice_matrix: (0..f.lattice.nrows()).map(|r| f.lattice.row(r).iter().cloned().collect()).collect(),
                    time_center: c.time_center.clone(),
                    mu1: f.mu1,
                    mu2: f.mu2,
                    w_u: f.weight(),
                    sample_point: [y, om],
                }
            })
            .collect()
    }
}

/// Superset of all cells containing a phase-space point.
#[derive(Debug, Clone, PartialEq)]
pub struct OscSuperset {
    pub time_center: Vec<f64>,
    pub time_shape: DMatrix<f64>,
    pub freq_center: Vec<f64>,
    pub freq_radius: f64,
}

impl OscSuperset {
    pub fn contains(&self, warp: &Warp, y: &[f64], omega: &[f64]) -> bool {
        let inv = match self.time_shape.clone().try_inverse() {
            Some(m) => m,
            None => return false,
        };
        warp.contains(omega)
            && util::dist(&warp.forward(omega), &self.freq_center) < self.freq_radius
            && util::norm(&util::mat_vec(&inv, &util::sub(y, &self.time_center))) < 1.0
    }

    /// Euclidean diameters of the time and frequency parts (the latter in ω coordinates, sampled).
    pub fn diameters(&self, warp: &Warp) -> (f64, f64) {
        let d = self.time_center.len();
        let (_, smax) = util::singular_extremes(&self.time_shape);
        let dirs = util::sphere_directions(d, 64);
        let pts: Vec<Vec<f64>> = dirs.iter().map(|u| warp.inverse(&util::add(&self.freq_center, &util::scale(u, self.freq_radius)))).collect();
        let mut fd = 0.0f64;
        for a in &pts {
            for b in &pts {
                fd = fd.max(util::dist(a, b));
            }
        }
        (2.0 * smax, fd)
    }
}

fn half_widths(shape: &DMatrix<f64>) -> Vec<f64> {
    (0..shape.nrows()).map(|i| shape.row(i).iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
}

/// Range of ℓ whose centers L ℓ can come within the ellipsoid half-widths of the box.
fn lattice_range(lattice: &DMatrix<f64>, shape: &DMatrix<f64>, lo: &[f64], hi: &[f64]) -> (Vec<i64>, Vec<i64>) {
    let d = lo.len();
    let hw = half_widths(shape);
    let linv = lattice.clone().try_inverse().expect("lattice matrix is invertible");
    let mut llo = vec![f64::INFINITY; d];
    let mut lhi = vec![f64::NEG_INFINITY; d];
    for corner in util::multi_range(&vec![0; d], &vec![1; d]) {
        let p: Vec<f64> = (0..d).map(|i| if corner[i] == 0 { lo[i] - hw[i] } else { hi[i] + hw[i] }).collect();
        let l = util::mat_vec(&linv, &p);
        for i in 0..d {
            llo[i] = llo[i].min(l[i]);
            lhi[i] = lhi[i].max(l[i]);
        }
    }
    (llo.iter().map(|v| v.floor() as i64 - 1).collect(), lhi.iter().map(|v| v.ceil() as i64 + 1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warpcore::{Mollifier, RadialComponent, SigmaFamily};

    fn id1() -> Warp {
        Warp::identity(1).unwrap()
    }

    #[test]
    fn identity_retention_and_cells() {
        let cov = Covering::build(&id1(), 1.0, (vec![-0.5], vec![0.5]), (vec![-0.5], vec![0.5])).unwrap();
        let ks: Vec<i64> = cov.freq.iter().map(|f| f.k[0]).collect();
        assert_eq!(ks, vec![-1, 0, 1]);
        for f in &cov.freq {
            assert!((f.bbox_min[0] - (f.k[0] as f64 - 1.0 - 0.1)).abs() < 1e-12);
            assert!((f.mu1 - 2.0).abs() < 1e-14 && (f.mu2 - 2.0).abs() < 1e-10);
            assert!((f.weight() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn log_cell_preimage() {
        let cov = Covering::build(&Warp::log(), 1.0, (vec![0.5], vec![2.0]), (vec![-0.1], vec![0.1])).unwrap();
        let f = cov.freq_cell_of(&[0]).unwrap();
        let pad = 0.05 * (1f64.exp() - (-1f64).exp());
        assert!((f.bbox_min[0] + pad - (-1f64).exp()).abs() < 1e-12);
        assert!((f.bbox_max[0] - pad - 1f64.exp()).abs() < 1e-12);
        assert!((f.mu2 - (1f64.exp() - (-1f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn disc_measure() {
        let w = Warp::identity(2).unwrap();
        let cov = Covering::build(&w, 0.5, (vec![-0.2, -0.2], vec![0.2, 0.2]), (vec![-0.1, -0.1], vec![0.1, 0.1])).unwrap();
        for f in &cov.freq {
            assert!((f.mu2 - std::f64::consts::PI * 0.25).abs() < 1e-8);
        }
    }

    #[test]
    fn preimage_volume_matches_weight_integral() {
        use crate::quad::{integrate_ball, QuadConfig};
        let cfg = QuadConfig { rel_tol: 1e-9, abs_tol: 0.0, initial_panels: 32, max_panels: 64, order: 16 };
        let rc = RadialComponent::slow_start(SigmaFamily::Log, 1.0, None, Mollifier::Bump).unwrap();
        // A centered ball pulls back to the ball of radius ρ∗(r).
        for d in [2, 3] {
            let w = Warp::radial(rc.clone(), d).unwrap();
            for r in [0.05, 0.4, 1.5] {
                let (v, ok) = preimage_volume(&w, &vec![0.0; d], r, 1e-10);
                let exact = unit_ball_volume(d) * rc.inv(r).powi(d as i32);
                assert!(ok && (v - exact).abs() <= 1e-9 * exact, "d={d} r={r}: {v} vs {exact}");
            }
        }
        for (w, c, r) in [
            (Warp::radial(rc.clone(), 2).unwrap(), vec![0.3, -0.2], 0.5),
            (Warp::radial(rc.clone(), 2).unwrap(), vec![2.5, 1.0], 1.0),
            (Warp::exotic2d(), vec![0.4, 0.7], 0.6),
        ] {
            let (v, ok) = preimage_volume(&w, &c, r, 1e-10);
            let oracle = integrate_ball(&|t: &[f64]| w.weight(t), &c, r, &cfg).value;
            assert!(ok);
            assert!((v - oracle).abs() <= 1e-7 * oracle, "{} {c:?}: {v} vs {oracle}", w.name());
        }
        let (v, _) = preimage_volume(&Warp::identity(3).unwrap(), &[1.0, 2.0, 3.0], 0.5, 1e-10);
        assert!((v - 4.0 / 3.0 * std::f64::consts::PI * 0.125).abs() < 1e-12);
    }

    #[test]
    fn identity_neighbors_include_adjacent_cells() {
        let cov = Covering::build(&id1(), 1.0, (vec![-0.5], vec![0.5]), (vec![-1.0], vec![1.0])).unwrap();
        let i = cov.find(&[0], &[0]).unwrap();
        let nb = cov.neighbors(i);
        for (l, k) in [(0, 1), (0, -1), (1, 0), (-1, 0)] {
            assert!(nb.contains(&(vec![l], vec![k])), "missing ({l},{k})");
        }
        assert!(nb.iter().all(|(_, k)| (k[0]).abs() < 2));
        // Centers 1 apart, radius 1: (2,0) does not meet (0,0).
        assert!(!nb.contains(&(vec![2], vec![0])));
    }

    #[test]
    fn ellipsoid_test_against_brute_force() {
        let m1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 0.5]);
        let m2 = DMatrix::from_row_slice(2, 2, &[0.4, 0.0, -0.2, 0.9]);
        for (cx, cy) in [(0.5, 0.5), (1.4, 0.0), (2.0, 1.0), (0.0, 1.45), (0.0, 1.3), (3.0, 3.0)] {
            let fast = ellipsoids_intersect(&[0.0, 0.0], &m1, &[cx, cy], &m2);
            // brute force: search for a point of E2 inside E1
            let inv1 = m1.clone().try_inverse().unwrap();
            let mut brute = false;
            for i in 0..400 {
                for j in 0..40 {
                    let t = std::f64::consts::TAU * i as f64 / 400.0;
                    let r = j as f64 / 40.0;
                    let p = util::add(&[cx, cy], &util::mat_vec(&m2, &[r * t.cos(), r * t.sin()]));
                    if util::norm(&util::mat_vec(&inv1, &p)) < 1.0 {
                        brute = true;
                    }
                }
            }
            assert_eq!(fast, brute, "c=({cx},{cy})");
        }
    }

    #[test]
    fn covering_weight_examples() {
        assert_eq!(covering_weight_of(2.0, 2.0), 1.0);
        assert_eq!(covering_weight_of(0.1, 3.0), 0.1);
    }

    #[test]
    fn discrete_weight_examples() {
        let cov = Covering::build(&id1(), 1.0, (vec![-0.5], vec![0.5]), (vec![-0.5], vec![0.5])).unwrap();
        let one = |_: &[f64], _: &[f64]| 1.0;
        let (fl, sh) = cov.discrete_weights(&one, 1.0, 1.0);
        assert!(fl.iter().all(|v| (v - 4.0).abs() < 1e-9) && sh.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let (fl, sh) = cov.discrete_weights(&one, f64::INFINITY, f64::INFINITY);
        assert!(fl.iter().all(|v| *v == 1.0) && sh.iter().all(|v| (v - 0.25).abs() < 1e-10));
        let (fl, _) = cov.discrete_weights(&one, 2.0, 2.0);
        assert!(fl.iter().all(|v| (v - 2.0).abs() < 1e-9));
    }

    #[test]
    fn superset_contains_cells_and_shrinks() {
        let rho = RadialComponent::slow_start(SigmaFamily::Log, 1.0, None, Mollifier::Bump).unwrap();
        let warp = Warp::radial(rho, 1).unwrap().with_control(Some(ControlWeight::Exponential { c: 3.0 }));
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for delta in [1.0, 0.5, 0.25] {
            let cov = Covering::build(&warp, delta, (vec![-3.0], vec![3.0]), (vec![-0.5], vec![0.5])).unwrap();
            let (y, om) = (vec![0.1], vec![1.7]);
            let sup = cov.oscillation_superset(&y, &om).unwrap();
            for (l, k) in cov.cells_containing(&y, &om) {
                let fc = cov.freq_cell_any(&k);
                let pseudo = Covering { cells: vec![Cell { l: l.clone(), kf: 0, time_center: fc.time_center(&l) }], freq: vec![fc], ..cov.clone() };
                for (py, pom) in pseudo.probes(0) {
                    assert!(sup.contains(&warp, &py, &pom));
                }
            }
            let dm = sup.diameters(&warp);
            assert!(dm.0 < prev.0 && dm.1 < prev.1);
            prev = dm;
        }
        let bare = Warp::exotic2d();
        let cov = Covering::build(&bare, 0.5, (vec![-1.0, -1.0], vec![1.0, 1.0]), (vec![-0.2, -0.2], vec![0.2, 0.2])).unwrap();
        assert!(matches!(cov.oscillation_superset(&[0.0, 0.0], &[0.1, 0.1]), Err(Error::MissingControlWeight)));
    }
}
