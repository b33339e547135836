//! Frequency grids inside D and the per-channel time lattices dual to them.

use crate::error::{Error, Result};
use crate::util;
use crate::warpcore::Warp;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Uniform grid on a box, endpoints included, with trapezoid weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqGrid {
    pub shape: Vec<usize>,
    pub box_min: Vec<f64>,
    pub box_max: Vec<f64>,
}

impl FreqGrid {
    pub fn new(box_min: Vec<f64>, box_max: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let d = box_min.len();
        if d == 0 || box_max.len() != d || shape.len() != d {
            return Err(Error::InvalidParameter("box bounds and shape must have equal positive length".into()));
        }
        for i in 0..d {
            if !(box_max[i] > box_min[i]) || shape[i] < 2 {
                return Err(Error::InvalidParameter(format!("axis {i}: need max > min and at least 2 points")));
            }
        }
        Ok(Self { shape, box_min, box_max })
    }

    /// Checks that the box lies strictly inside D.
    pub fn check_inside(&self, warp: &Warp) -> Result<()> {
        if warp.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: warp.dim(), got: self.dim() });
        }
        let lo = util::multi_range(&vec![0; self.dim()], &vec![1; self.dim()]);
        for corner in lo {
            let p: Vec<f64> = corner.iter().enumerate().map(|(i, &c)| if c == 0 { self.box_min[i] } else { self.box_max[i] }).collect();
            if !warp.contains(&p) {
                return Err(Error::OutsideDomain(p));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| (self.box_max[i] - self.box_min[i]) / (self.shape[i] - 1) as f64).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Row-major multi-index of flat index `j`.
    pub fn unravel(&self, mut j: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            idx[i] = j % self.shape[i];
            j /= self.shape[i];
        }
        idx
    }

    pub fn point(&self, j: usize) -> Vec<f64> {
        let h = self.spacing();
        self.unravel(j).iter().enumerate().map(|(i, &m)| self.box_min[i] + m as f64 * h[i]).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|j| self.point(j)).collect()
    }

    /// Quadrature weights h_ξ·Π q with q = ½ at the box faces.
    pub fn weights(&self) -> Vec<f64> {
        let hv = self.cell_volume();
        (0..self.len())
            .map(|j| {
                self.unravel(j).iter().enumerate().fold(hv, |acc, (i, &m)| if m == 0 || m + 1 == self.shape[i] { acc * 0.5 } else { acc })
            })
            .collect()
    }

    /// Distance of flat index `j` to the nearest face, in grid steps.
    pub fn face_distance(&self, j: usize) -> usize {
        self.unravel(j).iter().enumerate().map(|(i, &m)| m.min(self.shape[i] - 1 - m)).min().unwrap_or(0)
    }
}

/// One frequency channel: center τ_k = δk/√d and its FFT-dual time lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub k: Vec<i64>,
    pub tau: Vec<f64>,
    pub omega: Vec<f64>,
    /// Center outside the box, or support within the edge margin of a face.
    pub edge: bool,
    /// Time steps per axis; the lattice is Π s_i · Z^d with one period of M_i points.
    pub steps: Vec<f64>,
    pub lattice: Vec<usize>,
    /// Time-cell volume times the frequency-cell measure, by the midpoint
    /// rule in warped coordinates: (δ/√d)^d·w(τ_k).
    pub mu: f64,
    /// Flat grid indices where the atom is supported.
    pub support: Vec<usize>,
    /// Position of each support index in the folded lattice array.
    pub fold: Vec<usize>,
}

impl Channel {
    pub fn coeff_len(&self) -> usize {
        self.lattice.iter().product()
    }

    /// Signed lattice index ℓ of FFT-ordered position `p`.
    pub fn ell(&self, mut p: usize) -> Vec<i64> {
        let d = self.lattice.len();
        let mut out = vec![0i64; d];
        for i in (0..d).rev() {
            let m = self.lattice[i];
            let q = p % m;
            p /= m;
            out[i] = if q < m - m / 2 { q as i64 } else { q as i64 - m as i64 };
        }
        out
    }

    /// FFT-ordered position of lattice index ℓ (taken modulo the period).
    pub fn position(&self, ell: &[i64]) -> usize {
        let mut p = 0usize;
        for (i, &l) in ell.iter().enumerate() {
            let m = self.lattice[i] as i64;
            p = p * m as usize + l.rem_euclid(m) as usize;
        }
        p
    }

    pub fn time_point(&self, p: usize) -> Vec<f64> {
        self.ell(p).iter().zip(&self.steps).map(|(&l, &s)| l as f64 * s).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGridConfig {
    /// Faces closer than this many grid steps to an atom's support make its channel an edge channel.
    pub edge_margin: usize,
}

impl Default for PhaseGridConfig {
    fn default() -> Self {
        Self { edge_margin: 1 }
    }
}

/// Discretized phase space: a frequency grid and the retained channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub grid: FreqGrid,
    pub delta: f64,
    pub support_radius: f64,
    pub channels: Vec<Channel>,
    /// Φ at every grid point.
    #[serde(skip)]
    pub warped: Vec<Vec<f64>>,
}

impl PhaseGrid {
    /// Retains every channel whose atom (of support radius `radius` in warped
    /// coordinates) meets a grid point.
    pub fn new(warp: &Warp, grid: FreqGrid, delta: f64, radius: f64, cfg: &PhaseGridConfig) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter("support radius must be positive".into()));
        }
        grid.check_inside(warp)?;
        let d = grid.dim();
        let sd = (d as f64).sqrt();
        let warped: Vec<Vec<f64>> = grid.points().par_iter().map(|p| warp.forward(p)).collect();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for t in &warped {
            for i in 0..d {
                lo[i] = lo[i].min(t[i]);
                hi[i] = hi[i].max(t[i]);
            }
        }
        let klo: Vec<i64> = lo.iter().map(|&v| ((v - radius) * sd / delta).floor() as i64).collect();
        let khi: Vec<i64> = hi.iter().map(|&v| ((v + radius) * sd / delta).ceil() as i64).collect();
        let h = grid.spacing();
        let ks = util::multi_range(&klo, &khi);
        let mut channels: Vec<Channel> = ks
            .par_iter()
            .filter_map(|k| {
                let tau: Vec<f64> = k.iter().map(|&ki| delta * ki as f64 / sd).collect();
                let support: Vec<usize> = (0..warped.len()).filter(|&j| util::dist(&warped[j], &tau) < radius).collect();
                if support.is_empty() {
                    return None;
                }
                // Row norms of A, maximized over the support ball so that the
                // lattice resolves the atom's full frequency extent.
                let mut rows = vec![0.0f64; d];
                for probe in ball_probes(&tau, radius) {
                    let a = warp.inv_jacobian(&probe);
                    for (i, r) in rows.iter_mut().enumerate() {
                        *r = r.max((0..d).map(|j| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt());
                    }
                }
                let mut steps = Vec::with_capacity(d);
                let mut lattice = Vec::with_capacity(d);
                for i in 0..d {
                    let target = delta / (sd * rows[i]);
                    let m = (1.0 / (target * h[i])).ceil().max(1.0) as usize;
                    lattice.push(m);
                    steps.push(1.0 / (m as f64 * h[i]));
                }
                let fold = support
                    .iter()
                    .map(|&j| {
                        let idx = grid.unravel(j);
                        idx.iter().enumerate().fold(0usize, |p, (i, &m)| p * lattice[i] + m % lattice[i])
                    })
                    .collect();
                let omega = warp.inverse(&tau);
                let edge = !grid_box_contains(&grid, &omega) || support.iter().any(|&j| grid.face_distance(j) < cfg.edge_margin.max(1));
                let mu = steps.iter().product::<f64>() * (delta / sd).powi(d as i32) * warp.weight(&tau);
                Some(Channel { k: k.clone(), tau, omega, edge, steps, lattice, mu, support, fold })
            })
            .collect();
        channels.sort_by(|a, b| a.k.cmp(&b.k));
        if channels.is_empty() {
            return Err(Error::EmptySampling);
        }
        Ok(Self { grid, delta, support_radius: radius, channels, warped })
    }

    pub fn interior_channels(&self) -> usize {
        self.channels.iter().filter(|c| !c.edge).count()
    }

    /// Grid points outside the support of every edge channel.
    pub fn interior_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.grid.len()];
        for c in self.channels.iter().filter(|c| c.edge) {
            for &j in &c.support {
                mask[j] = false;
            }
        }
        mask
    }

    pub fn total_coefficients(&self) -> usize {
        self.channels.iter().map(|c| c.coeff_len()).sum()
    }
}

/// Center, plus points at half and full radius along a fixed set of directions.
fn ball_probes(center: &[f64], radius: f64) -> Vec<Vec<f64>> {
    let d = center.len();
    let mut out = vec![center.to_vec()];
    let dirs = util::sphere_directions(d, 16);
    for frac in [0.25, 0.5, 0.75, 1.0] {
        for u in &dirs {
            out.push(util::add(center, &util::scale(u, frac * radius)));
        }
    }
    out
}

fn grid_box_contains(grid: &FreqGrid, p: &[f64]) -> bool {
    p.iter().enumerate().all(|(i, &x)| x >= grid.box_min[i] && x <= grid.box_max[i])
}
