//! Warped atoms in the frequency domain, the sampled voice transform and its
//! adjoint, the frame operator, and conjugate-gradient reconstruction.

mod grid;
mod prototype;

pub use grid::{Channel, FreqGrid, PhaseGrid, PhaseGridConfig};
pub use prototype::{Prototype, PrototypeFamily, GAUSSIAN_RADIUS};

use crate::error::{Error, Result};
use crate::quad::{integrate_box, QuadConfig, QuadResult};
use crate::util;
use crate::warpcore::Warp;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

/// Sampled voice-transform values, one FFT-ordered array per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub channels: Vec<Vec<Complex64>>,
}

impl Coefficients {
    pub fn zeros(pg: &PhaseGrid) -> Self {
        Self { channels: pg.channels.iter().map(|c| vec![Complex64::new(0.0, 0.0); c.coeff_len()]).collect() }
    }

    pub fn matches(&self, pg: &PhaseGrid) -> bool {
        self.channels.len() == pg.channels.len() && self.channels.iter().zip(&pg.channels).all(|(v, c)| v.len() == c.coeff_len())
    }

    pub fn len(&self) -> usize {
        self.channels.iter().map(|c| c.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Σ μ_k c conj(d), the discrete phase-space inner product.
    pub fn inner(&self, other: &Self, pg: &PhaseGrid) -> Complex64 {
        self.channels
            .iter()
            .zip(&other.channels)
            .zip(&pg.channels)
            .map(|((a, b), ch)| a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>() * ch.mu)
            .sum()
    }
}

/// ⟨f, g⟩ in the band-limited signal space, with trapezoid weights.
pub fn signal_inner(weights: &[f64], f: &[Complex64], g: &[Complex64]) -> Complex64 {
    f.iter().zip(g).zip(weights).map(|((a, b), w)| a * b.conj() * *w).sum()
}

pub fn signal_norm(weights: &[f64], f: &[Complex64]) -> f64 {
    signal_inner(weights, f, f).re.max(0.0).sqrt()
}

/// ĝ_ω(ξ) = w(Φ(ω))^{−1/2}·θ(Φ(ξ) − Φ(ω)) at the given points; zero outside D.
pub fn atom_freq(theta: &Prototype, warp: &Warp, omega: &[f64], points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let tw = warp.try_forward(omega)?;
    let scale = warp.weight(&tw).powf(-0.5);
    Ok(points
        .iter()
        .map(|p| if warp.contains(p) { scale * theta.eval(&util::sub(&warp.forward(p), &tw)) } else { 0.0 })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    pub lower: f64,
    pub upper: f64,
    pub ratio: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub signal: Vec<Complex64>,
    pub iterations: usize,
    pub residual: f64,
}

struct Plans {
    fwd: HashMap<usize, Arc<dyn Fft<f64>>>,
    inv: HashMap<usize, Arc<dyn Fft<f64>>>,
}

/// A warped system sampled on a phase grid, with atoms precomputed.
pub struct Transform {
    pub warp: Warp,
    pub theta: Prototype,
    pub phase: PhaseGrid,
    weights: Vec<f64>,
    atoms: Vec<Vec<f64>>,
    /// e^{2πi⟨y_p, box_min⟩} per channel and FFT position.
    phases: Vec<Vec<Complex64>>,
    plans: Plans,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform").field("warp", &self.warp.name()).field("theta", &self.theta.name()).field("channels", &self.phase.channels.len()).finish()
    }
}

fn fft_nd(data: &mut [Complex64], shape: &[usize], plans: &HashMap<usize, Arc<dyn Fft<f64>>>) {
    let d = shape.len();
    let total: usize = shape.iter().product();
    let mut stride = 1;
    for axis in (0..d).rev() {
        let n = shape[axis];
        if n > 1 {
            let fft = &plans[&n];
            if stride == 1 {
                fft.process(data);
            } else {
                let mut line = vec![Complex64::new(0.0, 0.0); n];
                let block = n * stride;
                for start in (0..total).step_by(block) {
                    for off in 0..stride {
                        for (i, v) in line.iter_mut().enumerate() {
                            *v = data[start + off + i * stride];
                        }
                        fft.process(&mut line);
                        for (i, v) in line.iter().enumerate() {
                            data[start + off + i * stride] = *v;
                        }
                    }
                }
            }
        }
        stride *= n;
    }
}

impl Transform {
    pub fn new(warp: &Warp, theta: &Prototype, phase: PhaseGrid) -> Result<Self> {
        if theta.d != warp.dim() {
            return Err(Error::DimensionMismatch { expected: warp.dim(), got: theta.d });
        }
        let weights = phase.grid.weights();
        let atoms: Vec<Vec<f64>> = phase
            .channels
            .par_iter()
            .map(|c| {
                let scale = warp.weight(&c.tau).powf(-0.5);
                c.support.iter().map(|&j| scale * theta.eval(&util::sub(&phase.warped[j], &c.tau))).collect()
            })
            .collect();
        let phases: Vec<Vec<Complex64>> = phase
            .channels
            .par_iter()
            .map(|c| (0..c.coeff_len()).map(|p| Complex64::from_polar(1.0, TAU * util::dot(&c.time_point(p), &phase.grid.box_min))).collect())
            .collect();
        let mut planner = FftPlanner::new();
        let mut plans = Plans { fwd: HashMap::new(), inv: HashMap::new() };
        for c in &phase.channels {
            for &m in &c.lattice {
                plans.fwd.entry(m).or_insert_with(|| planner.plan_fft_forward(m));
                plans.inv.entry(m).or_insert_with(|| planner.plan_fft_inverse(m));
            }
        }
        Ok(Self { warp: warp.clone(), theta: theta.clone(), phase, weights, atoms, phases, plans })
    }

    /// Builds the phase grid for `theta` and the transform in one step.
    pub fn build(warp: &Warp, theta: &Prototype, grid: FreqGrid, delta: f64) -> Result<Self> {
        let pg = PhaseGrid::new(warp, grid, delta, theta.support_radius(), &PhaseGridConfig::default())?;
        Self::new(warp, theta, pg)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Atom values of channel `i` on its support.
    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i]
    }

    fn check_signal(&self, f: &[Complex64]) -> Result<()> {
        if f.len() != self.phase.grid.len() {
            return Err(Error::IncompatibleSampling(format!("signal has {} samples, grid has {}", f.len(), self.phase.grid.len())));
        }
        Ok(())
    }

    /// c_{ℓ,k} = Σ_j h q_j f̂(ξ_j) ĝ_k(ξ_j) e^{2πi⟨y_ℓ, ξ_j⟩}, one inverse FFT per channel.
    pub fn analyze(&self, f: &[Complex64]) -> Result<Coefficients> {
        self.check_signal(f)?;
        let channels = self
            .phase
            .channels
            .par_iter()
            .zip(&self.atoms)
            .zip(&self.phases)
            .map(|((c, atom), ph)| {
                let mut buf = vec![Complex64::new(0.0, 0.0); c.coeff_len()];
                for ((&j, &pos), &g) in c.support.iter().zip(&c.fold).zip(atom) {
                    buf[pos] += f[j] * (self.weights[j] * g);
                }
                fft_nd(&mut buf, &c.lattice, &self.plans.inv);
                for (v, e) in buf.iter_mut().zip(ph) {
                    *v *= e;
                }
                buf
            })
            .collect();
        Ok(Coefficients { channels })
    }

    /// f̂(ξ_j) = Σ μ_k c_{ℓ,k} ĝ_k(ξ_j) e^{−2πi⟨y_ℓ, ξ_j⟩}; the adjoint of
    /// [`Transform::analyze`] for the weighted inner products.
    pub fn synthesize(&self, c: &Coefficients) -> Result<Vec<Complex64>> {
        if !c.matches(&self.phase) {
            return Err(Error::IndexMismatch("coefficients do not match the phase grid".into()));
        }
        let parts: Vec<Vec<Complex64>> = self
            .phase
            .channels
            .par_iter()
            .zip(&self.atoms)
            .zip(&c.channels)
            .zip(&self.phases)
            .map(|(((ch, atom), coef), ph)| {
                let mut buf: Vec<Complex64> = coef.iter().zip(ph).map(|(v, e)| v * e.conj() * ch.mu).collect();
                fft_nd(&mut buf, &ch.lattice, &self.plans.fwd);
                ch.fold.iter().zip(atom).map(|(&pos, &g)| buf[pos] * g).collect()
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.phase.grid.len()];
        for (ch, part) in self.phase.channels.iter().zip(parts) {
            for (&j, v) in ch.support.iter().zip(part) {
                out[j] += v;
            }
        }
        Ok(out)
    }

    /// S f̂ = synthesize(analyze(f̂)).
    pub fn frame_apply(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let c = self.analyze(f)?;
        self.synthesize(&c)
    }

    fn masked_apply(&self, f: &[Complex64], mask: &[bool]) -> Vec<Complex64> {
        let mut g: Vec<Complex64> = f.iter().zip(mask).map(|(v, &m)| if m { *v } else { Complex64::new(0.0, 0.0) }).collect();
        g = self.frame_apply(&g).expect("grid-sized input");
        for (v, &m) in g.iter_mut().zip(mask) {
            if !m {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        g
    }

    /// Conjugate gradients for S x = b restricted to `mask`, in the weighted inner product.
    fn cg(&self, b: &[Complex64], mask: &[bool], tol: f64, max_iter: usize) -> (Vec<Complex64>, usize, f64) {
        let w = &self.weights;
        let bnorm = signal_norm(w, b);
        let mut x = vec![Complex64::new(0.0, 0.0); b.len()];
        if bnorm == 0.0 {
            return (x, 0, 0.0);
        }
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rr = signal_inner(w, &r, &r).re;
        for it in 1..=max_iter {
            let sp = self.masked_apply(&p, mask);
            let denom = signal_inner(w, &sp, &p).re;
            if !(denom > 0.0) {
                return (x, it, rr.sqrt() / bnorm);
            }
            let alpha = rr / denom;
            for i in 0..x.len() {
                x[i] += p[i] * alpha;
                r[i] -= sp[i] * alpha;
            }
            let rr_new = signal_inner(w, &r, &r).re;
            let rel = rr_new.sqrt() / bnorm;
            if rel <= tol {
                return (x, it, rel);
            }
            let beta = rr_new / rr;
            for i in 0..p.len() {
                p[i] = r[i] + p[i] * beta;
            }
            rr = rr_new;
        }
        (x, max_iter, rr.sqrt() / bnorm)
    }

    /// Estimates (A, B) over grid functions supported in the interior band,
    /// from the extreme Ritz values of a Lanczos run with full
    /// reorthogonalization (at most `iterations` steps).
    pub fn frame_bounds(&self, iterations: usize, seed: u64) -> Result<FrameBounds> {
        let mask = self.phase.interior_mask();
        let dim = mask.iter().filter(|&&m| m).count();
        if dim == 0 || self.phase.interior_channels() == 0 {
            return Err(Error::EmptySampling);
        }
        let w = &self.weights;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q: Vec<Complex64> =
            mask.iter().map(|&m| if m { Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) } else { Complex64::new(0.0, 0.0) }).collect();
        let n0 = signal_norm(w, &q);
        q.iter_mut().for_each(|x| *x /= n0);
        let steps = iterations.max(2).min(dim);
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(steps);
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let tol = 1e-10;
        let mut result = None;
        for j in 0..steps {
            let mut v = self.masked_apply(&q, &mask);
            alpha.push(signal_inner(w, &v, &q).re);
            basis.push(q);
            for _ in 0..2 {
                for b in &basis {
                    let h = signal_inner(w, &v, b);
                    for (x, y) in v.iter_mut().zip(b) {
                        *x -= y * h;
                    }
                }
            }
            let bnorm = signal_norm(w, &v);
            let last = j + 1 == steps;
            let exhausted = bnorm <= 1e-14 * alpha[0].abs().max(1e-300);
            if (j + 1) % 5 == 0 || last || exhausted {
                let m = alpha.len();
                let mut t = nalgebra::DMatrix::<f64>::zeros(m, m);
                for i in 0..m {
                    t[(i, i)] = alpha[i];
                    if i + 1 < m {
                        t[(i, i + 1)] = beta[i];
                        t[(i + 1, i)] = beta[i];
                    }
                }
                let eig = t.symmetric_eigen();
                let (mut imin, mut imax) = (0, 0);
                for i in 0..m {
                    if eig.eigenvalues[i] < eig.eigenvalues[imin] {
                        imin = i;
                    }
                    if eig.eigenvalues[i] > eig.eigenvalues[imax] {
                        imax = i;
                    }
                }
                let lo = eig.eigenvalues[imin];
                let hi = eig.eigenvalues[imax];
                let res_lo = bnorm * eig.eigenvectors[(m - 1, imin)].abs();
                let res_hi = bnorm * eig.eigenvectors[(m - 1, imax)].abs();
                let converged = exhausted || (res_lo <= tol * lo.abs() && res_hi <= tol * hi.abs());
                result = Some(FrameBounds { lower: lo, upper: hi, ratio: hi / lo, converged, iterations: m });
                if converged || last {
                    break;
                }
            }
            beta.push(bnorm);
            q = v.into_iter().map(|x| x / bnorm).collect();
        }
        Ok(result.expect("at least one Lanczos step"))
    }

    /// Solves S f̂ = synthesize(c) by CG on the whole grid.
    pub fn reconstruct(&self, c: &Coefficients, tol: f64, max_iter: usize) -> Result<Reconstruction> {
        let b = self.synthesize(c)?;
        let mask = vec![true; b.len()];
        let (x, iterations, residual) = self.cg(&b, &mask, tol, max_iter);
        if residual > tol {
            return Err(Error::CgStagnation { iterations, residual });
        }
        Ok(Reconstruction { signal: x, iterations, residual })
    }
}

/// ∫_D |g_ω(ξ)|² dω, integrated in ω over a padded bounding box of the preimage
/// of the atom support. Equals ‖θ‖² up to quadrature error.
pub fn tightness_profile(theta: &Prototype, warp: &Warp, xi: &[f64], cfg: &QuadConfig) -> Result<QuadResult<f64>> {
    let t0 = warp.try_forward(xi)?;
    let d = warp.dim();
    let r = theta.support_radius();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for u in util::sphere_directions(d, 256) {
        let p = warp.inverse(&util::add(&t0, &util::scale(&u, r)));
        for i in 0..d {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let iv = warp.domain_intervals();
    for i in 0..d {
        let pad = 0.05 * (hi[i] - lo[i]);
        lo[i] = (lo[i] - pad).max(iv[i].0);
        hi[i] = (hi[i] + pad).min(iv[i].1);
    }
    let f = |om: &[f64]| {
        if !warp.contains(om) {
            return 0.0;
        }
        let to = warp.forward(om);
        let v = theta.eval(&util::sub(&t0, &to));
        if v == 0.0 {
            0.0
        } else {
            v * v / warp.weight(&to)
        }
    };
    Ok(integrate_box(&f, &lo, &hi, cfg))
}

/// (Σ μ V₁f₁·conj(V₂f₂), ⟨f₁,f₂⟩·⟨θ₂,θ₁⟩) on a shared phase grid.
pub fn orthogonality_check(
    f1: &[Complex64],
    f2: &[Complex64],
    theta1: &Prototype,
    theta2: &Prototype,
    warp: &Warp,
    phase: &PhaseGrid,
) -> Result<(Complex64, Complex64)> {
    let t1 = Transform::new(warp, theta1, phase.clone())?;
    let t2 = Transform::new(warp, theta2, phase.clone())?;
    let c1 = t1.analyze(f1)?;
    let c2 = t2.analyze(f2)?;
    let lhs = c1.inner(&c2, phase);
    let rhs = signal_inner(t1.weights(), f1, f2) * Prototype::inner(theta2, theta1)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests;
