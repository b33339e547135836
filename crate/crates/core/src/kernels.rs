//! Gram and mixed kernels of warped systems, their A/B norms on truncated
//! phase-space grids, the maximal kernel, the Γ-oscillation and δ-sweeps.
//!
//! Suprema are probe maxima and norms are Riemann sums, so every number here
//! is a lower-bound style estimate of the continuous quantity.

use crate::covering::{Covering, FreqCell};
use crate::error::{Error, Result};
use crate::quad::{integrate_box, QuadConfig, QuadResult};
use crate::transform::{Prototype, PrototypeFamily};
use crate::util;
use crate::warpcore::{ControlWeight, Warp, WarpKind};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// m((y,ξ),(z,η)) = (1+|y−z|)^p·v₁(Φ(ξ)−Φ(η)); v₁ ≡ 1 when absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelWeight {
    pub p: f64,
    pub v1: Option<ControlWeight>,
}

impl KernelWeight {
    pub fn eval(&self, warp: &Warp, y: &[f64], omega: &[f64], z: &[f64], eta: &[f64]) -> f64 {
        let t = (1.0 + util::dist(y, z)).powf(self.p);
        match &self.v1 {
            Some(v) => t * v.eval(&util::sub(&warp.forward(omega), &warp.forward(eta))),
            None => t,
        }
    }

    /// Same weight from a precomputed time offset and warped frequency difference.
    fn eval_raw(&self, x: f64, dtau: &[f64]) -> f64 {
        let t = (1.0 + x).powf(self.p);
        match &self.v1 {
            Some(v) => t * v.eval(dtau),
            None => t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub warp: Warp,
    pub theta1: Prototype,
    pub theta2: Prototype,
    pub weight: KernelWeight,
}

impl KernelSpec {
    pub fn new(warp: &Warp, theta: &Prototype) -> Self {
        Self { warp: warp.clone(), theta1: theta.clone(), theta2: theta.clone(), weight: KernelWeight::default() }
    }

    pub fn mixed(warp: &Warp, theta1: &Prototype, theta2: &Prototype) -> Self {
        Self { warp: warp.clone(), theta1: theta1.clone(), theta2: theta2.clone(), weight: KernelWeight::default() }
    }

    pub fn with_weight(mut self, weight: KernelWeight) -> Self {
        self.weight = weight;
        self
    }
}

pub fn default_gram_cfg() -> QuadConfig {
    QuadConfig { rel_tol: 1e-10, abs_tol: 1e-15, initial_panels: 2, max_panels: 1024, order: 16 }
}

/// K(λ,ρ) = ⟨ψ_ρ, ψ_λ⟩ for λ = (y,ω), ρ = (z,η), with θ₁ on λ and θ₂ on ρ,
/// integrated in the warped variable υ = Φ(ξ) − Φ(η).
pub fn gram_kernel(spec: &KernelSpec, y: &[f64], omega: &[f64], z: &[f64], eta: &[f64]) -> Result<QuadResult<Complex64>> {
    gram_kernel_with(spec, y, omega, z, eta, &default_gram_cfg())
}

/// As [`gram_kernel`], using the closed form for Gaussian prototypes under the
/// identity warp.
pub fn gram_kernel_with(spec: &KernelSpec, y: &[f64], omega: &[f64], z: &[f64], eta: &[f64], cfg: &QuadConfig) -> Result<QuadResult<Complex64>> {
    let gaussians = spec.theta1.family == PrototypeFamily::Gaussian && spec.theta2.family == PrototypeFamily::Gaussian;
    if gaussians && spec.warp.kind == WarpKind::Identity && [y, omega, z, eta].iter().all(|v| v.len() == spec.warp.dim()) {
        let v = gaussian_identity_kernel(y, omega, z, eta) * (spec.theta1.amplitude * spec.theta2.amplitude);
        return Ok(QuadResult { value: v, converged: true, panels: 0 });
    }
    gram_kernel_quadrature(spec, y, omega, z, eta, cfg)
}

/// The kernel integral by adaptive quadrature in the warped variable, for any warp.
pub fn gram_kernel_quadrature(spec: &KernelSpec, y: &[f64], omega: &[f64], z: &[f64], eta: &[f64], cfg: &QuadConfig) -> Result<QuadResult<Complex64>> {
    let warp = &spec.warp;
    let d = warp.dim();
    for v in [y, omega, z, eta] {
        if v.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.len() });
        }
    }
    let tw = warp.try_forward(omega)?;
    let te = warp.try_forward(eta)?;
    let r1 = spec.theta1.support_radius();
    let r2 = spec.theta2.support_radius();
    let shift = util::sub(&te, &tw);
    let lo: Vec<f64> = (0..d).map(|i| (-r2).max(-shift[i] - r1)).collect();
    let hi: Vec<f64> = (0..d).map(|i| r2.min(-shift[i] + r1)).collect();
    let norm = (warp.weight(&te) * warp.weight(&tw)).sqrt();
    let x = util::sub(z, y);
    let f = |u: &[f64]| {
        let a = spec.theta2.eval(u);
        if a == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let b = spec.theta1.eval(&util::add(u, &shift));
        if b == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let t = util::add(u, &te);
        let xi = warp.inverse(&t);
        Complex64::from_polar(a * b * warp.weight(&t) / norm, -TAU * util::dot(&x, &xi))
    };
    Ok(integrate_box(&f, &lo, &hi, cfg))
}

/// Closed form for the identity warp and Gaussian prototypes:
/// 2^{−d/2}·e^{−π|ω−η|²/2}·e^{−π|z−y|²/2}·e^{−2πi⟨z−y,(ω+η)/2⟩}.
pub fn gaussian_identity_kernel(y: &[f64], omega: &[f64], z: &[f64], eta: &[f64]) -> Complex64 {
    let d = y.len() as f64;
    let x = util::sub(z, y);
    let m = util::scale(&util::add(omega, eta), 0.5);
    let dw = util::dist(omega, eta);
    let amp = 2f64.powf(-d / 2.0) * (-std::f64::consts::PI * (dw * dw + util::dot(&x, &x)) / 2.0).exp();
    Complex64::from_polar(amp, -TAU * util::dot(&x, &m))
}

/// Γ(ρ,ν) = e^{−2πi⟨z−z',η⟩} for ρ = (z,η), ν = (z',·).
pub fn gamma(z: &[f64], eta: &[f64], z_nu: &[f64]) -> Complex64 {
    Complex64::from_polar(1.0, -TAU * util::dot(&util::sub(z, z_nu), eta))
}

/// Integration settings for the mixed-kernel identity check.
#[derive(Debug, Clone, Copy)]
pub struct MixedConfig {
    /// Time samples per unit length in the ν-integral.
    pub time_density: f64,
    /// Gauss–Legendre panels per unit warped length for the frequency part of ν.
    pub freq_panels: usize,
    /// Half-width of the time window around the probe pair.
    pub time_radius: f64,
    pub kernel: QuadConfig,
}

impl Default for MixedConfig {
    fn default() -> Self {
        Self { time_density: 8.0, freq_panels: 4, time_radius: 6.0, kernel: QuadConfig { rel_tol: 1e-9, abs_tol: 1e-13, initial_panels: 2, max_panels: 128, order: 16 } }
    }
}

/// Max relative residual of ∫_Λ K_{θ₁}(λ,ν)K_{θ₂}(ν,ρ)dν = ⟨θ₁,θ₂⟩·K_{θ₁,θ₂}(λ,ρ)
/// over the probe pairs, in one dimension. With θ₃ the identity used is
/// ∫_Λ K_{θ₁,θ₃}(λ,ν)K_{θ₃,θ₂}(ν,ρ)dν = ‖θ₃‖²·K_{θ₁,θ₂}(λ,ρ).
pub fn mixed_kernel_identity_check(
    theta1: &Prototype,
    theta2: &Prototype,
    theta3: Option<&Prototype>,
    warp: &Warp,
    pairs: &[((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>))],
    cfg: &MixedConfig,
) -> Result<f64> {
    if warp.dim() != 1 {
        return Err(Error::InvalidParameter("the mixed-kernel check integrates over one-dimensional phase space".into()));
    }
    let (first, second, constant) = match theta3 {
        Some(t3) => (
            KernelSpec::mixed(warp, theta1, t3),
            KernelSpec::mixed(warp, t3, theta2),
            Prototype::inner(t3, t3)?,
        ),
        None => {
            let c = Prototype::inner(theta1, theta2)?;
            if c.abs() <= 1e-10 * (theta1.norm_sq() * theta2.norm_sq()).sqrt() {
                return Err(Error::OrthogonalPrototypes);
            }
            (KernelSpec::new(warp, theta1), KernelSpec::new(warp, theta2), c)
        }
    };
    let target = KernelSpec::mixed(warp, theta1, theta2);
    let r1 = theta1.support_radius();
    let r2 = theta2.support_radius();
    let r3 = first.theta2.support_radius();
    let rule = crate::quad::gl_rule(cfg.kernel.order);
    let mut worst = 0.0f64;
    for ((y, om), (z, eta)) in pairs {
        let t_lo = y[0].min(z[0]) - cfg.time_radius;
        let t_hi = y[0].max(z[0]) + cfg.time_radius;
        let nt = ((t_hi - t_lo) * cfg.time_density).ceil() as usize;
        let ht = (t_hi - t_lo) / nt as f64;
        let tw = warp.try_forward(om)?[0];
        let te = warp.try_forward(eta)?[0];
        // Both factors vanish unless Φ(ζ) is near Φ(ω) and Φ(η).
        let z_lo = (tw - r1 - r3).max(te - r2 - r3);
        let z_hi = (tw + r1 + r3).min(te + r2 + r3);
        if !(z_hi > z_lo) {
            continue;
        }
        let panels = ((z_hi - z_lo) * cfg.freq_panels as f64).ceil() as usize;
        let hz = (z_hi - z_lo) / panels as f64;
        let mut nodes = Vec::new();
        for p in 0..panels {
            for &(x, w) in rule {
                let tau = z_lo + p as f64 * hz + 0.5 * hz * (x + 1.0);
                nodes.push((tau, 0.5 * hz * w));
            }
        }
        let lhs: Complex64 = nodes
            .par_iter()
            .map(|&(tau, wq)| {
                let zeta = warp.inverse(&[tau]);
                // dζ = w(τ)dτ
                let jac = warp.weight(&[tau]);
                let mut acc = Complex64::new(0.0, 0.0);
                for it in 0..=nt {
                    let t = [t_lo + it as f64 * ht];
                    let a = gram_kernel_with(&first, y, om, &t, &zeta, &cfg.kernel).map(|q| q.value).unwrap_or_default();
                    if a.norm() == 0.0 {
                        continue;
                    }
                    let b = gram_kernel_with(&second, &t, &zeta, z, eta, &cfg.kernel).map(|q| q.value).unwrap_or_default();
                    let tw = if it == 0 || it == nt { 0.5 } else { 1.0 };
                    acc += a * b * tw;
                }
                acc * (ht * wq * jac)
            })
            .sum();
        let rhs = gram_kernel_with(&target, y, om, z, eta, &cfg.kernel)?.value * constant;
        let scale = constant.abs() * (theta1.norm_sq() * theta2.norm_sq()).sqrt();
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    Ok(worst)
}

/// Sample point plus `n_halton` quasi-random points of cell (ℓ, fc).
pub fn cell_probes(warp: &Warp, delta: f64, fc: &FreqCell, l: &[i64], n_halton: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = warp.dim();
    let c = fc.time_center(l);
    let mut out = vec![(c.clone(), fc.center.clone())];
    for i in 1..=n_halton as u64 {
        let h = util::halton(i, 2 * d);
        let u: Vec<f64> = h.iter().map(|x| 2.0 * x - 1.0).collect();
        let ut = util::scale(&util::cube_to_ball(&u[..d]), 0.999);
        let uf = util::scale(&util::cube_to_ball(&u[d..]), 0.999);
        let y = util::add(&c, &util::mat_vec(&fc.shape, &ut));
        let om = warp.inverse(&util::add(&fc.tau, &util::scale(&uf, delta)));
        out.push((y, om));
    }
    out
}

/// Probes of every cell of the full covering that contains (y, ω).
pub fn probes_around(cov: &Covering, y: &[f64], omega: &[f64], n_halton: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    cov.cells_containing(y, omega)
        .into_iter()
        .flat_map(|(l, k)| {
            let fc = cov.freq_cell_any(&k);
            cell_probes(&cov.warp, cov.delta, &fc, &l, n_halton)
        })
        .collect()
}

/// sup over ν ∈ V_ρ of |⟨ψ_λ, ψ_ρ − Γ(ρ,ν)ψ_ν⟩|, as a probe maximum.
pub fn oscillation(spec: &KernelSpec, cov: &Covering, lambda: (&[f64], &[f64]), rho: (&[f64], &[f64]), n_halton: usize) -> Result<f64> {
    oscillation_with(spec, cov, lambda, rho, n_halton, &default_gram_cfg())
}

pub fn oscillation_with(spec: &KernelSpec, cov: &Covering, lambda: (&[f64], &[f64]), rho: (&[f64], &[f64]), n_halton: usize, cfg: &QuadConfig) -> Result<f64> {
    let (y, om) = lambda;
    let (z, eta) = rho;
    // ⟨ψ_λ, ψ_ν⟩ = conj K(λ,ν) for real prototypes
    let base = gram_kernel_with(spec, y, om, z, eta, cfg)?.value.conj();
    let probes = probes_around(cov, z, eta, n_halton);
    let vals: Vec<Complex64> = probes.par_iter().map(|(zn, en)| gram_kernel_with(spec, y, om, zn, en, cfg).map(|k| k.value.conj())).collect::<Result<_>>()?;
    let mut best = 0.0f64;
    for ((zn, _), k) in probes.iter().zip(vals) {
        best = best.max((base - gamma(z, eta, &zn).conj() * k).norm());
    }
    Ok(best)
}

/// sup over ν ∈ V_λ of |K(ν,ρ)|, with λ itself among the probes.
pub fn max_kernel(spec: &KernelSpec, cov: &Covering, lambda: (&[f64], &[f64]), rho: (&[f64], &[f64]), n_halton: usize) -> Result<f64> {
    max_kernel_with(spec, cov, lambda, rho, n_halton, &default_gram_cfg())
}

pub fn max_kernel_with(spec: &KernelSpec, cov: &Covering, lambda: (&[f64], &[f64]), rho: (&[f64], &[f64]), n_halton: usize, cfg: &QuadConfig) -> Result<f64> {
    let (y, om) = lambda;
    let (z, eta) = rho;
    let base = gram_kernel_with(spec, y, om, z, eta, cfg)?.value.norm();
    let probes = probes_around(cov, y, om, n_halton);
    let vals: Vec<f64> = probes.par_iter().map(|(yn, on)| gram_kernel_with(spec, yn, on, z, eta, cfg).map(|k| k.value.norm())).collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(base, f64::max))
}

/// Truncated product grid on Λ: uniform in time, uniform in warped frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub d: usize,
    pub ys: Vec<Vec<f64>>,
    pub y_step: f64,
    pub taus: Vec<Vec<f64>>,
    pub omegas: Vec<Vec<f64>>,
    /// dω-measure of each frequency sample, w(τ)·Δτ^d.
    pub omega_weights: Vec<f64>,
}

fn uniform_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl LambdaGrid {
    /// `ny` time and `nw` warped-frequency samples per axis on [lo, hi]^d boxes.
    pub fn new(warp: &Warp, time: (f64, f64), ny: usize, tau: (f64, f64), nw: usize) -> Result<Self> {
        let d = warp.dim();
        if ny < 2 || nw < 2 || !(time.1 > time.0) || !(tau.1 > tau.0) {
            return Err(Error::InvalidParameter("grid needs at least two samples per axis and nonempty ranges".into()));
        }
        let ay = uniform_axis(time.0, time.1, ny);
        let at = uniform_axis(tau.0, tau.1, nw);
        let y_step = (time.1 - time.0) / (ny - 1) as f64;
        let t_step = (tau.1 - tau.0) / (nw - 1) as f64;
        let ys = util::multi_range(&vec![0; d], &vec![ny as i64 - 1; d]).into_iter().map(|i| i.iter().map(|&j| ay[j as usize]).collect()).collect();
        let taus: Vec<Vec<f64>> = util::multi_range(&vec![0; d], &vec![nw as i64 - 1; d]).into_iter().map(|i| i.iter().map(|&j| at[j as usize]).collect()).collect();
        let omegas = taus.iter().map(|t| warp.inverse(t)).collect();
        let omega_weights = taus.iter().map(|t| warp.weight(t) * t_step.powi(d as i32)).collect();
        Ok(Self { d, ys, y_step, taus, omegas, omega_weights })
    }

    pub fn n_time(&self) -> usize {
        self.ys.len()
    }

    pub fn n_freq(&self) -> usize {
        self.omegas.len()
    }

    pub fn len(&self) -> usize {
        self.n_time() * self.n_freq()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time_measure(&self) -> f64 {
        self.y_step.powi(self.d as i32)
    }

    fn time_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = (0..self.d).map(|i| self.ys.iter().map(|y| y[i]).fold(f64::INFINITY, f64::min)).collect();
        let hi = (0..self.d).map(|i| self.ys.iter().map(|y| y[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
        (lo, hi)
    }

    fn tau_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = (0..self.d).map(|i| self.taus.iter().map(|y| y[i]).fold(f64::INFINITY, f64::min)).collect();
        let hi = (0..self.d).map(|i| self.taus.iter().map(|y| y[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
        (lo, hi)
    }
}

/// Nonnegative kernel values on LambdaGrid × LambdaGrid; row λ = (i,a) at
/// a·n_time + i, column ρ likewise.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub n_time: usize,
    pub n_freq: usize,
    pub data: Vec<f64>,
}

impl KernelMatrix {
    pub fn from_fn(grid: &LambdaGrid, f: &(dyn Fn(usize, usize, usize, usize) -> f64 + Sync)) -> Self {
        let (nt, nf) = (grid.n_time(), grid.n_freq());
        let n = nt * nf;
        let data = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (r, c) = (idx / n, idx % n);
                f(r % nt, r / nt, c % nt, c / nt)
            })
            .collect();
        Self { n_time: nt, n_freq: nf, data }
    }

    fn dim(&self) -> usize {
        self.n_time * self.n_freq
    }

    /// Entry at λ = (i,a), ρ = (j,b).
    pub fn get(&self, i: usize, a: usize, j: usize, b: usize) -> f64 {
        self.data[(a * self.n_time + i) * self.dim() + b * self.n_time + j]
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim();
        let mut data = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                data[c * n + r] = self.data[r * n + c];
            }
        }
        Self { n_time: self.n_time, n_freq: self.n_freq, data }
    }

    /// Pointwise product with the weight m on the grid.
    pub fn weighted(&self, grid: &LambdaGrid, warp: &Warp, m: &KernelWeight) -> Self {
        let mut out = self.clone();
        let n = self.dim();
        for r in 0..n {
            for c in 0..n {
                let (i, a, j, b) = (r % self.n_time, r / self.n_time, c % self.n_time, c / self.n_time);
                out.data[r * n + c] *= m.eval(warp, &grid.ys[i], &grid.omegas[a], &grid.ys[j], &grid.omegas[b]);
            }
        }
        out
    }
}

/// max{sup_ρ Σ_λ |K(λ,ρ)|μ(λ), sup_λ Σ_ρ |K(λ,ρ)|μ(ρ)}.
///
/// Sums are grouped per frequency slice in the same order as [`bm_norm`];
/// rounding is monotone, so A ≤ B then holds exactly in floating point.
pub fn am_norm(k: &KernelMatrix, grid: &LambdaGrid) -> f64 {
    let (nt, nf) = (k.n_time, k.n_freq);
    let hy = grid.time_measure();
    let mut best = 0.0f64;
    for a in 0..nf {
        for i in 0..nt {
            let row = (0..nf).map(|b| hy * (0..nt).map(|j| k.get(i, a, j, b)).sum::<f64>() * grid.omega_weights[b]).sum::<f64>();
            best = best.max(row);
        }
    }
    for b in 0..nf {
        for j in 0..nt {
            let col = (0..nf).map(|a| hy * (0..nt).map(|i| k.get(i, a, j, b)).sum::<f64>() * grid.omega_weights[a]).sum::<f64>();
            best = best.max(col);
        }
    }
    best
}

/// A₁ norm over the time slice for each frequency pair, then A₁ over frequency.
pub fn bm_norm(k: &KernelMatrix, grid: &LambdaGrid) -> f64 {
    let (nt, nf) = (k.n_time, k.n_freq);
    let hy = grid.time_measure();
    let mut slice = vec![0.0; nf * nf];
    for a in 0..nf {
        for b in 0..nf {
            let mut rmax = 0.0f64;
            for i in 0..nt {
                rmax = rmax.max((0..nt).map(|j| k.get(i, a, j, b)).sum::<f64>());
            }
            let mut cmax = 0.0f64;
            for j in 0..nt {
                cmax = cmax.max((0..nt).map(|i| k.get(i, a, j, b)).sum::<f64>());
            }
            slice[a * nf + b] = hy * rmax.max(cmax);
        }
    }
    let rows = (0..nf).map(|a| (0..nf).map(|b| slice[a * nf + b] * grid.omega_weights[b]).sum::<f64>()).fold(0.0, f64::max);
    let cols = (0..nf).map(|b| (0..nf).map(|a| slice[a * nf + b] * grid.omega_weights[a]).sum::<f64>()).fold(0.0, f64::max);
    rows.max(cols)
}

/// A norm value with its refinement history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub resolution: usize,
    pub history: Vec<f64>,
    pub converged: bool,
}

impl NormEstimate {
    /// Converged when the last two values agree to `rel_tol`.
    pub fn from_history(history: Vec<f64>, resolution: usize, rel_tol: f64) -> Self {
        let value = history.last().copied().unwrap_or(f64::NAN);
        let converged = history.len() >= 2 && {
            let prev = history[history.len() - 2];
            (value - prev).abs() <= rel_tol * value.abs().max(prev.abs())
        };
        Self { value, resolution, history, converged }
    }
}

/// Frequency quadrature nodes for the grid kernels: a uniform trapezoid grid in
/// warped coordinates, fine enough to resolve both the prototypes and the phase
/// e^{2πi⟨x,ξ⟩} for |x| ≤ x_max.
#[derive(Debug, Clone)]
pub struct Nodes {
    pub tau: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    /// dξ-measure of each node.
    pub weight: Vec<f64>,
    lo: Vec<f64>,
    steps: Vec<f64>,
    counts: Vec<i64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NodeConfig {
    /// Samples per prototype radius.
    pub per_radius: f64,
    /// Samples per phase period at the largest time offset.
    pub per_period: f64,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self { per_radius: 24.0, per_period: 4.0 }
    }
}

impl Nodes {
    pub fn build(warp: &Warp, lo: &[f64], hi: &[f64], radius: f64, x_max: f64, cfg: &NodeConfig) -> Self {
        let d = warp.dim();
        let base = radius / cfg.per_radius;
        let step_at = |t: &[f64]| {
            let a = warp.inv_jacobian(t);
            base.min(1.0 / (cfg.per_period * x_max.max(1e-12) * util::op_norm(&a)))
        };
        // A single uniform step keeps the trapezoid rule spectrally accurate
        // for the smooth, compactly supported integrands.
        let probes: i64 = if d == 1 { 256 } else { 8 };
        let mut h = base;
        for c in util::multi_range(&vec![0; d], &vec![probes; d]) {
            let p: Vec<f64> = (0..d).map(|i| lo[i] + (hi[i] - lo[i]) * c[i] as f64 / probes as f64).collect();
            h = h.min(step_at(&p));
        }
        let counts: Vec<i64> = (0..d).map(|i| ((hi[i] - lo[i]) / h).ceil() as i64).collect();
        let steps: Vec<f64> = (0..d).map(|i| (hi[i] - lo[i]) / counts[i] as f64).collect();
        let mut tau = Vec::new();
        let mut weight = Vec::new();
        for idx in util::multi_range(&vec![0; d], &counts) {
            let t: Vec<f64> = (0..d).map(|i| lo[i] + idx[i] as f64 * steps[i]).collect();
            let mut w = warp.weight(&t);
            for i in 0..d {
                w *= steps[i] * if idx[i] == 0 || idx[i] == counts[i] { 0.5 } else { 1.0 };
            }
            tau.push(t);
            weight.push(w);
        }
        let xi = tau.par_iter().map(|t| warp.inverse(t)).collect();
        Self { tau, xi, weight, lo: lo.to_vec(), steps, counts }
    }

    /// Indices, increasing, of nodes inside the box center ± r.
    fn indices_near(&self, center: &[f64], r: f64) -> Vec<usize> {
        let d = self.lo.len();
        let a: Vec<i64> = (0..d).map(|i| (((center[i] - r - self.lo[i]) / self.steps[i]).floor() as i64).clamp(0, self.counts[i])).collect();
        let b: Vec<i64> = (0..d).map(|i| (((center[i] + r - self.lo[i]) / self.steps[i]).ceil() as i64).clamp(0, self.counts[i])).collect();
        let mut strides = vec![1usize; d];
        for i in 1..d {
            strides[i] = strides[i - 1] * (self.counts[i - 1] + 1) as usize;
        }
        util::multi_range(&a, &b).into_iter().map(|p| p.iter().zip(&strides).map(|(&x, &s)| x as usize * s).sum()).collect()
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }
}

/// Atom values ĝ_ω on the nodes where they are nonzero, sorted by node index.
#[derive(Debug, Clone)]
struct SparseAtom {
    idx: Vec<usize>,
    val: Vec<f64>,
}

/// Kernel values on a [`LambdaGrid`] from node sums.
pub struct GridKernels<'a> {
    pub spec: &'a KernelSpec,
    pub grid: &'a LambdaGrid,
    pub nodes: Nodes,
    /// e^{−2πi⟨y_i, ξ_j⟩}, row-major in (i, j).
    ey: Vec<Complex64>,
    atoms1: Vec<SparseAtom>,
    atoms2: Vec<SparseAtom>,
}

impl<'a> GridKernels<'a> {
    /// `margin` widens the warped node range beyond the grid (probes of cells
    /// reach 2δ past a sample); `x_max` bounds the time offsets evaluated.
    pub fn new(spec: &'a KernelSpec, grid: &'a LambdaGrid, margin: f64, x_max: f64, cfg: &NodeConfig) -> Result<Self> {
        if grid.d != spec.warp.dim() {
            return Err(Error::DimensionMismatch { expected: spec.warp.dim(), got: grid.d });
        }
        let r = spec.theta1.support_radius().max(spec.theta2.support_radius());
        let (tlo, thi) = grid.tau_bounds();
        let lo: Vec<f64> = tlo.iter().map(|t| t - r - margin).collect();
        let hi: Vec<f64> = thi.iter().map(|t| t + r + margin).collect();
        let rmin = spec.theta1.support_radius().min(spec.theta2.support_radius());
        let nodes = Nodes::build(&spec.warp, &lo, &hi, rmin, x_max, cfg);
        let nn = nodes.len();
        let ey: Vec<Complex64> = grid
            .ys
            .par_iter()
            .flat_map_iter(|y| nodes.xi.iter().map(move |xi| Complex64::from_polar(1.0, -TAU * util::dot(y, xi))).collect::<Vec<_>>())
            .collect();
        debug_assert_eq!(ey.len(), grid.n_time() * nn);
        let mut out = Self { spec, grid, nodes, ey, atoms1: Vec::new(), atoms2: Vec::new() };
        out.atoms1 = grid.taus.iter().map(|t| out.atom(&spec.theta1, t)).collect();
        out.atoms2 = grid.taus.iter().map(|t| out.atom(&spec.theta2, t)).collect();
        Ok(out)
    }

    fn atom(&self, theta: &Prototype, tau: &[f64]) -> SparseAtom {
        let scale = self.spec.warp.weight(tau).powf(-0.5);
        let r = theta.support_radius();
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for j in self.nodes.indices_near(tau, r) {
            let u = util::sub(&self.nodes.tau[j], tau);
            if util::norm(&u) < r {
                let v = theta.eval(&u);
                if v != 0.0 {
                    idx.push(j);
                    val.push(scale * v);
                }
            }
        }
        SparseAtom { idx, val }
    }

    /// ∫ ĝ_a ĝ_ν e^{−2πi⟨y_i − z_ν, ξ⟩} dξ for every grid time y_i.
    fn row(&self, a: &SparseAtom, nu_atom: &SparseAtom, z_nu: &[f64]) -> Vec<Complex64> {
        let nn = self.nodes.len();
        let mut prod: Vec<(usize, Complex64)> = Vec::new();
        let (mut p, mut q) = (0, 0);
        while p < a.idx.len() && q < nu_atom.idx.len() {
            match a.idx[p].cmp(&nu_atom.idx[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    let j = a.idx[p];
                    let v = a.val[p] * nu_atom.val[q] * self.nodes.weight[j];
                    prod.push((j, Complex64::from_polar(v, TAU * util::dot(z_nu, &self.nodes.xi[j]))));
                    p += 1;
                    q += 1;
                }
            }
        }
        let nt = self.grid.n_time();
        let mut out = vec![Complex64::new(0.0, 0.0); nt];
        if prod.is_empty() {
            return out;
        }
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.ey[i * nn..(i + 1) * nn];
            *o = prod.iter().map(|&(j, v)| v * row[j]).sum();
        }
        out
    }

    /// |K(λ,ρ)| on the grid.
    pub fn gram_matrix(&self) -> KernelMatrix {
        let (nt, nf) = (self.grid.n_time(), self.grid.n_freq());
        // rows[a][b][j] holds ⟨ψ_{(y_i,ω_a)}, ψ_{(z_j,η_b)}⟩ as a vector over i.
        let blocks: Vec<Vec<Vec<f64>>> = (0..nf * nf)
            .into_par_iter()
            .map(|ab| {
                let (a, b) = (ab / nf, ab % nf);
                (0..nt).map(|j| self.row(&self.atoms1[a], &self.atoms2[b], &self.grid.ys[j]).iter().map(|v| v.norm()).collect()).collect()
            })
            .collect();
        KernelMatrix::from_fn(self.grid, &|i, a, j, b| blocks[a * nf + b][j][i])
    }

    /// Complex K(λ,ρ) at grid indices.
    pub fn gram_entry(&self, i: usize, a: usize, j: usize, b: usize) -> Complex64 {
        self.row(&self.atoms1[a], &self.atoms2[b], &self.grid.ys[j])[i].conj()
    }

    /// osc(λ,ρ) on the grid with probes of the cells of `cov` containing ρ.
    pub fn osc_matrix(&self, cov: &Covering, n_halton: usize) -> KernelMatrix {
        let (nt, nf) = (self.grid.n_time(), self.grid.n_freq());
        let warp = &self.spec.warp;
        // cols[b*nt + j] = osc values over λ for ρ = (z_j, η_b)
        let cols: Vec<Vec<f64>> = (0..nf * nt)
            .into_par_iter()
            .map(|c| {
                let (b, j) = (c / nt, c % nt);
                let z = &self.grid.ys[j];
                let eta = &self.grid.omegas[b];
                let probes: Vec<(Vec<f64>, SparseAtom, Complex64)> = probes_around(cov, z, eta, n_halton)
                    .into_iter()
                    .map(|(zn, en)| {
                        let atom = self.atom(&self.spec.theta2, &warp.forward(&en));
                        let g = gamma(z, eta, &zn).conj();
                        (zn, atom, g)
                    })
                    .collect();
                let mut col = vec![0.0f64; nt * nf];
                for a in 0..nf {
                    let base = self.row(&self.atoms1[a], &self.atoms2[b], z);
                    for (zn, atom, g) in &probes {
                        let r = self.row(&self.atoms1[a], atom, zn);
                        for i in 0..nt {
                            let v = (base[i] - g * r[i]).norm();
                            let slot = &mut col[a * nt + i];
                            *slot = slot.max(v);
                        }
                    }
                }
                col
            })
            .collect();
        KernelMatrix::from_fn(self.grid, &|i, a, j, b| cols[b * nt + j][a * nt + i])
    }

    /// M_V K(λ,ρ) on the grid: the max of |K(ν,ρ)| over λ and probes of cells containing λ.
    pub fn max_kernel_matrix(&self, cov: &Covering, n_halton: usize) -> KernelMatrix {
        let (nt, nf) = (self.grid.n_time(), self.grid.n_freq());
        let warp = &self.spec.warp;
        let gram = self.gram_matrix();
        // rows[a*nt + i] = values over ρ for λ = (y_i, ω_a)
        let rows: Vec<Vec<f64>> = (0..nf * nt)
            .into_par_iter()
            .map(|r| {
                let (a, i) = (r / nt, r % nt);
                let probes = probes_around(cov, &self.grid.ys[i], &self.grid.omegas[a], n_halton);
                let mut row: Vec<f64> = (0..nf * nt).map(|c| gram.get(i, a, c % nt, c / nt)).collect();
                for (yn, on) in probes {
                    let atom = self.atom(&self.spec.theta1, &warp.forward(&on));
                    for b in 0..nf {
                        // |K(ν,ρ)| = |⟨ψ_ρ... ⟩| evaluated over z_j
                        let vals = self.row(&self.atoms2[b], &atom, &yn);
                        for j in 0..nt {
                            let slot = &mut row[b * nt + j];
                            *slot = slot.max(vals[j].norm());
                        }
                    }
                }
                row
            })
            .collect();
        KernelMatrix::from_fn(self.grid, &|i, a, j, b| rows[a * nt + i][b * nt + j])
    }
}

/// Parameters of a δ-sweep on a truncated Λ-grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayConfig {
    pub time: (f64, f64),
    pub n_time: usize,
    pub tau: (f64, f64),
    pub n_freq: usize,
    pub n_halton: usize,
    pub nodes: NodeConfig,
    /// Relative agreement required between node resolutions for the converged flag.
    pub rel_tol: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { time: (-1.5, 1.5), n_time: 17, tau: (-1.0, 1.0), n_freq: 11, n_halton: 8, nodes: NodeConfig::default(), rel_tol: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub delta: f64,
    pub osc_bm: f64,
    pub gram_bm: f64,
    pub contraction: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// First δ whose contraction value is below 1.
    pub delta0: Option<f64>,
}

impl DecayTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,osc_bm,gram_bm,contraction,converged\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.delta, r.osc_bm, r.gram_bm, r.contraction, r.converged));
        }
        s
    }
}

/// ‖osc‖_{B_m} and ‖osc‖_{B_m}(2‖K‖_{B_m} + ‖osc‖_{B_m}) for each δ.
pub fn decay_sweep(spec: &KernelSpec, deltas: &[f64], cfg: &DecayConfig) -> Result<DecayTable> {
    if deltas.is_empty() || deltas.windows(2).any(|w| !(w[1] < w[0])) || deltas.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidParameter("delta list must be positive and strictly decreasing".into()));
    }
    let warp = &spec.warp;
    let d = warp.dim();
    let grid = LambdaGrid::new(warp, cfg.time, cfg.n_time, cfg.tau, cfg.n_freq)?;
    let (ylo, yhi) = grid.time_bounds();
    let (tlo, thi) = grid.tau_bounds();
    let freq_box = (warp.inverse(&tlo), warp.inverse(&thi));
    let mut rows = Vec::new();
    for &delta in deltas {
        // Probe times lie within one cell diameter of a grid time; cells
        // containing a grid point have Φ-centers within δ of the grid range.
        let lo_m: Vec<f64> = tlo.iter().map(|t| t - delta).collect();
        let hi_m: Vec<f64> = thi.iter().map(|t| t + delta).collect();
        let samples: i64 = if d == 1 { 64 } else { 8 };
        let cell_r = util::multi_range(&vec![0; d], &vec![samples; d])
            .into_iter()
            .map(|c| {
                let t: Vec<f64> = (0..d).map(|i| lo_m[i] + (hi_m[i] - lo_m[i]) * c[i] as f64 / samples as f64).collect();
                util::op_norm(&warp.inv_jacobian(&t).try_inverse().expect("invertible").transpose()) * delta
            })
            .fold(0.0, f64::max);
        let x_max = util::dist(&ylo, &yhi) + 2.0 * cell_r;
        let cov = Covering::build(warp, delta, freq_box.clone(), (ylo.clone(), yhi.clone()))?;
        let gk = GridKernels::new(spec, &grid, 2.0 * delta, x_max, &cfg.nodes)?;
        let w = &spec.weight;
        let gram = gk.gram_matrix().weighted(&grid, warp, w);
        let osc = gk.osc_matrix(&cov, cfg.n_halton).weighted(&grid, warp, w);
        let gram_bm = bm_norm(&gram, &grid);
        let osc_bm = bm_norm(&osc, &grid);
        // Node refinement check on the Gram norm.
        let fine = NodeConfig { per_radius: 2.0 * cfg.nodes.per_radius, per_period: 2.0 * cfg.nodes.per_period };
        let gk2 = GridKernels::new(spec, &grid, 2.0 * delta, x_max, &fine)?;
        let gram_fine = bm_norm(&gk2.gram_matrix().weighted(&grid, warp, w), &grid);
        let converged = (gram_fine - gram_bm).abs() <= cfg.rel_tol * gram_fine;
        rows.push(DecayRow { delta, osc_bm, gram_bm, contraction: osc_bm * (2.0 * gram_bm + osc_bm), converged });
    }
    let delta0 = rows.iter().find(|r| r.contraction < 1.0).map(|r| r.delta);
    Ok(DecayTable { rows, delta0 })
}

/// Separable kernel helper for norm checks: a(λ)·b(ρ).
pub fn separable_matrix(grid: &LambdaGrid, a: &[f64], b: &[f64]) -> KernelMatrix {
    let nt = grid.n_time();
    KernelMatrix::from_fn(grid, &|i, ai, j, bj| a[ai * nt + i] * b[bj * nt + j])
}

/// Weighted raw value m·|K| from precomputed pieces; used by callers that
/// already hold time offsets and warped differences.
pub fn weight_factor(m: &KernelWeight, x: f64, dtau: &[f64]) -> f64 {
    m.eval_raw(x, dtau)
}
