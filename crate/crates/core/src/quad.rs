//! Composite Gauss–Legendre quadrature on intervals and boxes, refined by
//! panel doubling until two successive values agree.

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use std::ops::{Add, Mul};
use std::sync::OnceLock;

/// Nodes and weights of the `n`-point rule on [-1, 1]; cached for the orders used here.
pub fn gl_rule(n: usize) -> &'static [(f64, f64)] {
    static R8: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static R16: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static R32: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let cell = match n {
        8 => &R8,
        16 => &R16,
        32 => &R32,
        _ => panic!("unsupported Gauss-Legendre order {n}"),
    };
    cell.get_or_init(|| {
        let rule = GaussLegendre::new(n.try_into().expect("nonzero order"));
        let mut v: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    })
}

/// Values that can be accumulated by a quadrature rule.
pub trait QuadValue: Copy + Add<Output = Self> + Mul<f64, Output = Self> + Send + Sync {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub converged: bool,
    pub panels: usize,
}

/// Tolerances and panel limits for [`integrate_1d`] and [`integrate_box`].
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_panels: usize,
    pub max_panels: usize,
    pub order: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-14, initial_panels: 4, max_panels: 1024, order: 16 }
    }
}

pub fn composite_1d<T: QuadValue>(f: &dyn Fn(f64) -> T, a: f64, b: f64, panels: usize, order: usize) -> T {
    let rule = gl_rule(order);
    let h = (b - a) / panels as f64;
    let mut acc = T::zero();
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mut s = T::zero();
        for &(x, w) in rule {
            s = s + f(lo + 0.5 * h * (x + 1.0)) * w;
        }
        acc = acc + s * (0.5 * h);
    }
    acc
}

pub fn integrate_1d<T: QuadValue>(f: &dyn Fn(f64) -> T, a: f64, b: f64, cfg: &QuadConfig) -> QuadResult<T> {
    if !(b > a) {
        return QuadResult { value: T::zero(), converged: true, panels: 0 };
    }
    let mut panels = cfg.initial_panels.max(1);
    let mut prev = composite_1d(f, a, b, panels, cfg.order);
    loop {
        let next_panels = panels * 2;
        let cur = composite_1d(f, a, b, next_panels, cfg.order);
        let diff = (cur + prev * -1.0).magnitude();
        if diff <= cfg.abs_tol.max(cfg.rel_tol * cur.magnitude()) {
            return QuadResult { value: cur, converged: true, panels: next_panels };
        }
        if next_panels >= cfg.max_panels {
            return QuadResult { value: cur, converged: false, panels: next_panels };
        }
        panels = next_panels;
        prev = cur;
    }
}

/// Tensor composite rule over the box `[lo, hi]` with `panels` panels per axis.
pub fn composite_box<T: QuadValue>(f: &(dyn Fn(&[f64]) -> T + Sync), lo: &[f64], hi: &[f64], panels: usize, order: usize) -> T {
    let d = lo.len();
    let rule = gl_rule(order);
    let per_axis = panels * order;
    let mut nodes: Vec<Vec<(f64, f64)>> = Vec::with_capacity(d);
    for i in 0..d {
        let h = (hi[i] - lo[i]) / panels as f64;
        let mut ax = Vec::with_capacity(per_axis);
        for p in 0..panels {
            let a = lo[i] + p as f64 * h;
            for &(x, w) in rule {
                ax.push((a + 0.5 * h * (x + 1.0), 0.5 * h * w));
            }
        }
        nodes.push(ax);
    }
    if d == 0 {
        return f(&[]);
    }
    // Sum slab by slab along the first axis so large boxes parallelize.
    use rayon::prelude::*;
    let slabs: Vec<T> = nodes[0]
        .par_iter()
        .map(|&(x0, w0)| {
            let mut idx = vec![0usize; d];
            let mut pt = vec![0.0; d];
            pt[0] = x0;
            let mut acc = T::zero();
            loop {
                let mut w = w0;
                for i in 1..d {
                    pt[i] = nodes[i][idx[i]].0;
                    w *= nodes[i][idx[i]].1;
                }
                acc = acc + f(&pt) * w;
                let mut i = 1;
                loop {
                    if i >= d {
                        return acc;
                    }
                    idx[i] += 1;
                    if idx[i] < per_axis {
                        break;
                    }
                    idx[i] = 0;
                    i += 1;
                }
            }
        })
        .collect();
    slabs.into_iter().fold(T::zero(), |a, b| a + b)
}

pub fn integrate_box<T: QuadValue>(f: &(dyn Fn(&[f64]) -> T + Sync), lo: &[f64], hi: &[f64], cfg: &QuadConfig) -> QuadResult<T> {
    if lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
        return QuadResult { value: T::zero(), converged: true, panels: 0 };
    }
    let mut panels = cfg.initial_panels.max(1);
    let mut prev = composite_box(f, lo, hi, panels, cfg.order);
    loop {
        let next_panels = panels * 2;
        let cur = composite_box(f, lo, hi, next_panels, cfg.order);
        let diff = (cur + prev * -1.0).magnitude();
        if diff <= cfg.abs_tol.max(cfg.rel_tol * cur.magnitude()) {
            return QuadResult { value: cur, converged: true, panels: next_panels };
        }
        if next_panels >= cfg.max_panels {
            return QuadResult { value: cur, converged: false, panels: next_panels };
        }
        panels = next_panels;
        prev = cur;
    }
}

/// Integral of `f` over the open ball `center + radius·B₁`, in hyperspherical
/// coordinates for d ≥ 2.
pub fn integrate_ball(f: &(dyn Fn(&[f64]) -> f64 + Sync), center: &[f64], radius: f64, cfg: &QuadConfig) -> QuadResult<f64> {
    let d = center.len();
    if d == 1 {
        return integrate_1d(&|x| f(&[x]), center[0] - radius, center[0] + radius, cfg);
    }
    let g = |p: &[f64]| {
        let r = p[0];
        let mut x = vec![0.0; d];
        let mut sprod = 1.0;
        let mut jac = r.powi(d as i32 - 1);
        for i in 0..d - 1 {
            let t = p[i + 1];
            x[i] = center[i] + r * sprod * t.cos();
            if i < d - 2 {
                jac *= t.sin().powi((d - 2 - i) as i32);
            }
            sprod *= t.sin();
        }
        x[d - 1] = center[d - 1] + r * sprod;
        f(&x) * jac
    };
    let mut lo = vec![0.0; d];
    let mut hi = vec![std::f64::consts::PI; d];
    hi[0] = radius;
    hi[d - 1] = std::f64::consts::TAU;
    lo[0] = 0.0;
    integrate_box(&g, &lo, &hi, cfg)
}

/// Volume of the unit ball in R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    let df = d as f64;
    std::f64::consts::PI.powf(df / 2.0) / gamma_half_int(d + 2)
}

/// Γ(n/2) for positive integers n.
pub fn gamma_half_int(n: usize) -> f64 {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    if n % 2 == 0 {
        (1..n / 2).map(|k| k as f64).product()
    } else {
        let mut v = sqrt_pi;
        let mut x = 0.5;
        while x < n as f64 / 2.0 - 0.25 {
            v *= x;
            x += 1.0;
        }
        v
    }
}

/// Surface area of the unit sphere S^{d-1}.
pub fn unit_sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half_int(d)
}
