//! Sampled checks of the admissibility hypotheses: moderateness,
//! submultiplicativity, derivative bounds for φ_τ, and weak admissibility of
//! radial profiles. These are falsification tools; a pass means no violation
//! was found on the grid.

use crate::error::{Error, Result};
use crate::util;
use crate::warpcore::{ControlWeight, RadialComponent, SigmaFamily, Warp};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Safety factor applied to every fitted constant.
pub const SAFETY: f64 = 1.05;

/// Log-spaced radial net times a deterministic angular net, plus the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub radial: usize,
    pub angular: usize,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { radial: 64, angular: 16, r_min: 1e-2, r_max: 10.0 }
    }
}

impl GridSpec {
    pub fn coarse() -> Self {
        Self { radial: 8, angular: 8, r_min: 1e-2, r_max: 10.0 }
    }

    pub fn points(&self, d: usize) -> Vec<Vec<f64>> {
        let dirs = util::sphere_directions(d, self.angular);
        let mut out = vec![vec![0.0; d]];
        let n = self.radial.max(1);
        for i in 0..n {
            let r = if n == 1 { self.r_max } else { self.r_min * (self.r_max / self.r_min).powf(i as f64 / (n - 1) as f64) };
            for u in &dirs {
                out.push(util::scale(u, r));
            }
        }
        out
    }
}

/// Separate nets for the base point τ and the offset υ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGrid {
    pub base: GridSpec,
    pub offset: GridSpec,
}

impl Default for PairGrid {
    fn default() -> Self {
        Self { base: GridSpec::coarse(), offset: GridSpec::default() }
    }
}

impl PairGrid {
    pub fn uniform(spec: GridSpec) -> Self {
        Self { base: spec, offset: spec }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offender {
    pub point: Vec<f64>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub condition: String,
    pub grid: String,
    pub worst_ratio: f64,
    pub constants: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub worst_points: Vec<Offender>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl AdmissibilityReport {
    fn new(condition: &str, grid: String, mut offenders: Vec<Offender>, tolerance: f64) -> Self {
        offenders.sort_by(|a, b| b.ratio.total_cmp(&a.ratio));
        let worst = offenders.first().map_or(0.0, |o| o.ratio);
        offenders.truncate(5);
        Self {
            condition: condition.into(),
            grid,
            worst_ratio: worst,
            constants: BTreeMap::new(),
            tolerance,
            pass: worst <= 1.0 + tolerance,
            worst_points: offenders,
            notes: Vec::new(),
        }
    }
}

fn describe(g: &PairGrid) -> String {
    format!(
        "base {}x{} r<={}, offset {}x{} r<={}",
        g.base.radial, g.base.angular, g.base.r_max, g.offset.radial, g.offset.angular, g.offset.r_max
    )
}

type Field<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

fn positive(f: Field, x: &[f64]) -> Result<f64> {
    let v = f(x);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonPositive { value: v, at: x.to_vec() })
    }
}

/// max over pairs of f(τ+υ) / (v(υ)·f(τ)).
pub fn check_moderate(f: Field, v: Field, d: usize, grid: &PairGrid, tol: f64) -> Result<AdmissibilityReport> {
    let taus = grid.base.points(d);
    let ups = grid.offset.points(d);
    for p in taus.iter().chain(&ups) {
        positive(f, p)?;
        positive(v, p)?;
    }
    let per_tau: Result<Vec<Vec<Offender>>> = taus
        .par_iter()
        .map(|t| {
            let ft = f(t);
            ups.iter()
                .map(|u| {
                    let s = util::add(t, u);
                    let fs = positive(f, &s)?;
                    let mut point = t.clone();
                    point.extend_from_slice(u);
                    Ok(Offender { point, ratio: fs / (v(u) * ft) })
                })
                .collect()
        })
        .collect();
    let all: Vec<Offender> = per_tau?.into_iter().flatten().collect();
    Ok(AdmissibilityReport::new("moderate", describe(grid), all, tol))
}

/// max over pairs of v(τ+υ) / (v(τ)·v(υ)). A vanishing sample yields an
/// infinite ratio (a failed check) rather than an error.
pub fn check_submultiplicative(v: Field, d: usize, grid: &PairGrid, tol: f64) -> Result<AdmissibilityReport> {
    let taus = grid.base.points(d);
    let ups = grid.offset.points(d);
    let mut all = Vec::with_capacity(taus.len() * ups.len());
    for t in &taus {
        for u in &ups {
            let (a, b, c) = (v(t), v(u), v(&util::add(t, u)));
            if a < 0.0 || b < 0.0 || c < 0.0 || a.is_nan() || b.is_nan() || c.is_nan() {
                return Err(Error::NonPositive { value: a.min(b).min(c), at: t.clone() });
            }
            let ratio = if a * b == 0.0 { f64::INFINITY } else { c / (a * b) };
            let mut point = t.clone();
            point.extend_from_slice(u);
            all.push(Offender { point, ratio });
        }
    }
    Ok(AdmissibilityReport::new("submultiplicative", describe(grid), all, tol))
}

/// All multi-indices α ∈ N^d with |α| ≤ k, ordered by total degree.
pub fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=k {
        let mut cur = vec![0usize; d];
        fill(&mut out, &mut cur, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, i: usize, left: usize) {
    if i + 1 == cur.len() {
        cur[i] = left;
        out.push(cur.clone());
        return;
    }
    for a in (0..=left).rev() {
        cur[i] = a;
        fill(out, cur, i + 1, left - a);
    }
}

fn stencil(n: usize) -> Vec<(f64, f64)> {
    let mut binom = 1.0;
    (0..=n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let s = (n as f64 / 2.0 - j as f64, sign * binom);
            binom = binom * (n - j) as f64 / (j + 1) as f64;
            s
        })
        .collect()
}

/// ∂^α F(x) by nested central differences with step ε^{1/(|α|+2)}·(1+|x|).
pub fn fd_partial(f: &dyn Fn(&[f64]) -> DMatrix<f64>, x: &[f64], alpha: &[usize]) -> DMatrix<f64> {
    let order: usize = alpha.iter().sum();
    if order == 0 {
        return f(x);
    }
    let h = f64::EPSILON.powf(1.0 / (order as f64 + 2.0)) * (1.0 + util::norm(x));
    let axes: Vec<(usize, Vec<(f64, f64)>)> = alpha.iter().enumerate().filter(|(_, &a)| a > 0).map(|(i, &a)| (i, stencil(a))).collect();
    let mut idx = vec![0usize; axes.len()];
    let mut acc: Option<DMatrix<f64>> = None;
    loop {
        let mut p = x.to_vec();
        let mut w = 1.0;
        for (j, (axis, st)) in axes.iter().enumerate() {
            p[*axis] += st[idx[j]].0 * h;
            w *= st[idx[j]].1;
        }
        let v = f(&p) * w;
        acc = Some(match acc {
            Some(a) => a + v,
            None => v,
        });
        let mut j = 0;
        loop {
            if j == axes.len() {
                return acc.unwrap() / h.powi(order as i32);
            }
            idx[j] += 1;
            if idx[j] < axes[j].1.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

struct PhiScan {
    upper: Vec<Offender>,
    lower: Vec<Offender>,
    non_finite: usize,
}

fn scan_phi(warp: &Warp, shape: &(dyn Fn(&[f64]) -> f64 + Sync), k: usize, grid: &PairGrid) -> PhiScan {
    let d = warp.dim();
    let taus = grid.base.points(d);
    let ups = grid.offset.points(d);
    let alphas = multi_indices(d, k);
    let parts: Vec<PhiScan> = taus
        .par_iter()
        .map(|t| {
            let mut scan = PhiScan { upper: Vec::new(), lower: Vec::new(), non_finite: 0 };
            let a_inv = match warp.inv_jacobian(t).try_inverse() {
                Some(m) => m,
                None => {
                    scan.non_finite += 1;
                    return scan;
                }
            };
            for u in &ups {
                let s = util::add(t, u);
                let vu = shape(u);
                let a_of = |p: &[f64]| warp.inv_jacobian(p);
                let mut worst = 0.0f64;
                let mut bad = false;
                for alpha in &alphas {
                    let da = fd_partial(&a_of, &s, alpha);
                    let phi = (&a_inv * da).transpose();
                    if phi.iter().any(|x| !x.is_finite()) {
                        bad = true;
                        continue;
                    }
                    worst = worst.max(util::op_norm(&phi) / vu);
                    if alpha.iter().all(|&a| a == 0) {
                        let (smin, _) = util::singular_extremes(&phi);
                        let mut point = t.clone();
                        point.extend_from_slice(u);
                        scan.lower.push(Offender { point, ratio: 1.0 / (smin * vu) });
                    }
                }
                if bad {
                    scan.non_finite += 1;
                }
                let mut point = t.clone();
                point.extend_from_slice(u);
                scan.upper.push(Offender { point, ratio: worst });
            }
            scan
        })
        .collect();
    let mut out = PhiScan { upper: Vec::new(), lower: Vec::new(), non_finite: 0 };
    for p in parts {
        out.upper.extend(p.upper);
        out.lower.extend(p.lower);
        out.non_finite += p.non_finite;
    }
    out
}

/// max over grid pairs and |α| ≤ k of ‖∂^α φ_τ(υ)‖ / v₀(υ), together with the
/// lower bound ratio 1/(σ_min(φ_τ(υ))·v₀(υ)).
pub fn check_phi_derivative_bound(warp: &Warp, v0: &ControlWeight, k: usize, grid: &PairGrid, tol: f64) -> AdmissibilityReport {
    let shape = |u: &[f64]| v0.eval(u);
    let scan = scan_phi(warp, &shape, k, grid);
    let lower_worst = scan.lower.iter().fold(0.0f64, |m, o| m.max(o.ratio));
    let mut all = scan.upper;
    all.extend(scan.lower);
    let mut rep = AdmissibilityReport::new(&format!("phi_derivative_bound(k={k})"), describe(grid), all, tol);
    rep.constants.insert("v0_constant".into(), v0.constant());
    rep.constants.insert("lower_bound_ratio".into(), lower_worst);
    if scan.non_finite > 0 {
        rep.pass = false;
        rep.notes.push(format!("{} stencils produced non-finite values", scan.non_finite));
    }
    rep
}

/// Smallest constant c ≥ 1 (times the safety factor) making the φ_τ bounds
/// hold on the grid for the given family.
pub fn fit_control_weight(warp: &Warp, family: &ControlWeight, k: usize, grid: &PairGrid) -> ControlWeight {
    let unit = family.with_constant(1.0);
    let shape = |u: &[f64]| unit.eval(u);
    let scan = scan_phi(warp, &shape, k, grid);
    let worst = scan.upper.iter().chain(&scan.lower).fold(0.0f64, |m, o| m.max(o.ratio));
    unit.with_constant((SAFETY * worst).max(1.0))
}

/// Shape of the control weight u in weak admissibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum UShape {
    /// u(ξ) = e^ξ.
    Exponential,
    /// u(ξ) = (1+ξ)^a.
    Polynomial { a: f64 },
}

impl UShape {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            UShape::Exponential => x.exp(),
            UShape::Polynomial { a } => (1.0 + x).powf(a),
        }
    }

    pub fn default_for(sigma: &SigmaFamily) -> Self {
        match *sigma {
            SigmaFamily::Power { p } => UShape::Polynomial { a: (p - 1.0).abs() },
            _ => UShape::Exponential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakConfig {
    pub t_max: f64,
    pub points: usize,
    pub u: UShape,
    pub c0_min: f64,
    pub c1_max: f64,
    pub u_max: f64,
}

impl WeakConfig {
    pub fn for_sigma(sigma: &SigmaFamily) -> Self {
        Self { t_max: 20.0, points: 256, u: UShape::default_for(sigma), c0_min: 0.25, c1_max: 10.0, u_max: 1e3 }
    }
}

/// Weak admissibility of a profile given through its inverse ς∗ and the
/// derivatives ς∗^{(m)}, on [δ, t_max].
pub fn check_weak_admissibility_with(
    inv_deriv: &(dyn Fn(usize, f64) -> f64 + Sync),
    delta: f64,
    k: usize,
    cfg: &WeakConfig,
) -> Result<AdmissibilityReport> {
    if !(delta > 0.0 && cfg.t_max > delta && cfg.points >= 2) {
        return Err(Error::InvalidParameter("weak admissibility needs 0 < delta < t_max and at least two points".into()));
    }
    let xs: Vec<f64> = (0..cfg.points).map(|i| delta + (cfg.t_max - delta) * i as f64 / (cfg.points - 1) as f64).collect();
    let inv: Vec<f64> = xs.iter().map(|&x| inv_deriv(0, x)).collect();
    let d1: Vec<f64> = xs.iter().map(|&x| inv_deriv(1, x)).collect();
    for i in 1..xs.len() {
        if !(inv[i] > inv[i - 1]) {
            return Err(Error::NotIncreasing(xs[i]));
        }
    }
    let mut c0 = f64::INFINITY;
    let mut c1 = 0.0f64;
    let mut c0_at = delta;
    let mut c1_at = delta;
    for i in 0..xs.len() {
        let lo = d1[i] * xs[i] / inv[i];
        let hi = d1[i] / inv[i];
        if lo < c0 {
            c0 = lo;
            c0_at = xs[i];
        }
        if hi > c1 {
            c1 = hi;
            c1_at = xs[i];
        }
    }
    let c0 = c0 / SAFETY;
    let c1 = c1 * SAFETY;

    // Moderateness of ς∗(ξ)/ξ and the higher-derivative bound, both against u.
    let tilde: Vec<f64> = inv.iter().zip(&xs).map(|(s, x)| s / x).collect();
    let derivs: Vec<Vec<f64>> = (1..=k + 1).map(|m| xs.iter().map(|&x| inv_deriv(m, x).abs()).collect()).collect();
    let (mut u_tilde, mut u_deriv) = (0.0f64, 0.0f64);
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            let u = cfg.u.eval((xs[i] - xs[j]).abs());
            u_tilde = u_tilde.max(tilde[i] / (tilde[j] * u));
            for dm in &derivs {
                u_deriv = u_deriv.max(dm[i] / (d1[j] * u));
            }
        }
    }
    let u_tilde = u_tilde * SAFETY;
    let u_deriv = u_deriv * SAFETY;
    let finite = [c0, c1, u_tilde, u_deriv].iter().all(|v| v.is_finite());
    let ratios = [cfg.c0_min / c0, c1 / cfg.c1_max, u_tilde / cfg.u_max, u_deriv / cfg.u_max];
    let offenders = vec![
        Offender { point: vec![c0_at], ratio: ratios[0] },
        Offender { point: vec![c1_at], ratio: ratios[1] },
        Offender { point: vec![], ratio: ratios[2] },
        Offender { point: vec![], ratio: ratios[3] },
    ];
    let mut rep = AdmissibilityReport::new(
        &format!("weak_admissibility(k={k})"),
        format!("{} points on [{delta}, {}]", cfg.points, cfg.t_max),
        offenders,
        0.0,
    );
    rep.pass = rep.pass && finite;
    rep.constants.insert("C0".into(), c0);
    rep.constants.insert("C1".into(), c1);
    rep.constants.insert("u_tilde".into(), u_tilde);
    rep.constants.insert("u_derivative".into(), u_deriv);
    Ok(rep)
}

/// Weak admissibility of a built-in profile. Also reports the sandwich
/// C₀·ρ̃∗ ≤ ρ∗' ≤ C₁·(1+ξ)·ρ̃∗ for its slow-start version with ε = δ.
pub fn check_weak_admissibility(sigma: &SigmaFamily, delta: f64, k: usize, cfg: &WeakConfig) -> Result<AdmissibilityReport> {
    let mut rep = check_weak_admissibility_with(&|m, t| sigma.inverse_deriv(m, t), delta, k, cfg)?;
    if let Ok(rho) = RadialComponent::slow_start(*sigma, delta, None, Default::default()) {
        let (c0, c1) = radial_sandwich(&rho, cfg.t_max, cfg.points);
        rep.constants.insert("rho_C0".into(), c0);
        rep.constants.insert("rho_C1".into(), c1);
    }
    Ok(rep)
}

/// Fitted (C₀, C₁) with C₀·ρ̃∗(ξ) ≤ ρ∗'(ξ) ≤ C₁·(1+ξ)·ρ̃∗(ξ) on (0, t_max].
pub fn radial_sandwich(rho: &RadialComponent, t_max: f64, points: usize) -> (f64, f64) {
    let mut c0 = f64::INFINITY;
    let mut c1 = 0.0f64;
    for i in 1..=points {
        let x = t_max * i as f64 / points as f64;
        let d1 = rho.inv_d1(x);
        let tl = rho.inv_tilde(x);
        c0 = c0.min(d1 / tl);
        c1 = c1.max(d1 / ((1.0 + x) * tl));
    }
    (c0 / SAFETY, c1 * SAFETY)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PairGrid {
        PairGrid { base: GridSpec { radial: 6, angular: 6, r_min: 1e-2, r_max: 10.0 }, offset: GridSpec { radial: 16, angular: 8, r_min: 1e-2, r_max: 10.0 } }
    }

    #[test]
    fn moderate_examples() {
        let log = Warp::log();
        let w = |t: &[f64]| log.weight(t);
        let v = |t: &[f64]| util::norm(t).exp();
        assert!(check_moderate(&w, &v, 1, &small(), 1e-12).unwrap().pass);
        let one = |_: &[f64]| 1.0;
        let r = check_moderate(&one, &one, 2, &small(), 0.0).unwrap();
        assert!(r.pass && r.worst_ratio == 1.0);
        let neg = |_: &[f64]| -1.0;
        assert!(check_moderate(&neg, &one, 1, &small(), 0.0).is_err());
    }

    #[test]
    fn submultiplicative_examples() {
        let poly = |t: &[f64]| 1.0 + util::norm(t);
        assert!(check_submultiplicative(&poly, 2, &small(), 1e-12).unwrap().pass);
        let exp = |t: &[f64]| util::norm(t).exp();
        assert!(check_submultiplicative(&exp, 2, &small(), 1e-12).unwrap().pass);
        let bad = |t: &[f64]| util::norm(t);
        assert!(!check_submultiplicative(&bad, 1, &small(), 1e-12).unwrap().pass);
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(1, 3).len(), 4);
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert_eq!(multi_indices(3, 2).len(), 10);
    }

    #[test]
    fn fd_partial_mixed() {
        let f = |x: &[f64]| DMatrix::from_element(1, 1, x[0] * x[0] * x[1].sin());
        let v = fd_partial(&f, &[0.7, 0.3], &[1, 1]);
        assert!((v[(0, 0)] - 2.0 * 0.7 * 0.3f64.cos()).abs() < 1e-6);
        let v2 = fd_partial(&f, &[0.7, 0.3], &[2, 0]);
        assert!((v2[(0, 0)] - 2.0 * 0.3f64.sin()).abs() < 1e-6);
    }

    #[test]
    fn phi_bound_identity_and_log() {
        let id = Warp::identity(2).unwrap();
        let r = check_phi_derivative_bound(&id, &ControlWeight::Constant { c: 1.0 }, 2, &small(), 1e-6);
        assert!(r.pass, "{r:?}");
        let log = Warp::log();
        let r = check_phi_derivative_bound(&log, &ControlWeight::Polynomial { c: 1.0, a: 0.0 }.with_constant(1.0), 1, &small(), 1e-6);
        // e^υ is not bounded by a constant
        assert!(!r.pass);
        let v0 = ControlWeight::Exponential { c: 1.0 };
        assert!(check_phi_derivative_bound(&log, &v0, 1, &small(), 1e-6).pass);
    }

    #[test]
    fn weak_log_constants() {
        let s = SigmaFamily::Log;
        let rep = check_weak_admissibility(&s, 1.0, 2, &WeakConfig::for_sigma(&s)).unwrap();
        assert!(rep.pass);
        let c0 = rep.constants["C0"];
        let c1 = rep.constants["C1"];
        assert!(c0 >= 0.95);
        let bound = SAFETY / (1.0 - (-1f64).exp());
        assert!(c1 <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn weak_power_passes_and_expsquare_fails() {
        let p = SigmaFamily::Power { p: 2.0 };
        assert!(check_weak_admissibility(&p, 1.0, 2, &WeakConfig::for_sigma(&p)).unwrap().pass);
        let e = SigmaFamily::ExpSquare;
        assert!(!check_weak_admissibility(&e, 1.0, 2, &WeakConfig::for_sigma(&e)).unwrap().pass);
    }
}
