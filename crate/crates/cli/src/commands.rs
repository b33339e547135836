use crate::config as cfg;
use crate::{Common, Failure};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use std::path::Path;
use warpframe::admissibility::{check_moderate, check_phi_derivative_bound, check_submultiplicative, check_weak_admissibility, fit_control_weight, AdmissibilityReport, PairGrid, WeakConfig};
use warpframe::coeffspaces::lpq_norm;
use warpframe::covering::Covering;
use warpframe::io::{self, CoeffMeta};
use warpframe::kernels::{decay_sweep, DecayConfig, KernelSpec};
use warpframe::signals::{generate, SignalKind};
use warpframe::transform::{signal_norm, Coefficients, Transform};
use warpframe::{util, ControlWeight, Warp, WarpKind};

fn print_json<T: Serialize>(v: &T) -> Result<(), Failure> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Failure::Usage(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn fmt(x: f64) -> String {
    x.to_string()
}

fn transform(c: &Common) -> Result<Transform, Failure> {
    let w = cfg::warp(c)?;
    let theta = cfg::theta(c, w.dim())?;
    let grid = cfg::grid(c, &w)?;
    Ok(Transform::build(&w, &theta, grid, cfg::delta(c)?)?)
}

/// Probe points τ = t·(1,…,1)/√d for t in a fixed symmetric list.
fn probe_taus(d: usize) -> Vec<Vec<f64>> {
    let s = 1.0 / (d as f64).sqrt();
    [-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0].iter().map(|&t| vec![t * s; d]).collect()
}

pub fn warp_info(c: &Common) -> Result<(), Failure> {
    let out = cfg::output(c, false)?;
    let w = cfg::warp(c)?;
    let probes: Vec<_> = probe_taus(w.dim())
        .into_iter()
        .map(|tau| {
            let xi = w.inverse(&tau);
            let back = w.forward(&xi);
            json!({
                "tau": tau,
                "xi": xi,
                "w": w.weight(&tau),
                "roundtrip_residual": util::norm(&util::sub(&back, &tau)),
            })
        })
        .collect();
    let report = json!({
        "warp": cfg::warp_label(c),
        "name": w.name(),
        "d": w.dim(),
        "domain": w.domain(),
        "control": w.control(),
        "descriptor": w,
        "probes": probes,
    });
    println!("warp {} (d = {})", w.name(), w.dim());
    println!("{:>24} {:>24} {:>14}", "tau", "w(tau)", "residual");
    for p in report["probes"].as_array().expect("array") {
        let tau: Vec<String> = p["tau"].as_array().expect("tau").iter().map(|v| format!("{:.4}", v.as_f64().unwrap_or(f64::NAN))).collect();
        println!("{:>24} {:>24.12e} {:>14.3e}", tau.join(","), p["w"].as_f64().unwrap_or(f64::NAN), p["roundtrip_residual"].as_f64().unwrap_or(f64::NAN));
    }
    if let Some(path) = out {
        io::write_json(&path, &report)?;
    }
    Ok(())
}

fn parse_v0(s: &str) -> Result<ControlWeight, Failure> {
    let bad = || Failure::Usage(format!("--v0: expected const:c, poly:c:a or exp:c, got '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad);
    match parts.as_slice() {
        ["const", c] => Ok(ControlWeight::Constant { c: num(c)? }),
        ["exp", c] => Ok(ControlWeight::Exponential { c: num(c)? }),
        ["poly", c, a] => Ok(ControlWeight::Polynomial { c: num(c)?, a: num(a)? }),
        _ => Err(bad()),
    }
}

pub fn check(c: &Common, v0: Option<&str>, k: usize) -> Result<(), Failure> {
    let out = cfg::output(c, false)?;
    let w = cfg::warp(c)?;
    let tol = cfg::tol(c, 1e-9)?;
    let d = w.dim();
    let grid = PairGrid::default();
    let v0 = match v0 {
        Some(s) => parse_v0(s)?,
        None => match w.control() {
            Some(v) => *v,
            None => fit_control_weight(&w, &ControlWeight::Exponential { c: 1.0 }, k, &grid),
        },
    };
    let v = |u: &[f64]| v0.eval(u);
    let w0 = |u: &[f64]| v0.power(u, d);
    let weight = |t: &[f64]| w.weight(t);
    let mut reports: Vec<AdmissibilityReport> = vec![check_submultiplicative(&v, d, &PairGrid::uniform(grid.offset), tol)?];
    if v0.eval(&vec![0.0; d]) < 1.0 {
        let mut r = reports.pop().expect("report");
        r.pass = false;
        r.notes.push("control weight below 1 at the origin".into());
        reports.push(r);
    }
    reports.push(check_phi_derivative_bound(&w, &v0, k, &grid, tol));
    match check_moderate(&weight, &w0, d, &grid, tol) {
        Ok(r) => reports.push(r),
        Err(e @ warpframe::Error::NonPositive { .. }) => return Err(Failure::Check(e.to_string())),
        Err(e) => return Err(e.into()),
    }
    if let WarpKind::Radial { component } = &w.kind {
        let wc = WeakConfig::for_sigma(&component.sigma);
        reports.push(check_weak_admissibility(&component.sigma, component.epsilon, k, &wc)?);
    }
    println!("{:<28} {:>6} {:>14}", "condition", "pass", "worst ratio");
    for r in &reports {
        println!("{:<28} {:>6} {:>14.6e}", r.condition, r.pass, r.worst_ratio);
    }
    let bundle = json!({ "warp": cfg::warp_label(c), "control": v0, "reports": reports });
    if let Some(path) = out {
        io::write_json(&path, &bundle)?;
    }
    if reports.iter().all(|r| r.pass) {
        Ok(())
    } else {
        let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.condition.as_str()).collect();
        Err(Failure::Check(failed.join(", ")))
    }
}

pub fn gen_signal(c: &Common, kind: &str) -> Result<(), Failure> {
    let out = cfg::output(c, true)?.expect("required");
    let kind = SignalKind::parse(kind)?;
    let t = transform(c)?;
    let f = generate(kind, &t.phase, c.seed)?;
    io::write_signal(&out, &t.phase.grid, &f)?;
    print_json(&json!({ "samples": f.len(), "norm": signal_norm(t.weights(), &f), "out": out }))
}

/// Energy fraction of `f` on grid points touched by edge channels.
fn edge_fraction(t: &Transform, f: &[Complex64]) -> f64 {
    let mask = t.phase.interior_mask();
    let w = t.weights();
    let (mut edge, mut total) = (0.0, 0.0);
    for j in 0..f.len() {
        let e = w[j] * f[j].norm_sqr();
        total += e;
        if !mask[j] {
            edge += e;
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

fn warn_edges(t: &Transform, f: &[Complex64]) {
    let frac = edge_fraction(t, f);
    if frac > 1e-12 {
        let n = t.phase.channels.len() - t.phase.interior_channels();
        eprintln!(
            "warning: {:.3e} of the signal energy lies where {n} edge channels are truncated by the box; it is not faithfully represented",
            frac
        );
    }
}

fn load_signal(c: &Common, input: &Path, w: &Warp) -> Result<(warpframe::transform::FreqGrid, Vec<Complex64>), Failure> {
    let input = cfg::input(input)?;
    let raw = input.extension().is_some_and(|e| e == "bin");
    let hint = if raw && (c.freq_box.is_some() || c.n.is_some()) { Some(cfg::grid(c, w)?) } else { None };
    Ok(io::read_signal(&input, hint.as_ref())?)
}

pub fn analyze(c: &Common, input: &Path) -> Result<(), Failure> {
    let out = cfg::output(c, true)?.expect("required");
    let w = cfg::warp(c)?;
    let theta = cfg::theta(c, w.dim())?;
    let (grid, f) = load_signal(c, input, &w)?;
    grid.check_inside(&w)?;
    let t = Transform::build(&w, &theta, grid, cfg::delta(c)?)?;
    warn_edges(&t, &f);
    let coef = t.analyze(&f)?;
    io::write_coefficients(&out, &t, &coef)?;
    let cn = coef.inner(&coef, &t.phase).re.max(0.0).sqrt();
    print_json(&json!({
        "channels": t.phase.channels.len(),
        "edge_channels": t.phase.channels.len() - t.phase.interior_channels(),
        "coefficients": coef.len(),
        "signal_norm": signal_norm(t.weights(), &f),
        "coefficient_norm": cn,
    }))
}

fn load_coefficients(input: &Path) -> Result<(CoeffMeta, Transform, Coefficients), Failure> {
    let input = cfg::input(input)?;
    let meta = io::read_coefficient_meta(&input)?;
    let t = meta.transform()?;
    let coef = io::read_coefficients(&input, &t.phase)?;
    Ok((meta, t, coef))
}

pub fn synthesize(c: &Common, input: &Path, adjoint: bool, max_iter: usize) -> Result<(), Failure> {
    let out = cfg::output(c, true)?.expect("required");
    let tol = cfg::tol(c, 1e-10)?;
    let (_, t, coef) = load_coefficients(input)?;
    let (f, iterations, residual) = if adjoint {
        (t.synthesize(&coef)?, 0, 0.0)
    } else {
        let r = t.reconstruct(&coef, tol, max_iter)?;
        (r.signal, r.iterations, r.residual)
    };
    io::write_signal(&out, &t.phase.grid, &f)?;
    print_json(&json!({ "adjoint": adjoint, "iterations": iterations, "residual": residual, "norm": signal_norm(t.weights(), &f) }))
}

pub fn roundtrip(c: &Common, input: &Path, max_iter: usize) -> Result<(), Failure> {
    let out = cfg::output(c, false)?;
    let tol = cfg::tol(c, 1e-10)?;
    let w = cfg::warp(c)?;
    let theta = cfg::theta(c, w.dim())?;
    let (grid, f) = load_signal(c, input, &w)?;
    grid.check_inside(&w)?;
    let t = Transform::build(&w, &theta, grid, cfg::delta(c)?)?;
    warn_edges(&t, &f);
    let coef = t.analyze(&f)?;
    let r = t.reconstruct(&coef, tol, max_iter)?;
    let err: Vec<Complex64> = r.signal.iter().zip(&f).map(|(a, b)| a - b).collect();
    let norm = signal_norm(t.weights(), &f);
    let rel = if norm > 0.0 { signal_norm(t.weights(), &err) / norm } else { signal_norm(t.weights(), &err) };
    if let Some(path) = out {
        io::write_signal(&path, &t.phase.grid, &r.signal)?;
    }
    print_json(&json!({ "relative_error": rel, "iterations": r.iterations, "residual": r.residual }))
}

pub fn norms(c: &Common, input: &Path) -> Result<(), Failure> {
    let spec = cfg::mixed_norm(c)?;
    let s = cfg::kappa_exponent(c)?;
    let (_, t, coef) = load_coefficients(input)?;
    let kappa: Vec<Vec<f64>> = t
        .phase
        .channels
        .iter()
        .map(|ch| vec![(1.0 + util::norm(&ch.omega)).powf(s); ch.coeff_len()])
        .collect();
    let v = lpq_norm(&coef.channels, Some(&kappa), spec)?;
    print_json(&json!({ "p": c.p, "q": c.q, "kappa": c.kappa, "norm": v }))
}

pub fn covering_export(c: &Common, neighbors: bool) -> Result<(), Failure> {
    let out = cfg::output(c, true)?.expect("required");
    let w = cfg::warp(c)?;
    let d = w.dim();
    let cov = Covering::build(&w, cfg::delta(c)?, cfg::freq_box(c, &w)?, cfg::time_extent(c, d)?)?;
    let records = cov.records();
    let counts: Option<Vec<usize>> = neighbors.then(|| (0..cov.len()).map(|i| cov.neighbors(i).len()).collect());
    let axes = |p: &'static str| (1..=d).map(move |i| format!("{p}_{i}"));
    let mut header: Vec<String> = axes("l").chain(axes("k")).chain(axes("freq_center")).chain(axes("time_center")).collect();
    header.extend(["mu1", "mu2", "w_u"].map(String::from));
    if counts.is_some() {
        header.push("neighbors".into());
    }
    let rows = records.iter().enumerate().map(|(i, r)| {
        let mut row: Vec<String> = r.l.iter().map(i64::to_string).collect();
        row.extend(r.k.iter().map(i64::to_string));
        row.extend(r.freq_center.iter().copied().map(fmt));
        row.extend(r.time_center.iter().copied().map(fmt));
        row.extend([fmt(r.mu1), fmt(r.mu2), fmt(r.w_u)]);
        if let Some(n) = &counts {
            row.push(n[i].to_string());
        }
        row
    });
    io::write_csv(&out, &header, rows)?;
    let meta = json!({
        "kind": "covering",
        "warp": w,
        "delta": cov.delta,
        "cells": cov.len(),
        "neighbor_bound": w.control().map(|v0| cov.neighbor_bound(v0)),
        "records": records,
    });
    io::write_json(&io::sidecar(&out), &meta)?;
    print_json(&json!({ "cells": cov.len(), "frequency_cells": cov.freq.len() }))
}

pub fn frame_bounds(c: &Common, iterations: usize) -> Result<(), Failure> {
    let out = cfg::output(c, false)?;
    let w = cfg::warp(c)?;
    let theta = cfg::theta(c, w.dim())?;
    let grid = cfg::grid(c, &w)?;
    let mut rows = Vec::new();
    println!("delta,lower,upper,ratio,converged,iterations");
    for delta in cfg::delta_list(c)? {
        let t = Transform::build(&w, &theta, grid.clone(), delta)?;
        let fb = t.frame_bounds(iterations, c.seed)?;
        let row = vec![fmt(delta), fmt(fb.lower), fmt(fb.upper), fmt(fb.ratio), fb.converged.to_string(), fb.iterations.to_string()];
        println!("{}", row.join(","));
        rows.push(row);
    }
    if let Some(path) = out {
        let header = ["delta", "lower", "upper", "ratio", "converged", "iterations"].map(String::from);
        io::write_csv(&path, &header, rows)?;
        let meta = json!({ "kind": "frame_bounds", "warp": w, "theta": theta.name(), "grid": grid, "seed": c.seed, "iterations": iterations });
        io::write_json(&io::sidecar(&path), &meta)?;
    }
    Ok(())
}

pub fn kernel_decay(c: &Common, n_time: Option<usize>, n_freq: Option<usize>) -> Result<(), Failure> {
    let out = cfg::output(c, false)?;
    let w = cfg::warp(c)?;
    let theta = cfg::theta(c, w.dim())?;
    let mut dc = DecayConfig::default();
    if let Some(n) = n_time {
        dc.n_time = n;
    }
    if let Some(n) = n_freq {
        dc.n_freq = n;
    }
    if c.time_extent.is_some() {
        let (lo, hi) = cfg::time_extent(c, w.dim())?;
        dc.time = (lo[0], hi[0]);
    }
    if c.freq_box.is_some() {
        // Interpreted in warped coordinates for the truncated grid.
        let (lo, hi) = cfg::freq_box(c, &Warp::identity(w.dim())?)?;
        dc.tau = (lo[0], hi[0]);
    }
    if let Some(t) = c.tol {
        dc.rel_tol = cfg::tol(c, t)?;
    }
    let spec = KernelSpec::new(&w, &theta);
    let table = decay_sweep(&spec, &cfg::delta_list(c)?, &dc)?;
    let csv = table.to_csv();
    print!("{csv}");
    if let Some(path) = out {
        std::fs::write(&path, &csv)?;
        let meta = json!({ "kind": "kernel_decay", "warp": w, "theta": theta.name(), "config": dc, "delta0": table.delta0 });
        io::write_json(&io::sidecar(&path), &meta)?;
    }
    Ok(())
}
