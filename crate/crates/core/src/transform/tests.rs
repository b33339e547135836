use super::*;
use crate::warpcore::{Mollifier, RadialComponent, SigmaFamily};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_signal(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
}

fn wavelet_warp() -> Warp {
    let rho = RadialComponent::slow_start(SigmaFamily::Log, 1.0, None, Mollifier::Bump).unwrap();
    Warp::radial(rho, 1).unwrap()
}

#[test]
fn identity_atom_at_origin_is_the_window() {
    let warp = Warp::identity(1).unwrap();
    let th = Prototype::gaussian(1).unwrap();
    let pts: Vec<Vec<f64>> = (0..21).map(|i| vec![-2.0 + 0.2 * i as f64]).collect();
    let g = atom_freq(&th, &warp, &[0.0], &pts).unwrap();
    for (p, v) in pts.iter().zip(g) {
        assert_eq!(v, th.eval(p));
    }
}

#[test]
fn log_atom_is_a_dilated_window() {
    let warp = Warp::log();
    let th = Prototype::bump(1, 1.0).unwrap();
    let om = 2.7;
    let pts: Vec<Vec<f64>> = (1..50).map(|i| vec![0.2 * i as f64]).collect();
    let g = atom_freq(&th, &warp, &[om], &pts).unwrap();
    for (p, v) in pts.iter().zip(g) {
        let expect = om.powf(-0.5) * th.eval(&[(p[0] / om).ln()]);
        assert!((v - expect).abs() < 1e-12);
    }
    assert!(atom_freq(&th, &warp, &[-1.0], &pts).is_err());
}

#[test]
fn gaussian_coefficients_match_closed_form() {
    // f̂ = e^{−π(ξ−a)²}, ĝ = e^{−π(ξ−ω)²}:
    // c(y) = 2^{−1/2} e^{−π(ω−a)²/2} e^{−πy²/2} e^{2πi y (ω+a)/2}.
    let warp = Warp::identity(1).unwrap();
    let th = Prototype::gaussian(1).unwrap();
    let grid = FreqGrid::new(vec![-9.0], vec![9.0], vec![361]).unwrap();
    let t = Transform::build(&warp, &th, grid, 0.5).unwrap();
    let a = 0.3;
    let f: Vec<Complex64> = t.phase.grid.points().iter().map(|p| c((-std::f64::consts::PI * (p[0] - a).powi(2)).exp(), 0.0)).collect();
    let coef = t.analyze(&f).unwrap();
    let pi = std::f64::consts::PI;
    let mut checked = 0;
    for (ch, vals) in t.phase.channels.iter().zip(&coef.channels) {
        if ch.tau[0].abs() > 3.0 {
            continue;
        }
        let om = ch.omega[0];
        for (p, v) in vals.iter().enumerate() {
            let y = ch.time_point(p)[0];
            if y.abs() > 4.0 {
                continue;
            }
            let expect = Complex64::from_polar(
                2f64.powf(-0.5) * (-pi * (om - a).powi(2) / 2.0).exp() * (-pi * y * y / 2.0).exp(),
                pi * y * (om + a),
            );
            assert!((v - expect).norm() < 1e-8, "om={om} y={y}: {v} vs {expect}");
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn analysis_matches_direct_double_sum_and_adjoint() {
    let warp = Warp::log();
    let th = Prototype::bump(1, 1.0).unwrap();
    let grid = FreqGrid::new(vec![0.5], vec![6.0], vec![48]).unwrap();
    let t = Transform::build(&warp, &th, grid, 0.7).unwrap();
    let f = random_signal(48, 1);
    let coef = t.analyze(&f).unwrap();
    let pts = t.phase.grid.points();
    let w = t.weights().to_vec();
    for (ch, vals) in t.phase.channels.iter().zip(&coef.channels) {
        let g = atom_freq(&th, &warp, &ch.omega, &pts).unwrap();
        for (p, v) in vals.iter().enumerate() {
            let y = ch.time_point(p)[0];
            let direct: Complex64 = (0..48).map(|j| f[j] * g[j] * w[j] * Complex64::from_polar(1.0, TAU * y * pts[j][0])).sum();
            assert!((v - direct).norm() < 1e-12 * (1.0 + direct.norm()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut d = Coefficients::zeros(&t.phase);
    for ch in d.channels.iter_mut() {
        for v in ch.iter_mut() {
            *v = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
    }
    let lhs = coef.inner(&d, &t.phase);
    let s = t.synthesize(&d).unwrap();
    let rhs = signal_inner(&w, &f, &s);
    let scale = signal_norm(&w, &f) * d.inner(&d, &t.phase).re.sqrt();
    assert!((lhs - rhs).norm() <= 1e-10 * scale);
}

#[test]
fn synthesis_of_zero_and_impulse() {
    let warp = Warp::identity(1).unwrap();
    let th = Prototype::bump(1, 1.0).unwrap();
    let grid = FreqGrid::new(vec![-3.0], vec![3.0], vec![61]).unwrap();
    let t = Transform::build(&warp, &th, grid, 0.5).unwrap();
    let z = t.synthesize(&Coefficients::zeros(&t.phase)).unwrap();
    assert!(z.iter().all(|v| v.norm() == 0.0));
    let mut e = Coefficients::zeros(&t.phase);
    let k = 5;
    e.channels[k][0] = c(1.0, 0.0);
    let s = t.synthesize(&e).unwrap();
    let ch = &t.phase.channels[k];
    let g = atom_freq(&th, &warp, &ch.omega, &t.phase.grid.points()).unwrap();
    for j in 0..s.len() {
        assert!((s[j] - c(ch.mu * g[j], 0.0)).norm() < 1e-13);
    }
}

#[test]
fn frame_operator_is_positive() {
    let warp = wavelet_warp();
    let th = Prototype::bump(1, 1.0).unwrap();
    let grid = FreqGrid::new(vec![-10.0], vec![10.0], vec![200]).unwrap();
    let t = Transform::build(&warp, &th, grid, 0.5).unwrap();
    assert!(t.frame_apply(&vec![c(0.0, 0.0); 200]).unwrap().iter().all(|v| v.norm() == 0.0));
    for seed in 0..5 {
        let f = random_signal(200, seed);
        let sf = t.frame_apply(&f).unwrap();
        let q = signal_inner(t.weights(), &sf, &f);
        assert!(q.re >= 0.0 && q.im.abs() < 1e-10 * q.re);
    }
}

#[test]
fn frame_bounds_agree_with_dense_eigenvalues() {
    let warp = Warp::identity(1).unwrap();
    let th = Prototype::bump(1, 1.0).unwrap();
    let n = 48;
    let grid = FreqGrid::new(vec![-4.0], vec![4.0], vec![n]).unwrap();
    let t = Transform::build(&warp, &th, grid, 0.35).unwrap();
    let mask = t.phase.interior_mask();
    let idx: Vec<usize> = (0..n).filter(|&j| mask[j]).collect();
    let w = t.weights();
    let m = idx.len();
    let mut mat = nalgebra::DMatrix::<Complex64>::zeros(m, m);
    for (b, &j) in idx.iter().enumerate() {
        let mut e = vec![c(0.0, 0.0); n];
        e[j] = c(1.0, 0.0);
        let s = t.frame_apply(&e).unwrap();
        for (a, &i) in idx.iter().enumerate() {
            mat[(a, b)] = s[i] * (w[i] / w[j]).sqrt();
        }
    }
    let eig = mat.symmetric_eigenvalues();
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(0.0, f64::max);
    let fb = t.frame_bounds(2000, 7).unwrap();
    assert!((fb.upper - hi).abs() < 1e-6 * hi, "{} vs {hi}", fb.upper);
    assert!((fb.lower - lo).abs() < 1e-6 * lo, "{} vs {lo}", fb.lower);
    assert!(fb.ratio >= 1.0 && fb.ratio <= 1.1, "{}", fb.ratio);
}

#[test]
fn tightness_identity_and_log() {
    let cfg = QuadConfig { rel_tol: 1e-10, max_panels: 512, ..Default::default() };
    let g = Prototype::gaussian(1).unwrap();
    let id = Warp::identity(1).unwrap();
    for x in [-2.0, 0.0, 3.3] {
        let v = tightness_profile(&g, &id, &[x], &cfg).unwrap();
        assert!((v.value - g.norm_sq()).abs() < 1e-6 * g.norm_sq());
    }
    let b = Prototype::bump(1, 1.0).unwrap();
    let log = Warp::log();
    for x in [0.1, 1.0, 25.0] {
        let v = tightness_profile(&b, &log, &[x], &cfg).unwrap();
        assert!(v.converged);
        assert!((v.value - b.norm_sq()).abs() < 1e-6 * b.norm_sq());
    }
    assert!(tightness_profile(&b, &log, &[-1.0], &cfg).is_err());
}

#[test]
fn reconstruct_round_trip_and_zero() {
    let warp = wavelet_warp();
    let th = Prototype::bump(1, 1.0).unwrap();
    let grid = FreqGrid::new(vec![-12.0], vec![12.0], vec![400]).unwrap();
    let t = Transform::build(&warp, &th, grid, 0.25).unwrap();
    let pts = t.phase.grid.points();
    let f: Vec<Complex64> = pts.iter().map(|p| Complex64::from_polar((-(p[0] - 1.0).powi(2) / 4.0).exp(), 3.0 * p[0])).collect();
    let coef = t.analyze(&f).unwrap();
    let r = t.reconstruct(&coef, 1e-12, 100).unwrap();
    let err: Vec<Complex64> = r.signal.iter().zip(&f).map(|(a, b)| a - b).collect();
    assert!(signal_norm(t.weights(), &err) <= 1e-8 * signal_norm(t.weights(), &f));
    let z = t.reconstruct(&Coefficients::zeros(&t.phase), 1e-12, 10).unwrap();
    assert!(z.signal.iter().all(|v| v.norm() == 0.0));
    assert!(matches!(t.reconstruct(&coef, 1e-14, 1), Err(Error::CgStagnation { .. })));
}

#[test]
fn modulation_shifts_coefficients() {
    let warp = Warp::identity(1).unwrap();
    let th = Prototype::bump(1, 1.0).unwrap();
    let grid = FreqGrid::new(vec![-4.0], vec![4.0], vec![81]).unwrap();
    let t = Transform::build(&warp, &th, grid, 0.5).unwrap();
    let f = random_signal(81, 9);
    let k = t.phase.channels.len() / 2;
    let ch = &t.phase.channels[k];
    let shift = 3i64;
    let y0 = shift as f64 * ch.steps[0];
    let pts = t.phase.grid.points();
    let g: Vec<Complex64> = f.iter().zip(&pts).map(|(v, p)| v * Complex64::from_polar(1.0, -TAU * y0 * p[0])).collect();
    let a = t.analyze(&f).unwrap();
    let b = t.analyze(&g).unwrap();
    for p in 0..ch.coeff_len() {
        let l = ch.ell(p)[0];
        let q = ch.position(&[l - shift]);
        assert!((b.channels[k][p] - a.channels[k][q]).norm() < 1e-12);
    }
}
