use num_complex::Complex64;
use proptest::prelude::*;
use warpframe::coeffspaces::{lpq_norm, MixedNormSpec};
use warpframe::covering::{ellipsoids_intersect, Covering};
use warpframe::io::{read_signal, write_signal};
use warpframe::kernels::{am_norm, bm_norm, KernelMatrix, LambdaGrid};
use warpframe::presets::Preset;
use warpframe::transform::{signal_inner, signal_norm, Coefficients, FreqGrid, Prototype, Transform};
use warpframe::util;
use warpframe::warpcore::projection_split;
use warpframe::{ControlWeight, Mollifier, RadialComponent, SigmaFamily, Warp};

fn radial(sigma: SigmaFamily, d: usize) -> Warp {
    Warp::radial(RadialComponent::slow_start(sigma, 1.0, None, Mollifier::Bump).unwrap(), d).unwrap()
}

fn vec_in(d: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, d)
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

fn ragged() -> impl Strategy<Value = Vec<Vec<Complex64>>> {
    prop::collection::vec(prop::collection::vec(complex(), 1..6), 1..5)
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(f64::INFINITY), 1.0..6.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn radial_warps_invert(d in 1usize..4, x in vec_in(3, 30.0), log in any::<bool>()) {
        let sigma = if log { SigmaFamily::Log } else { SigmaFamily::Power { p: 2.0 } };
        let w = radial(sigma, d);
        let xi = &x[..d];
        let back = w.inverse(&w.forward(xi));
        prop_assert!(util::norm(&util::sub(&back, xi)) <= 1e-10 * util::norm(xi).max(1.0));
    }

    #[test]
    fn weight_is_positive_jacobian_determinant(tau in vec_in(2, 3.0), which in 0usize..3) {
        let w = match which {
            0 => radial(SigmaFamily::Log, 2),
            1 => radial(SigmaFamily::Power { p: 3.0 }, 2),
            _ => Warp::exotic2d(),
        };
        let wt = w.weight(&tau);
        prop_assert!(wt > 0.0);
        let det = w.inv_jacobian(&tau).determinant();
        prop_assert!((det - wt).abs() <= 1e-9 * wt);
    }

    #[test]
    fn radial_profile_is_odd_and_increasing(a in -15.0..15.0f64, b in -15.0..15.0f64, log in any::<bool>()) {
        let sigma = if log { SigmaFamily::Log } else { SigmaFamily::Power { p: 2.0 } };
        let rho = RadialComponent::slow_start(sigma, 1.0, None, Mollifier::Bump).unwrap();
        prop_assert_eq!(rho.rho(-a), -rho.rho(a));
        if a < b {
            prop_assert!(rho.rho(a) < rho.rho(b));
        }
        prop_assert!((rho.inv(rho.rho(a)) - a).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn projection_split_is_orthogonal(xi in vec_in(4, 5.0), eta in vec_in(4, 5.0)) {
        prop_assume!(util::norm(&xi) > 1e-6);
        let (par, perp) = projection_split(&xi, &eta).unwrap();
        let sum = util::add(&par, &perp);
        prop_assert!(util::norm(&util::sub(&sum, &eta)) <= 1e-12 * util::norm(&eta).max(1.0));
        prop_assert!(util::dot(&perp, &xi).abs() <= 1e-12 * util::norm(&xi) * util::norm(&eta).max(1.0));
    }

    #[test]
    fn control_weights_are_submultiplicative(a in vec_in(3, 8.0), b in vec_in(3, 8.0), c in 1.0..50.0f64, s in 0.0..4.0f64) {
        for v in [ControlWeight::Constant { c }, ControlWeight::Polynomial { c, a: s }, ControlWeight::Exponential { c }] {
            let lhs = v.eval(&util::add(&a, &b));
            prop_assert!(lhs <= v.eval(&a) * v.eval(&b) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn lpq_is_a_norm(c in ragged(), p in exponent(), q in exponent(), s in -3.0..3.0f64) {
        let spec = MixedNormSpec::new(p, q).unwrap();
        let n = lpq_norm(&c, None, spec).unwrap();
        let scaled: Vec<Vec<Complex64>> = c.iter().map(|r| r.iter().map(|v| v * s).collect()).collect();
        prop_assert!((lpq_norm(&scaled, None, spec).unwrap() - s.abs() * n).abs() <= 1e-12 * (1.0 + n));
        let twice: Vec<Vec<Complex64>> = c.iter().map(|r| r.iter().map(|v| v * 2.0).collect()).collect();
        let rev: Vec<Vec<Complex64>> = c.iter().map(|r| r.iter().map(|v| -v * 0.5).collect()).collect();
        let sum: Vec<Vec<Complex64>> = twice.iter().zip(&rev).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        let tri = lpq_norm(&twice, None, spec).unwrap() + lpq_norm(&rev, None, spec).unwrap();
        prop_assert!(lpq_norm(&sum, None, spec).unwrap() <= tri * (1.0 + 1e-12));
        // ℓ^p spaces are nested: larger exponents give smaller norms.
        let sup = lpq_norm(&c, None, MixedNormSpec::new(f64::INFINITY, f64::INFINITY).unwrap()).unwrap();
        prop_assert!(sup <= n * (1.0 + 1e-12));
    }

    #[test]
    fn ellipsoid_test_is_symmetric(c in vec_in(2, 3.0), m1 in vec_in(4, 1.5), m2 in vec_in(4, 1.5)) {
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &m1) + nalgebra::DMatrix::identity(2, 2) * 2.0;
        let b = nalgebra::DMatrix::from_row_slice(2, 2, &m2) + nalgebra::DMatrix::identity(2, 2) * 2.0;
        prop_assert_eq!(ellipsoids_intersect(&[0.0, 0.0], &a, &c, &b), ellipsoids_intersect(&c, &b, &[0.0, 0.0], &a));
        prop_assert!(ellipsoids_intersect(&c, &a, &c, &b));
    }

    #[test]
    fn a_norm_never_exceeds_b_norm(vals in prop::collection::vec(0.0..2.0f64, 400), ny in 2usize..5, nw in 2usize..5, which in 0usize..2) {
        let warp = if which == 0 { Preset::Wavelet1d.build().unwrap() } else { Warp::identity(1).unwrap() };
        let grid = LambdaGrid::new(&warp, (-1.0, 1.0), ny, (-0.5, 0.5), nw).unwrap();
        let k = KernelMatrix::from_fn(&grid, &|i, a, j, b| vals[((i * 5 + a) * 5 + j) * 4 % 397 + b]);
        prop_assert!(am_norm(&k, &grid) <= bm_norm(&k, &grid));
        // Kernels depending only on the frequency pair have A = B up to rounding.
        let flat = KernelMatrix::from_fn(&grid, &|_, a, _, b| vals[a * 5 + b]);
        prop_assert!(am_norm(&flat, &grid) <= bm_norm(&flat, &grid));
    }

    #[test]
    fn preset_names_round_trip(d in 1usize..5, p in 1.0..4.0f64, which in 0usize..6) {
        let preset = match which {
            0 => Preset::Gabor { d },
            1 => Preset::Wavelet1d,
            2 => Preset::Alpha { d, p },
            3 => Preset::Exotic2d,
            4 => Preset::RadialLog { d },
            _ => Preset::Log,
        };
        prop_assert_eq!(Preset::parse(&preset.to_string()).unwrap(), preset);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn analysis_is_adjoint_to_synthesis(seed in any::<u64>(), delta in 0.3..1.2f64, n in 24usize..80) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let warp = Preset::Wavelet1d.build().unwrap();
        let grid = FreqGrid::new(vec![-5.0], vec![5.0], vec![n]).unwrap();
        let t = Transform::build(&warp, &Prototype::bump(1, 1.0).unwrap(), grid, delta).unwrap();
        let mut draw = || Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let f: Vec<Complex64> = (0..n).map(|_| draw()).collect();
        let mut d = Coefficients::zeros(&t.phase);
        for ch in d.channels.iter_mut() {
            for v in ch.iter_mut() {
                *v = draw();
            }
        }
        let lhs = t.analyze(&f).unwrap().inner(&d, &t.phase);
        let rhs = signal_inner(t.weights(), &f, &t.synthesize(&d).unwrap());
        let scale = signal_norm(t.weights(), &f) * d.inner(&d, &t.phase).re.sqrt();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * scale);
        let sf = t.frame_apply(&f).unwrap();
        let q = signal_inner(t.weights(), &sf, &f);
        prop_assert!(q.re >= 0.0 && q.im.abs() <= 1e-10 * q.re.max(1e-300));
    }

    #[test]
    fn covering_covers_its_extent(y in -1.0..1.0f64, om in -3.0..3.0f64, delta in prop_oneof![Just(0.25), Just(0.5), Just(1.0)]) {
        let warp = Preset::Wavelet1d.build().unwrap();
        let cov = Covering::build(&warp, delta, (vec![-3.0], vec![3.0]), (vec![-1.0], vec![1.0])).unwrap();
        prop_assert!(!cov.cells_containing(&[y], &[om]).is_empty());
        for i in 0..cov.len() {
            let w = cov.covering_weight(i);
            prop_assert!(w > 0.0 && w <= 1.0);
        }
    }

    #[test]
    fn signal_files_round_trip(vals in prop::collection::vec(complex(), 3..40), lo in -5.0..0.0f64, width in 0.5..10.0f64) {
        let grid = FreqGrid::new(vec![lo], vec![lo + width], vec![vals.len()]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for name in ["s.csv", "s.bin"] {
            let p = dir.path().join(name);
            write_signal(&p, &grid, &vals).unwrap();
            let (g, back) = read_signal(&p, None).unwrap();
            prop_assert_eq!(g, grid.clone());
            prop_assert_eq!(back, vals.clone());
        }
    }
}
