//! Shared fixtures for the throughput benches.

use num_complex::Complex64;
use warpframe::presets::Preset;
use warpframe::signals::{generate, SignalKind};
use warpframe::transform::{FreqGrid, Prototype, Transform};

/// Wavelet-type transform on [-40, 40] with `n` samples and a random
/// band-interior signal.
pub fn wavelet_fixture(n: usize, delta: f64) -> (Transform, Vec<Complex64>) {
    let warp = Preset::Wavelet1d.build().expect("preset");
    let theta = Prototype::bump(1, 1.0).expect("window");
    let grid = FreqGrid::new(vec![-40.0], vec![40.0], vec![n]).expect("grid");
    let t = Transform::build(&warp, &theta, grid, delta).expect("transform");
    let f = generate(SignalKind::Random, &t.phase, 1).expect("signal");
    (t, f)
}

/// Gabor transform on [-6, 6]² with `n` samples per axis.
pub fn gabor2d_fixture(n: usize, delta: f64) -> (Transform, Vec<Complex64>) {
    let warp = Preset::Gabor { d: 2 }.build().expect("preset");
    let theta = Prototype::bump(2, 1.0).expect("window");
    let grid = FreqGrid::new(vec![-6.0; 2], vec![6.0; 2], vec![n; 2]).expect("grid");
    let t = Transform::build(&warp, &theta, grid, delta).expect("transform");
    let f = generate(SignalKind::Random, &t.phase, 2).expect("signal");
    (t, f)
}
