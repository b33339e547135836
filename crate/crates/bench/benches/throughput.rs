use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use std::hint::black_box;
use warpframe::covering::Covering;
use warpframe::presets::Preset;
use warpframe_bench::{gabor2d_fixture, wavelet_fixture};

fn transform(c: &mut Criterion) {
    let mut g = c.benchmark_group("wavelet1d");
    for n in [1024usize, 4096] {
        let (t, f) = wavelet_fixture(n, 0.25);
        let coef = t.analyze(&f).unwrap();
        g.throughput(Throughput::Elements(n as u64));
        g.bench_function(format!("analyze/{n}"), |b| b.iter(|| t.analyze(black_box(&f)).unwrap()));
        g.bench_function(format!("synthesize/{n}"), |b| b.iter(|| t.synthesize(black_box(&coef)).unwrap()));
        g.bench_function(format!("frame_apply/{n}"), |b| b.iter(|| t.frame_apply(black_box(&f)).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("gabor2d");
    let (t, f) = gabor2d_fixture(96, 0.5);
    g.throughput(Throughput::Elements(f.len() as u64));
    g.bench_function("analyze/96x96", |b| b.iter(|| t.analyze(black_box(&f)).unwrap()));
    g.finish();
}

fn covering(c: &mut Criterion) {
    let warp = Preset::Wavelet1d.build().unwrap();
    c.bench_function("covering/wavelet1d", |b| {
        b.iter(|| Covering::build(&warp, black_box(0.25), (vec![-20.0], vec![20.0]), (vec![-5.0], vec![5.0])).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = transform, covering
}
criterion_main!(benches);
