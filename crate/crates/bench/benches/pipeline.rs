use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use twinbeam_core::config::Config;
use twinbeam_core::fit::{fit_overlap, synthetic_points, VisibilityModel};
use twinbeam_core::schmidt::uniform_coefficients;
use twinbeam_core::{build_jsa, decompose, simulate, spectral_overlap, FrequencyGrid, JointAmplitude, SimConfig};

// Reference grid step, with the span shrunk to fit `points`.
fn grid(points: usize) -> FrequencyGrid {
    let reference = Config::reference().grid().unwrap();
    FrequencyGrid::square(points, 0.5 * reference.step_s() * (points - 1) as f64).unwrap()
}

fn reference_jsa(points: usize) -> JointAmplitude {
    let cfg = Config::reference();
    let grid = grid(points);
    build_jsa(&cfg.device_spec().unwrap(), &cfg.pump_spec().unwrap(), grid, cfg.approximation()).unwrap()
}

fn bench_jsa(c: &mut Criterion) {
    let cfg = Config::reference();
    let spec = cfg.device_spec().unwrap();
    let pump = cfg.pump_spec().unwrap();
    let mut group = c.benchmark_group("build_jsa");
    for n in [256usize, 512, 1024] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &grid(n), |b, g| {
            b.iter(|| build_jsa(&spec, &pump, black_box(*g), cfg.approximation()).unwrap())
        });
    }
    group.finish();
}

fn bench_overlap(c: &mut Criterion) {
    let jsa = reference_jsa(1024);
    c.bench_function("spectral_overlap/1024", |b| b.iter(|| spectral_overlap(black_box(&jsa)).unwrap()));
}

fn bench_svd(c: &mut Criterion) {
    let jsa = reference_jsa(256);
    let mut group = c.benchmark_group("schmidt");
    group.sample_size(10);
    group.bench_function("decompose/256", |b| b.iter(|| decompose(black_box(&jsa), 1e-6).unwrap()));
    group.finish();
}

fn bench_montecarlo(c: &mut Criterion) {
    let det = Config::reference().detection_spec().unwrap();
    let mut group = c.benchmark_group("montecarlo");
    group.sample_size(10);
    for modes in [1usize, 8, 88] {
        let cfg = SimConfig::new(uniform_coefficients(modes), 0.0, det, 1 << 18, 7)
            .unwrap()
            .with_mean_n(0.2)
            .unwrap();
        group.bench_with_input(BenchmarkId::new("gates_262144", modes), &cfg, |b, cfg| {
            b.iter(|| simulate(black_box(cfg)).unwrap())
        });
    }
    group.finish();
}

fn bench_fit(c: &mut Criterion) {
    let ns: Vec<f64> = (0..10).map(|k| 0.05 + 0.05 * k as f64).collect();
    let points = synthetic_points(0.816, &ns, 0.01);
    c.bench_function("fit_overlap/approx", |b| {
        b.iter(|| fit_overlap(black_box(&points), VisibilityModel::Approx).unwrap())
    });
}

criterion_group!(benches, bench_jsa, bench_overlap, bench_svd, bench_montecarlo, bench_fit);
criterion_main!(benches);
