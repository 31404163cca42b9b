use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mpdo_core::mpdo::{evaluate_with, trial_rng, EvalOptions, EvalPath, FamilySpec, SymbolSpec};
use mpdo_core::norms::besov_symbol_norm;
use mpdo_core::weights::WeightSpec;
use mpdo_core::Grid;

// With the `parallel` feature off every pool size runs the sequential path.
fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).max(2);
    vec![
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()),
    ]
}

fn evaluate_bench(c: &mut Criterion) {
    let g = Grid::new(1, 16.0, 64).unwrap();
    let fam = FamilySpec::default_for(&g);
    let mut rng = trial_rng(1, 0);
    let fs = vec![fam.sample(&g, &mut rng).unwrap(), fam.sample(&g, &mut rng).unwrap()];
    let spec = SymbolSpec::BandLimited { radii: vec![2.0, 2.0, 2.0], terms: 4, seed: 3 };
    let opts = EvalOptions { path: EvalPath::Direct, ..Default::default() };
    let mut group = c.benchmark_group("evaluate_band_limited");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| evaluate_with(black_box(&spec), black_box(&fs), opts).unwrap()))
        });
    }
    group.finish();
}

fn besov_bench(c: &mut Criterion) {
    let gx = Grid::new(1, 8.0, 16).unwrap();
    let gxi = Grid::new(1, 16.0, 32).unwrap();
    let spec = SymbolSpec::BandLimited { radii: vec![1.0, 1.0, 1.0], terms: 3, seed: 5 };
    let sym = spec.sample(&gx, &gxi, 2).unwrap();
    let w = WeightSpec::Power { m: -0.5 };
    let mut group = c.benchmark_group("besov_symbol_norm");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| besov_symbol_norm(black_box(&sym), &w, &[0.5, 0.5, 0.5], 1.0).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, evaluate_bench, besov_bench);
criterion_main!(benches);
