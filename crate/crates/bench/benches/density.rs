use affinv::{affine_density, assemble_tensor, index_set, pullback_measure, OptimizerConfig};
use affinv_bench::sample_maps;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn tensors(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble_tensor");
    for (name, f) in sample_maps() {
        let set = index_set(f.d(), f.n()).unwrap();
        let p = vec![0.3; f.d()];
        g.bench_with_input(BenchmarkId::from_parameter(name), &f, |b, f| {
            b.iter(|| assemble_tensor(f, black_box(&p), &set).unwrap())
        });
    }
    g.finish();
}

fn densities(c: &mut Criterion) {
    let cfg = OptimizerConfig::default();
    let mut g = c.benchmark_group("affine_density");
    for (name, f) in sample_maps() {
        let p = vec![0.3; f.d()];
        g.bench_with_input(BenchmarkId::from_parameter(name), &f, |b, f| {
            b.iter(|| affine_density(f, black_box(&p), &cfg).unwrap())
        });
    }
    g.finish();
}

fn pullback(c: &mut Criterion) {
    let cfg = OptimizerConfig { restarts: 4, ..OptimizerConfig::default() };
    let (_, f) = sample_maps().swap_remove(1);
    let mut g = c.benchmark_group("pullback_measure");
    g.sample_size(10);
    for res in [8usize, 16] {
        g.bench_with_input(BenchmarkId::from_parameter(res), &res, |b, &res| {
            b.iter(|| pullback_measure(&f, &[-1.0, -1.0], &[1.0, 1.0], res, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, tensors, densities, pullback);
criterion_main!(benches);
