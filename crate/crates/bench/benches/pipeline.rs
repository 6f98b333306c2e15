use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use grasp_core::attribution::tree_shap;
use grasp_core::gbm::{train_gbm, GbmConfig};
use grasp_core::solver::{fit_grasp, group_weights, SolverConfig};
use grasp_core::synthetic::{generate, SyntheticData, SyntheticSpec};
use grasp_core::DesignMatrix;
use ndarray::s;

fn data() -> SyntheticData {
    generate(&SyntheticSpec {
        n: 2000,
        group_sizes: vec![4; 10],
        informative_groups: 3,
        rho: 0.6,
        coefficient: 1.0,
        label_noise: 0.05,
        seed: 7,
    })
    .unwrap()
}

fn design(d: &SyntheticData) -> DesignMatrix {
    DesignMatrix::new(d.x.clone(), d.feature_names.clone(), d.y.clone()).unwrap()
}

fn bench_gbm(c: &mut Criterion) {
    let d = data();
    let m = design(&d);
    let mut group = c.benchmark_group("train_gbm");
    group.sample_size(10);
    group.bench_function("n2000_p40_50trees", |b| {
        b.iter(|| train_gbm(black_box(&m), &GbmConfig::default()).unwrap())
    });
    group.finish();
}

fn bench_shap(c: &mut Criterion) {
    let d = data();
    let model = train_gbm(&design(&d), &GbmConfig::default()).unwrap();
    let rows = d.x.slice(s![..400, ..]);
    c.bench_function("tree_shap/400rows_50trees", |b| {
        b.iter(|| tree_shap(&model, black_box(rows)).unwrap())
    });
}

fn bench_solver(c: &mut Criterion) {
    let d = data();
    let s: Vec<f64> = (0..d.partition.len()).map(|g| 0.1 * g as f64).collect();
    let weights = group_weights(&s, 1.0, 1e-8).unwrap();
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("fit_grasp");
    group.sample_size(20);
    group.bench_function("n2000_p40_10groups", |b| {
        b.iter(|| fit_grasp(black_box(d.x.view()), &d.y, &d.partition, &weights, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_gbm, bench_shap, bench_solver);
criterion_main!(benches);
