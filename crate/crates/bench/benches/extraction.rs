use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use surfloss::{extract, extract_serial, solve_nnls, ExtractionConfig, ReferenceSet};
use surfloss_bench::fixture;

fn nnls(c: &mut Criterion) {
    let matrix = ReferenceSet::TiN.matrix();
    let truth = ReferenceSet::TiN.ground_truth();
    let rhs: BTreeMap<_, _> = matrix
        .designs()
        .iter()
        .zip(matrix.rows())
        .map(|(d, row)| (d.clone(), row.dot(&truth)))
        .collect();
    c.bench_function("solve_nnls_tin", |b| {
        b.iter(|| solve_nnls(black_box(&matrix), black_box(&rhs)).unwrap())
    });
}

fn monte_carlo(c: &mut Criterion) {
    let (matrix, stats) = fixture(ReferenceSet::TiN, 0.05, 30);
    let config = ExtractionConfig {
        n_samples: 10_000,
        ..ExtractionConfig::default()
    };
    let mut group = c.benchmark_group("extract_tin_10k");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| extract(black_box(&matrix), black_box(&stats), &config).unwrap())
    });
    group.bench_function("serial", |b| {
        b.iter(|| extract_serial(black_box(&matrix), black_box(&stats), &config).unwrap())
    });
    group.finish();
}

criterion_group!(benches, nnls, monte_carlo);
criterion_main!(benches);
