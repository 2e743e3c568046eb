use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dpn_bench::{nsga2_archive, synthetic_archive};
use dpn_core::numerics::hungarian;
use dpn_core::refset::{build_reference_set, merge_and_clean, CleanConfig, RefsetConfig};
use nalgebra::DMatrix;

fn pipeline(c: &mut Criterion) {
    let cases = [
        ("synthetic zdt1", synthetic_archive(1), 30),
        ("nsga2 zdt1", nsga2_archive("zdt1", 40, 60, 1), 40),
        ("nsga2 dtlz2", nsga2_archive("dtlz2", 40, 60, 1), 40),
    ];
    for (name, (mop, archive), mu) in &cases {
        c.bench_function(&format!("merge_and_clean {name}"), |b| {
            b.iter(|| merge_and_clean(black_box(archive), &CleanConfig::default(), *mu).unwrap())
        });
        let (p, report) = merge_and_clean(archive, &CleanConfig::default(), *mu).unwrap();
        c.bench_function(&format!("build_reference_set {name}"), |b| {
            b.iter(|| build_reference_set(mop.as_ref(), black_box(&p), *mu, report.tier, &RefsetConfig::default()).unwrap())
        });
    }
}

fn assignment(c: &mut Criterion) {
    let m = DMatrix::from_fn(100, 100, |i, j| ((i * 37 + j * 11) % 101) as f64 / 7.0 + (i as f64 - j as f64).abs());
    c.bench_function("hungarian 100x100", |b| b.iter(|| hungarian(black_box(&m)).unwrap()));
}

criterion_group!(benches, pipeline, assignment);
criterion_main!(benches);
