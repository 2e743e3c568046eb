use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dpn_bench::zdt1_matched;
use dpn_core::newton::{delta_p_step, matched_newton_step, newton_loop, NewtonConfig, NewtonParams};

fn steps(c: &mut Criterion) {
    let params = NewtonParams::default();
    for (mu, n) in [(30, 3), (100, 30)] {
        let (mop, x, z) = zdt1_matched(mu, n, 7);
        c.bench_function(&format!("matched_step mu={mu} n={n}"), |b| {
            b.iter(|| matched_newton_step(mop.as_ref(), black_box(&x), &z, None, &params).unwrap())
        });
        c.bench_function(&format!("delta_p_step mu={mu} n={n}"), |b| {
            b.iter(|| delta_p_step(mop.as_ref(), black_box(&x), &z, None, &params).unwrap())
        });
    }
}

fn full_loop(c: &mut Criterion) {
    let (mop, x, z) = zdt1_matched(100, 30, 7);
    let eta = vec![vec![-std::f64::consts::FRAC_1_SQRT_2; 2]; z.len()];
    let cfg = NewtonConfig::default();
    c.bench_function("newton_loop 6 iterations mu=100 n=30", |b| {
        b.iter(|| newton_loop(mop.as_ref(), black_box(&x), &z, &eta, &cfg).unwrap())
    });
}

criterion_group!(benches, steps, full_loop);
criterion_main!(benches);
