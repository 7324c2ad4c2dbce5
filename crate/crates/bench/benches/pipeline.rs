use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use emiprior_bench::{column, fixture};
use emiprior_core::bayes::solve;
use emiprior_core::covariance::{profile_vcm, reduce_channels};
use emiprior_core::rte::spectrum;

fn fits(c: &mut Criterion) {
    let f = fixture(500);
    let b = &f.bundle;
    c.bench_function("fit_500_points", |bench| {
        bench.iter(|| {
            for (h, a) in b.hinges.iter().zip(&b.apriori) {
                black_box(f.context.fit(h.as_ref(), a).unwrap());
            }
        })
    });
    let k = b.hinges.iter().position(|h| h.is_some()).unwrap();
    let (problem, _) = f
        .context
        .problem(b.hinges[k].as_ref(), &b.apriori[k])
        .unwrap();
    c.bench_function("solve_single", |bench| {
        bench.iter(|| black_box(solve(black_box(&problem)).unwrap()))
    });
}

fn reduction(c: &mut Criterion) {
    let f = fixture(10);
    let sh = profile_vcm(&f.bundle.profiles).unwrap();
    c.bench_function("profile_vcm_321", |bench| {
        bench.iter(|| black_box(profile_vcm(&f.bundle.profiles).unwrap()))
    });
    c.bench_function("reduce_channels_321", |bench| {
        bench.iter(|| black_box(reduce_channels(&sh, 0.9).unwrap()))
    });
}

fn radiance(c: &mut Criterion) {
    let col = column(40);
    let wn: Vec<f64> = (0..321).map(|k| 50.0 + 5.0 * k as f64).collect();
    c.bench_function("spectrum_40_layers_321", |bench| {
        bench.iter(|| black_box(spectrum(&col, &wn).unwrap()))
    });
}

criterion_group!(benches, fits, reduction, radiance);
criterion_main!(benches);
