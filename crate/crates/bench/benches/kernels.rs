use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use p2dyn::greenfn::{green_value, DEFAULT_MAX_ITER, DEFAULT_TOL};
use p2dyn::localmodel::{pair_t11, standard_test_functions};
use p2dyn::lyapunov::exponent_pair;
use p2dyn::measures::preimages_fibered;
use p2dyn::{maps, C64};
use p2dyn_bench::{lattes_cloud, start};

fn green(c: &mut Criterion) {
    let f = maps::lattes4_suspension();
    let x = [C64::new(0.37, -0.21), C64::new(-0.52, 0.64), C64::new(1.0, 0.0)];
    c.bench_function("green_value/lattes4susp", |b| {
        b.iter(|| green_value(&f, black_box(&x), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap())
    });
}

fn preimages(c: &mut Criterion) {
    let f = maps::lattes4_suspension();
    let p = start();
    c.bench_function("preimages_fibered/lattes4susp", |b| {
        b.iter(|| preimages_fibered(&f, black_box(&p)).unwrap())
    });
}

fn exponents(c: &mut Criterion) {
    let (f, cloud) = lattes_cloud(1000);
    let mut g = c.benchmark_group("exponent_pair");
    g.sample_size(10);
    g.bench_function("lattes4susp/1000x40", |b| b.iter(|| exponent_pair(&f, &cloud, 40, 1).unwrap()));
    g.finish();
}

fn local_model(c: &mut Criterion) {
    let fns = standard_test_functions();
    let phi = &fns[0].1;
    let mut g = c.benchmark_group("pair_t11");
    g.sample_size(10);
    g.bench_function("bump-centered/res24", |b| b.iter(|| pair_t11(black_box(phi), 24).unwrap()));
    g.finish();
}

criterion_group!(benches, green, preimages, exponents, local_model);
criterion_main!(benches);
