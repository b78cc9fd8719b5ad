use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ctwork::cylfield::{CylinderGrid, MapField};
use ctwork::decay::three_interval_bound;
use ctwork::identities::{flat_oracle_family, run_suite};
use ctwork::instanton::{functional, gradient};
use ctwork::la::V4;
use ctwork::reeb::{assemble_az, ClosedOrbit};
use ctwork::triad::{Triad, GOLDEN};

fn circle(s: f64) -> V4 {
    V4::new((2.0 * s).cos(), (2.0 * s).sin(), 0.0, 0.0)
}

fn bumped(t: &Triad, n: usize) -> MapField {
    let g = CylinderGrid::new(1.0, n + 1, n).unwrap();
    MapField::from_fn(g, t, |tau, s| {
        circle(PI * s) + V4::new(0.0, 0.0, 0.05, 0.03) * (PI * tau).sin() * (2.0 * PI * s).cos()
    })
}

fn instanton(c: &mut Criterion) {
    let t = Triad::ellipsoid(1.0, GOLDEN);
    let w = bumped(&t, 64);
    c.bench_function("functional 65x64", |b| b.iter(|| functional(&t, black_box(&w))));
    c.bench_function("gradient 65x64", |b| b.iter(|| gradient(&t, black_box(&w))));
}

fn spectrum(c: &mut Criterion) {
    let t = Triad::ellipsoid(1.0, GOLDEN);
    let orbit = ClosedOrbit::from_point(&t, V4::new(1.0, 0.0, 0.0, 0.0), PI, 256).unwrap();
    c.bench_function("assemble_az Nt=128", |b| {
        b.iter(|| assemble_az(&t, black_box(&orbit), 128).unwrap())
    });
}

fn identities(c: &mut Criterion) {
    let t = Triad::flat();
    let fields = flat_oracle_family(&[32, 64], 0.1).unwrap();
    let mut g = c.benchmark_group("identities");
    g.sample_size(10);
    g.bench_function("run_suite flat oracle 32/64", |b| {
        b.iter(|| run_suite(&t, black_box(&fields), 0).unwrap())
    });
    g.finish();
}

fn decay(c: &mut Criterion) {
    let xs: Vec<f64> = (0..64)
        .map(|k| (-0.9 * k as f64).exp() + (0.9 * (k as f64 - 63.0)).exp())
        .collect();
    c.bench_function("three_interval_bound n=64", |b| {
        b.iter(|| three_interval_bound(black_box(&xs), 0.4).unwrap())
    });
}

criterion_group!(benches, instanton, spectrum, identities, decay);
criterion_main!(benches);
