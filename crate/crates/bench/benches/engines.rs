use condlab::exact::heat_kernel;
use condlab::generator::build_generator;
use condlab::harnack::{harnack_constant, DataFamily};
use condlab::homogenize::{a_matrix_at, b_matrix_at};
use condlab::sampler::{simulate, ProcessKind, SimulateOptions};
use condlab::{ConductanceModel, LatticeWindow, ModelSpec, Site};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn heavy(dim: usize) -> ConductanceModel {
    ModelSpec::RadialHeavyTail { dim, exponent: None, offset: 0.0, scale: 1.0 }.build().unwrap()
}

fn generator(c: &mut Criterion) {
    let m = heavy(2);
    let mut g = c.benchmark_group("generator");
    for half in [8i64, 16] {
        let w = LatticeWindow::cube(2, Site::ORIGIN, half).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(half), &w, |b, w| b.iter(|| build_generator(&m, w, 1e-8).unwrap()));
    }
    g.finish();
}

fn kernel(c: &mut Criterion) {
    let m = heavy(2);
    let w = LatticeWindow::cube(2, Site::ORIGIN, 12).unwrap();
    let gen = build_generator(&m, &w, 1e-8).unwrap();
    c.bench_function("heat_kernel/killed_t4", |b| b.iter(|| heat_kernel(&gen, black_box(&[1.0, 4.0]), &[Site::ORIGIN], true).unwrap()));
}

fn sampler(c: &mut Criterion) {
    let m = heavy(2);
    let opts = SimulateOptions::default();
    c.bench_function("sampler/continuous_1000_paths", |b| {
        b.iter(|| simulate(ProcessKind::Continuous, &m, Site::ORIGIN, 5.0, 1000, black_box(7), &opts).unwrap())
    });
}

fn fields(c: &mut Criterion) {
    let m = heavy(2);
    let x = Site::new(&[3, -2]);
    let mut g = c.benchmark_group("fields");
    for n in [4u64, 16] {
        g.bench_with_input(BenchmarkId::new("a", n), &n, |b, &n| b.iter(|| a_matrix_at(&m, n, 2.0, black_box(&x))));
        g.bench_with_input(BenchmarkId::new("b", n), &n, |b, &n| b.iter(|| b_matrix_at(&m, n, 2.0, black_box(&x))));
    }
    g.finish();
}

fn harnack(c: &mut Criterion) {
    let m = heavy(2);
    let mut g = c.benchmark_group("harnack");
    g.sample_size(10);
    g.bench_function("point_masses_r8", |b| {
        b.iter(|| harnack_constant(&m, Site::ORIGIN, &[8.0], DataFamily::PointMasses { shell: 3.0 }, 0.5, 1e-6).unwrap())
    });
    g.finish();
}

criterion_group!(benches, generator, kernel, sampler, fields, harnack);
criterion_main!(benches);
