//! Benchmark fixtures for the stencil kernel and the Godunov oracle.

use criterion::{BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use trtlbm::kernel::{collide, init_at_equilibrium, stream};
use trtlbm::reference::{godunov_solve, GodunovOptions};
use trtlbm::{FluxModel, GridSpec, InitialDatum, RelaxPair, SchemeSpec};

fn d1q3() -> (SchemeSpec, FluxModel) {
    (SchemeSpec::d1q3(2.0, 12.0 / 25.0), FluxModel::burgers())
}

pub fn collide_stream(c: &mut Criterion) {
    let (spec, flux) = d1q3();
    let relax = RelaxPair::magic(96.0 / 73.0).unwrap();
    let mut group = c.benchmark_group("d1q3");
    for &n in &[1024usize, 16384, 262144] {
        let grid = GridSpec::symmetric(&spec, n).unwrap();
        let mut state = init_at_equilibrium(&spec, &flux, &InitialDatum::indicator(), &grid).unwrap();
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("collide", n), &n, |b, _| {
            b.iter(|| collide(black_box(&mut state), &spec, &flux, relax).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("stream", n), &n, |b, _| {
            b.iter(|| stream(black_box(&mut state), &spec, &grid))
        });
    }
    group.finish();

    let spec = SchemeSpec::d2q5(2.0, 0.24, 0.24);
    let flux = FluxModel::rotated_burgers(std::f64::consts::FRAC_PI_4);
    let relax = RelaxPair::bgk(1.0).unwrap();
    let mut group = c.benchmark_group("d2q5");
    for &n in &[64usize, 256] {
        let grid = GridSpec::symmetric(&spec, n).unwrap();
        let mut state = init_at_equilibrium(&spec, &flux, &InitialDatum::indicator_radial(), &grid).unwrap();
        group.throughput(Throughput::Elements((n * n) as u64));
        group.bench_with_input(BenchmarkId::new("step", n), &n, |b, _| {
            b.iter(|| {
                collide(&mut state, &spec, &flux, relax).unwrap();
                stream(black_box(&mut state), &spec, &grid);
            })
        });
    }
    group.finish();
}

pub fn godunov(c: &mut Criterion) {
    let (spec, flux) = d1q3();
    let target = GridSpec::symmetric(&spec, 64).unwrap();
    let mut group = c.benchmark_group("godunov");
    group.sample_size(10);
    for &r in &[8usize, 32] {
        let fine = target.refine(r).unwrap();
        let opts = GodunovOptions::for_target(&target);
        group.bench_with_input(BenchmarkId::new("indicator_T0.25", r), &r, |b, _| {
            b.iter(|| godunov_solve(&flux, &InitialDatum::indicator(), &fine, 0.25, &opts).unwrap())
        });
    }
    group.finish();
}
