use std::hint::black_box;

use condex::particle::{sample_initial, RateIndex};
use condex::pde::{self, DensityProfile, PhiSpec, SolverConfig};
use condex::{ExclusionProcess, LatticeOperator, ProcessParams, WSpec};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};

fn one_atom() -> WSpec {
    WSpec::with_atoms(1.0, &[(0.37, 1.0)]).unwrap()
}

fn kmc(c: &mut Criterion) {
    let mut group = c.benchmark_group("kmc");
    for n in [256usize, 1024] {
        let params = ProcessParams::new(0.5, one_atom(), n, 1).unwrap();
        let eta = sample_initial(|_| 0.5, n, 1, 0).unwrap();
        let fresh = ExclusionProcess::new(&params, eta, 0).unwrap();
        // span chosen so each iteration runs roughly 2e4 events
        let mut probe = fresh.clone();
        let span = 1e-6;
        probe.advance(span).unwrap();
        let span = span * 2e4 / probe.events().max(1) as f64;
        let mut probe = fresh.clone();
        probe.advance(span).unwrap();
        group.throughput(Throughput::Elements(probe.events()));
        group.bench_function(format!("advance_N{n}"), |b| {
            b.iter_batched(
                || fresh.clone(),
                |mut p| {
                    p.advance(span).unwrap();
                    black_box(p.events())
                },
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn rate_index(c: &mut Criterion) {
    let n = 4096;
    let rates: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
    let mut index = RateIndex::new(&rates);
    let mut i = 0usize;
    c.bench_function("rate_index/update5_select_N4096", |b| {
        b.iter(|| {
            i = (i + 811) % n;
            for k in 0..5 {
                index.set((i + k) % n, 1.0 + ((i + k) % 5) as f64);
            }
            black_box(index.select(0.5 * index.total()))
        })
    });
}

fn resolvent(c: &mut Criterion) {
    let mut group = c.benchmark_group("resolvent");
    for n in [1024usize, 16384] {
        let op = LatticeOperator::from_w(&one_atom(), n).unwrap();
        let h: Vec<f64> = (0..n).map(|x| (x as f64 / n as f64).sin()).collect();
        op.solve_resolvent(1.0, &h).unwrap();
        group.throughput(Throughput::Elements(n as u64));
        group.bench_function(format!("cyclic_solve_N{n}"), |b| {
            b.iter(|| op.solve_resolvent(1.0, black_box(&h)).unwrap())
        });
    }
    group.finish();
}

fn pde_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("pde");
    for n in [256usize, 4096] {
        let op = LatticeOperator::from_w(&one_atom(), n).unwrap();
        let phi = PhiSpec::quadratic(0.5).unwrap();
        let rho = DensityProfile::from_fn(n, |u| 0.5 + 0.3 * (std::f64::consts::TAU * u).cos());
        let cfg = SolverConfig::implicit(1e-4);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_function(format!("implicit_step_N{n}"), |b| {
            b.iter(|| pde::step(&op, &phi, black_box(&rho), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, kmc, rate_index, resolvent, pde_step);
criterion_main!(benches);
