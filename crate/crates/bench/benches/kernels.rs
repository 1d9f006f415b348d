use std::hint::black_box;

use cdqc::agp;
use cdqc::evolve::{self, PropagateOptions, StepExponential};
use cdqc_bench::{dense_cd, operator_pair, qubo};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn commutator(c: &mut Criterion) {
    let mut group = c.benchmark_group("commutator");
    for n in [4, 6, 8] {
        let (h, d) = operator_pair(n, 0.4);
        let nested = h.commutator(&h.commutator(&d).unwrap()).unwrap();
        group.bench_with_input(BenchmarkId::new("h_dh", n), &n, |b, _| {
            b.iter(|| black_box(&h).commutator(black_box(&d)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("h_o2", n), &n, |b, _| {
            b.iter(|| black_box(&h).commutator(black_box(&nested)).unwrap())
        });
    }
    group.finish();
}

fn build_nested(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_nested");
    group.sample_size(10);
    let inst = qubo(6);
    for order in [1, 2, 3] {
        group.bench_with_input(BenchmarkId::from_parameter(order), &order, |b, &l| {
            b.iter(|| agp::build_nested(black_box(&inst), 2 * l).unwrap())
        });
    }
    group.finish();
}

fn propagation_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagation");
    let inst = qubo(6);
    let cd = dense_cd(6, 2);
    let psi0 = evolve::initial_state(&inst).unwrap();
    let (h, _) = cd.hamiltonian(0.3, 1.0).unwrap();
    for method in [StepExponential::Taylor, StepExponential::Eigh] {
        group.bench_function(BenchmarkId::new("single_step", format!("{method:?}")), |b| {
            let mut psi = psi0.clone();
            b.iter(|| evolve::apply_step(black_box(&h), 0.01, &mut psi, method))
        });
    }
    group.sample_size(10);
    let opts = PropagateOptions {
        n_steps: Some(4000),
        n_samples: 5,
        exponential: StepExponential::Taylor,
    };
    group.bench_function("run_4000_steps", |b| {
        b.iter(|| evolve::propagate_from(&cd, psi0.clone(), 2.0, &opts, 6).unwrap())
    });
    group.finish();
}

criterion_group!(benches, commutator, build_nested, propagation_step);
criterion_main!(benches);
