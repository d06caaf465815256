use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use soen_core::junction::{integrate_transient, Drive, JunctionParams, LoopCircuit, Method, SolverConfig};
use soen_core::network::presets::DiePreset;
use soen_core::network::{run_with_threads, Mode};
use soen_core::templates::ReceiverTemplate;

fn rsj(c: &mut Criterion) {
    let jj = JunctionParams {
        critical_current: 10e-6,
        shunt_resistance: 2.0,
        capacitance: 0.0,
        hysteretic: false,
    };
    let circuit = LoopCircuit::new("rsj")
        .junction("J", 1, 0, jj)
        .source("Ib", 0, 1, Drive::Constant { value: 15e-6 });
    let mut group = c.benchmark_group("rsj_200ps");
    for (name, method) in [("sdirk2", Method::Sdirk2), ("rk4", Method::Rk4)] {
        let cfg = SolverConfig {
            method,
            t_end: 200e-12,
            dt_max: 0.05e-12,
            ..Default::default()
        };
        group.bench_function(name, |b| b.iter(|| integrate_transient(black_box(&circuit), &cfg).unwrap()));
    }
    group.finish();
}

fn receiver(c: &mut Criterion) {
    let template = ReceiverTemplate::default();
    let solver = SolverConfig::default();
    let mut group = c.benchmark_group("receiver_event");
    group.sample_size(10);
    for bias in [1e-6, 3e-6] {
        group.bench_with_input(BenchmarkId::from_parameter(bias), &bias, |b, &bias| {
            b.iter(|| template.run(black_box(bias), &solver).unwrap())
        });
    }
    group.finish();
}

fn die(c: &mut Criterion) {
    let config = DiePreset {
        neurons: 400,
        ..Default::default()
    }
    .build()
    .unwrap();
    let mut group = c.benchmark_group("die_400_neurons_1us");
    group.sample_size(10);
    for threads in [1, 4] {
        group.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, &threads| {
            b.iter(|| run_with_threads(black_box(&config), 1e-6, Mode::Behavioral, threads).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, rsj, receiver, die);
criterion_main!(benches);
