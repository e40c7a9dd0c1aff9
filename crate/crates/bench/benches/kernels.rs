//! Hot-path benchmarks at the acceptance resolution m = 401: one rhs
//! evaluation, one Euler step, the full per-snapshot diagnostics sweep, and
//! a potential reconstruction. Full runs are deliberately not benched here
//! (they are millions of identical steps; the step benchmark is the signal).

use calabiflow_core::analytics::DiagnosticsRecord;
use calabiflow_core::flow::{cfl_dt, rhs, step, FlowState};
use calabiflow_core::geometry::{classify_singularity, KahlerClass, ManifoldParams};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

const M: usize = 401;

fn collapse_state() -> FlowState {
    let params = ManifoldParams::new(2, 2).unwrap();
    let cls0 = KahlerClass::new(1.0, 5.0).unwrap();
    FlowState::initial(params, cls0, M).unwrap()
}

fn bench_rhs(c: &mut Criterion) {
    let st = collapse_state();
    c.bench_function("rhs_m401", |b| b.iter(|| rhs(black_box(&st)).unwrap()));
}

fn bench_step(c: &mut Criterion) {
    let st = collapse_state();
    let dt = cfl_dt(&st, 0.4);
    c.bench_function("euler_step_m401", |b| {
        b.iter(|| step(black_box(&st), black_box(dt)).unwrap())
    });
}

fn bench_diagnostics(c: &mut Criterion) {
    let st = collapse_state();
    let case = classify_singularity(st.params(), st.cls0());
    c.bench_function("diagnostics_measure_m401", |b| {
        b.iter(|| DiagnosticsRecord::measure(black_box(&st), case))
    });
}

fn bench_reconstruct(c: &mut Criterion) {
    let st = collapse_state();
    c.bench_function("reconstruct_u_m401", |b| {
        b.iter(|| st.grid().reconstruct_u(black_box(3.7)))
    });
}

criterion_group!(
    kernels,
    bench_rhs,
    bench_step,
    bench_diagnostics,
    bench_reconstruct
);
criterion_main!(kernels);
