use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use nsdde_core::{
    make_example_b, make_jump_example, sample_brownian_steps, sample_jumps, simulate,
    simulate_jump, step, strong_error_study, truncated_coefficients, CompensatorOracle, DelayState,
    GaugeMode, InitialSegment, MarkDistribution, MarkMeasure, StudyConfig, TimeGrid,
    TruncationRule,
};

fn single_step(c: &mut Criterion) {
    let set = Arc::new(make_example_b());
    let rule = TruncationRule::power(&set, 1.0 / 64.0, 0.05, GaugeMode::Brownian).unwrap();
    let coeffs = truncated_coefficients(&set, &rule).unwrap();
    let state = DelayState::new(&set, 64, &vec![0.5; 65]).unwrap();
    c.bench_function("step/example-b", |b| {
        b.iter(|| step(black_box(&state), &coeffs, 1.0 / 64.0, black_box(&[0.01])).unwrap())
    });
}

fn brownian_paths(c: &mut Criterion) {
    let set = Arc::new(make_example_b());
    let xi = InitialSegment::constant(1.0, vec![1.0]).unwrap();
    let mut group = c.benchmark_group("simulate/example-b");
    for m in [16usize, 64, 256] {
        let grid = TimeGrid::new(1.0, 2.0, m).unwrap();
        let rule = TruncationRule::power(&set, grid.delta(), 0.05, GaugeMode::Brownian).unwrap();
        let noise = sample_brownian_steps(7, 0, 2.0, grid.steps(), 1).unwrap();
        group.throughput(Throughput::Elements(grid.steps() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| simulate(&set, &rule, &grid, &xi, black_box(&noise)).unwrap())
        });
    }
    group.finish();
}

fn jump_paths(c: &mut Criterion) {
    let set = Arc::new(make_jump_example());
    let xi = InitialSegment::constant(1.0, vec![1.0]).unwrap();
    let measure = MarkMeasure::new(1.0, MarkDistribution::Gauss(1.0)).unwrap();
    let oracle = CompensatorOracle::quadrature(&measure, 32).unwrap();
    let jumps = sample_jumps(7, 0, 2.0, &measure).unwrap();
    let grid = TimeGrid::new(1.0, 2.0, 64).unwrap();
    let rule = TruncationRule::power(&set, grid.delta(), 0.08, GaugeMode::Jump { p: 3.0 }).unwrap();
    c.bench_function("simulate/jump-neutral/64", |b| {
        b.iter(|| simulate_jump(&set, &rule, &grid, &xi, black_box(&jumps), &oracle, 7, 0).unwrap())
    });
}

fn study(c: &mut Criterion) {
    let mut cfg = StudyConfig::new(
        Arc::new(make_example_b()),
        InitialSegment::constant(1.0, vec![1.0]).unwrap(),
        1.0,
        2.0,
        vec![8, 16, 32],
        256,
        0.05,
        100,
        7,
    );
    cfg.bootstrap = 200;
    let mut group = c.benchmark_group("study");
    group.sample_size(10);
    group.bench_function("example-b/100-paths", |b| {
        b.iter(|| strong_error_study(black_box(&cfg)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, single_step, brownian_paths, jump_paths, study);
criterion_main!(benches);
