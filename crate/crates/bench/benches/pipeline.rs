use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use haloscope_core::analysis::{bin_counts, significance, upper_limit_counts, ConfidenceLevel};
use haloscope_core::protocol::s_to_ns;
use haloscope_core::smpd::{generate_click_stream, generate_clicks_into, NullSink};
use haloscope_core::RunConfig;

fn statistics(c: &mut Criterion) {
    c.bench_function("significance", |b| {
        b.iter(|| significance(black_box(10_612.0), black_box(10_000.0), black_box(0.05)).unwrap())
    });
    c.bench_function("upper_limit_counts", |b| {
        b.iter(|| upper_limit_counts(black_box(10_000.0), black_box(0.05), ConfidenceLevel::NINETY_FIVE).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let cfg = RunConfig {
        super_cycles: Some(1),
        ..RunConfig::paper2024()
    };
    let schedule = cfg.schedule().unwrap();
    let truth = cfg.seeded_truth();
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    group.bench_function("one_super_cycle", |b| {
        b.iter(|| generate_clicks_into(&schedule, &cfg.smpd, &truth, &mut NullSink).unwrap())
    });
    group.finish();

    let end = schedule.duration_ns();
    c.bench_function("schedule_state_at", |b| {
        let mut t = 0u64;
        b.iter(|| {
            t = (t + s_to_ns(0.913)) % end;
            schedule.state_at_ns(black_box(t)).unwrap()
        })
    });

    let stream = generate_click_stream(&schedule, &cfg.smpd, &truth).unwrap();
    let mut group = c.benchmark_group("analysis");
    group.sample_size(10);
    group.bench_function("bin_one_super_cycle", |b| {
        b.iter(|| bin_counts(black_box(&stream.clicks), &schedule).unwrap())
    });
    group.finish();
}

criterion_group!(benches, statistics, simulation);
criterion_main!(benches);
