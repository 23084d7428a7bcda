use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};

use qpc_bench::{di_config, equal_pair, honest_supply, KEY};
use qpc_core::analysis::{expected_leakage, expected_leakage_closed_form, monte_carlo_leakage, LeakageExperiment};
use qpc_core::protocol::{run_check_session, TranscriptLevel};
use qpc_core::{
    estimate_chsh, hash, make_supply, run_dd_protocol, run_di_protocol, unhash, BitString, Parties, Rng,
    SchedulePolicy, SupplierStrategy,
};

fn hashing(c: &mut Criterion) {
    let mut group = c.benchmark_group("hash");
    for n in [8usize, 32, 64] {
        let x = BitString::random(n, &mut Rng::from_seed(1)).unwrap();
        let y = hash(KEY, &x).unwrap();
        group.bench_with_input(BenchmarkId::new("forward", n), &x, |b, x| {
            b.iter(|| hash(KEY, black_box(x)))
        });
        group.bench_with_input(BenchmarkId::new("inverse", n), &y, |b, y| {
            b.iter(|| unhash(KEY, black_box(y)))
        });
    }
    group.finish();
}

fn leakage(c: &mut Criterion) {
    let mut group = c.benchmark_group("leakage");
    for n in [1_000u64, 1_000_000] {
        group.bench_with_input(BenchmarkId::new("series", n), &n, |b, &n| {
            b.iter(|| expected_leakage(black_box(n), 0.91))
        });
        group.bench_with_input(BenchmarkId::new("closed_form", n), &n, |b, &n| {
            b.iter(|| expected_leakage_closed_form(black_box(n), 0.91))
        });
    }
    group.finish();
}

fn check_mode(c: &mut Criterion) {
    let mut group = c.benchmark_group("check_mode");
    group.bench_function("make_supply_4000", |b| {
        let mut rng = Rng::from_seed(2);
        b.iter(|| make_supply(&SupplierStrategy::honest(), 4000, &mut rng))
    });
    group.bench_function("session_and_chsh_2000", |b| {
        b.iter_batched(
            || {
                make_supply(&SupplierStrategy::honest(), 4000, &mut Rng::from_seed(3))
                    .unwrap()
                    .0
            },
            |mut supply| {
                let records = run_check_session(&mut supply, 2000, &mut Rng::from_seed(4)).unwrap();
                estimate_chsh(&records)
            },
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

fn protocols(c: &mut Criterion) {
    let mut group = c.benchmark_group("protocol");
    let (a, b) = equal_pair(32, 5);
    group.bench_function("dd_n32", |bench| {
        let mut rng = Rng::from_seed(6);
        bench.iter(|| run_dd_protocol(&a, &b, KEY, &Parties::honest(), &mut rng))
    });
    for schedule in [SchedulePolicy::Sequential, SchedulePolicy::default()] {
        let mut config = di_config().with_schedule(schedule);
        config.transcript = TranscriptLevel::Summary;
        group.bench_function(BenchmarkId::new("di_n32", schedule), |bench| {
            bench.iter_batched(
                || honest_supply(32, 7),
                |(mut supply, ledger)| run_di_protocol(&a, &b, &mut supply, &ledger, &config, &mut Rng::from_seed(8)),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    let experiment = LeakageExperiment::new(16, SupplierStrategy::honest(), di_config());
    group.bench_function("honest_100_trials_n16", |b| {
        b.iter(|| monte_carlo_leakage(&experiment, 100, &Rng::from_seed(9)))
    });
    group.finish();
}

criterion_group!(benches, hashing, leakage, check_mode, protocols, monte_carlo);
criterion_main!(benches);
