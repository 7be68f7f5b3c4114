use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pseudomarket_bench::{four_types, preset};
use pseudomarket_core::ideal::{build_ideal_lp, ideal_policy, solve_lp, vertex_enumeration_oracle};
use pseudomarket_core::simulator::{run_trial, Allocator};
use pseudomarket_core::{build_strategies, Preset};

fn lp(c: &mut Criterion) {
    let ts = four_types();
    let lp = build_ideal_lp(&ts, 0.3).unwrap();
    c.bench_function("lp/simplex_4_types", |b| {
        b.iter(|| solve_lp(black_box(&lp)).unwrap())
    });
    c.bench_function("lp/oracle_4_types", |b| {
        b.iter(|| vertex_enumeration_oracle(black_box(&lp)).unwrap())
    });
    c.bench_function("lp/ideal_policy_4_types", |b| {
        b.iter(|| ideal_policy(black_box(&ts), 0.3).unwrap())
    });
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("trial");
    for (name, p) in [
        ("guarantee_T1e4", Preset::Guarantee),
        ("multi_T1e4", Preset::Multi),
        ("hardness_greedy_T1e4", Preset::Hardness),
    ] {
        let exp = preset(p, 10_000);
        let strategies = match exp.allocator {
            Allocator::Mechanism => build_strategies(&exp.config).unwrap(),
            _ => Vec::new(),
        };
        let mut trial = 0;
        group.bench_function(name, |b| {
            b.iter(|| {
                trial += 1;
                run_trial(&exp.config, exp.allocator, &strategies, 1, trial).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, lp, trials);
criterion_main!(benches);
