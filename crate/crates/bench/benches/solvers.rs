use std::hint::black_box;

use contractlab_bench::{launch_market, renewal_market};
use contractlab_core::experiments::{run_factorial, ExperimentGrid};
use contractlab_core::multi_gen::{coordinating_wholesale, supplier_best_response_endogenous};
use contractlab_core::sim::{estimate_single_gen_profit, SimConfig};
use contractlab_core::single_gen::{coordinated_lump_sum, coordinated_penalty_numeric};
use contractlab_core::special::{lambert_w, lambert_w0_of_exp, WBranch};
use contractlab_core::ContractTerms;
use criterion::{criterion_group, criterion_main, Criterion};

fn special(c: &mut Criterion) {
    c.bench_function("lambert_w0", |b| {
        b.iter(|| lambert_w(WBranch::Principal, black_box(2.5)))
    });
    c.bench_function("lambert_wm1", |b| {
        b.iter(|| lambert_w(WBranch::MinusOne, black_box(-0.2)))
    });
    c.bench_function("lambert_w0_of_exp", |b| b.iter(|| lambert_w0_of_exp(black_box(800.0))));
}

fn best_responses(c: &mut Criterion) {
    let p = renewal_market();
    let exp = p.exponential_demand();
    let erl = p.erlang_demand(3);
    c.bench_function("endogenous_exponential", |b| {
        b.iter(|| supplier_best_response_endogenous(&p, &exp, black_box(3.0)))
    });
    c.bench_function("endogenous_erlang3", |b| {
        b.iter(|| supplier_best_response_endogenous(&p, &erl, black_box(3.0)))
    });
    c.bench_function("coordinating_wholesale_erlang3", |b| {
        b.iter(|| coordinating_wholesale(black_box(&p), &erl))
    });

    let q = launch_market();
    c.bench_function("lump_sum_closed_form", |b| {
        b.iter(|| coordinated_lump_sum(black_box(&q), &q.exponential_demand()))
    });
    let q3 = contractlab_core::MarketParams { tail_rate: 0.03, ..q };
    c.bench_function("lump_sum_numeric_erlang3", |b| {
        b.iter(|| coordinated_penalty_numeric(black_box(&q3), &q3.erlang_demand(3)))
    });
}

fn experiments(c: &mut Criterion) {
    let mut group = c.benchmark_group("experiments");
    group.sample_size(10);
    group.bench_function("table1_factorial", |b| {
        b.iter(|| run_factorial(black_box(&ExperimentGrid::table1())))
    });
    let p = renewal_market();
    let d = p.exponential_demand();
    let cfg = SimConfig::new(1, 100_000, 0.9);
    group.bench_function("sim_100k_wholesale", |b| {
        b.iter(|| estimate_single_gen_profit(&p, &d, &ContractTerms::Wholesale { w: 4.0 }, 2.0, black_box(&cfg)))
    });
    group.finish();
}

criterion_group!(benches, special, best_responses, experiments);
criterion_main!(benches);
