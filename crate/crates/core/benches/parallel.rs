//! Serial against rayon execution for the two data-parallel workloads:
//! Monte Carlo paths and scenario sweeps. Without the `parallel` feature both
//! arms run serially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fva_core::cli::{run_scenario, RunOptions, ScenarioConfig};
use fva_core::credit::{CreditCurve, JointDefaultModel, Name};
use fva_core::curves::MarketRates;
use fva_core::instruments::{Cashflow, CashflowSchedule, CloseoutSpec};
use fva_core::oracle::{mc_value_correlated, McSettings};
use fva_core::Execution;

const MODES: [(&str, Execution); 2] = [("serial", Execution::Serial), ("parallel", Execution::Parallel)];

fn monte_carlo(c: &mut Criterion) {
    let market = MarketRates::flat(0.01, 0.005).unwrap();
    let model = JointDefaultModel::new(
        CreditCurve::flat(Name::Investor, 0.02).unwrap(),
        CreditCurve::flat(Name::Counterparty, 0.02).unwrap(),
        1.0,
    )
    .unwrap();
    let schedule = CashflowSchedule::from_flows(
        (1..=10).map(|k| Cashflow { t: 0.5 * k as f64, amount: if k % 2 == 0 { -0.4 } else { 0.3 } }).collect(),
    )
    .unwrap();
    let closeout = CloseoutSpec::new(0.4, 0.4).unwrap();

    let mut group = c.benchmark_group("mc_correlated_100k");
    group.sample_size(10);
    for (name, exec) in MODES {
        let settings = McSettings::new(100_000, 7).with_execution(exec);
        group.bench_with_input(BenchmarkId::from_parameter(name), &settings, |b, &s| {
            b.iter(|| black_box(mc_value_correlated(&market, &model, &schedule, &closeout, s).unwrap()))
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let lambda_bars: Vec<String> = (0..16).map(|k| format!("{}", 0.0025 * k as f64)).collect();
    let thetas: Vec<String> = (0..16).map(|k| format!("{}", 0.25 * k as f64)).collect();
    let text = format!(
        r#"{{
            "regimes": ["independent", "correlated"],
            "market": {{"risk_free": [{{"t": 0, "value": 0.01}}], "collateral": [{{"t": 0, "value": 0.005}}]}},
            "investor_intensity": [{{"t": 0, "value": 0.02}}],
            "counterparty_intensity": [{{"t": 0, "value": 0.03}}, {{"t": 3, "value": 0.05}}],
            "bond_recovery": 0,
            "closeout": {{"recovery_investor": 0.4, "recovery_counterparty": 0.4}},
            "schedule": {{"flows": [{{"t": 2.5, "amount": 0.5}}, {{"t": 5, "amount": -1}}, {{"t": 10, "amount": 1}}]}},
            "sweep": {{"lambda_bar_investor": [{}], "theta": [{}]}}
        }}"#,
        lambda_bars.join(", "),
        thetas.join(", ")
    );
    let scenario = ScenarioConfig::from_json(&text).unwrap().validate().unwrap();

    let mut group = c.benchmark_group("sweep_32_points");
    group.sample_size(10);
    for (name, execution) in MODES {
        let options = RunOptions {
            execution,
            ..RunOptions::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &options, |b, &o| {
            b.iter(|| black_box(run_scenario(&scenario, o).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, sweep);
criterion_main!(benches);
