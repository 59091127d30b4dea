use proptest::prelude::*;

use super::*;
use crate::confidence::calibrate;
use crate::lossmodel::LossConfig;
use crate::oracle::build_trace;
use crate::oracle::synth::{generate, SynthParams};

fn row(id: &str, level: f64, conf: f64, fc: bool, bc: bool) -> TraceRow {
    TraceRow {
        image_id: id.into(),
        loss_level: level,
        front_confidence: conf,
        front_correct: fc,
        back_correct: bc,
        front_latency_ms: None,
        back_latency_ms: None,
    }
}

fn requirements() -> Vec<f64> {
    (50..=100).map(|i| f64::from(i) / 100.0).collect()
}

fn synth(images: usize) -> ModelTrace {
    let (f, b, _) = generate(&SynthParams { images, ..SynthParams::default() });
    build_trace(&f, &b, 1).unwrap()
}

fn single(a: f64) -> SimConfig {
    SimConfig {
        apps: 1,
        workload: WorkloadConfig {
            count: 1,
            requirements: Requirements::Fixed,
            req_min: a,
            req_max: a,
            ..WorkloadConfig::default()
        },
        ..SimConfig::default()
    }
}

fn one(cfg: &SimConfig, p: Policy, trace: &ModelTrace) -> PolicyRun {
    let table = calibrate(trace, &requirements()).unwrap();
    let view = TraceView::new(trace);
    let reqs = gen_workload(cfg, view.ids.len());
    run_policy(cfg, p, cfg.edge_loss, &reqs, &table, &view).unwrap()
}

#[test]
fn frontend_answer_closed_form() {
    let trace = ModelTrace::new(vec![row("a", 0.0, 0.9, true, true)]);
    let run = one(&single(0.75), Policy::Dual, &trace);
    assert!(run.records[0].frontend);
    assert_eq!(run.records[0].latency_us, 2 * 3000 + 1500);
    assert_eq!(run.report.frontend_handled_fraction, 1.0);
}

#[test]
fn fallback_closed_form() {
    let trace = ModelTrace::new(vec![row("a", 0.0, 0.9, false, true)]);
    let run = one(&single(0.9), Policy::Dual, &trace);
    assert!(!run.records[0].frontend);
    assert_eq!(run.records[0].latency_us, 2 * 10_000 + 5000);
    assert_eq!(run.report.aborted_running + run.report.cancelled_queued, 0);
}

#[test]
fn cancel_aborts_running_backend_job() {
    let trace = ModelTrace::new(vec![row("a", 0.0, 0.9, true, true)]);
    let run = one(&single(0.75), Policy::Dual, &trace);
    // backend starts at 10 ms, cancel lands at 3 + 1.5 + 10 ms
    assert_eq!(run.report.aborted_running, 1);
    assert_eq!(run.report.dc_busy_ms, 4.5);
    let mut cfg = single(0.75);
    cfg.cancel = false;
    assert_eq!(one(&cfg, Policy::Dual, &trace).report.dc_busy_ms, 5.0);
}

#[test]
fn baseline_picks_cheapest_sufficient_model() {
    let trace = ModelTrace::new(vec![row("a", 0.0, 0.9, true, true)]);
    // 0.75 needs m2 at the edge
    let run = one(&single(0.75), Policy::Baseline, &trace);
    assert_eq!(run.records[0].latency_us, 6000 + 2500);
    assert_eq!(run.records[0].accuracy, 0.77);
    // 0.81 needs m4 in the data center
    let run = one(&single(0.81), Policy::Baseline, &trace);
    assert_eq!(run.records[0].latency_us, 20_000 + 5000);
    // nothing reaches 0.9: most accurate model
    assert_eq!(one(&single(0.9), Policy::Baseline, &trace).records[0].accuracy, 0.8217);
}

#[test]
fn swaps_raise_baseline_tail() {
    let trace = synth(200);
    let mut cfg = SimConfig { seed: 3, ..SimConfig::default() };
    cfg.workload.count = 3000;
    cfg.workload.rate_per_s = 20.0;
    let free = one(&cfg, Policy::Baseline, &trace).report;
    cfg.gpu_memory_slots = Some(25);
    let tight = one(&cfg, Policy::Baseline, &trace).report;
    assert_eq!(free.swap_count, 0);
    assert!(tight.swap_count > 0);
    assert!(tight.latency_ms.p99 > free.latency_ms.p99, "{:?} vs {:?}", tight.latency_ms, free.latency_ms);
}

#[test]
fn dual_fits_its_models_in_the_same_slots() {
    let trace = synth(200);
    let cfg = SimConfig { seed: 3, gpu_memory_slots: Some(25), ..SimConfig::default() };
    assert_eq!(one(&cfg, Policy::Dual, &trace).report.swap_count, 0);
}

#[test]
fn loss_raises_fallback() {
    let trace = synth(300);
    let mut cfg = SimConfig { seed: 5, policies: vec![Policy::Dual], ..SimConfig::default() };
    cfg.workload.count = 3000;
    let clean = one(&cfg, Policy::Dual, &trace).report;
    cfg.edge_loss = LossConfig::bernoulli(0.01);
    let lossy = one(&cfg, Policy::Dual, &trace).report;
    assert!(lossy.fallback_fraction > clean.fallback_fraction);
    assert!(lossy.latency_ms.mean > clean.latency_ms.mean);
    assert!(lossy.header_loss_fraction > 0.0);
}

#[test]
fn work_reduction_with_cancel() {
    let trace = synth(200);
    let mut cfg = SimConfig { seed: 9, ..SimConfig::default() };
    cfg.workload.rate_per_s = 150.0;
    let with = one(&cfg, Policy::Dual, &trace).report;
    cfg.cancel = false;
    let without = one(&cfg, Policy::Dual, &trace).report;
    assert!(with.dc_busy_ms <= without.dc_busy_ms);
    assert!(with.total_energy_j <= without.total_energy_j);
}

#[test]
fn finer_ladder_is_no_slower() {
    let trace = synth(100);
    let mut cfg = SimConfig { seed: 2, swap_ratio: 0.0, ..SimConfig::default() };
    for m in &mut cfg.models {
        m.service_ms = 3.0;
    }
    let five = one(&cfg, Policy::Baseline, &trace).report;
    cfg.models = vec![cfg.models[0].clone(), cfg.models[4].clone()];
    let two = one(&cfg, Policy::Baseline, &trace).report;
    assert!(five.latency_ms.mean <= two.latency_ms.mean);
}

#[test]
fn report_is_deterministic() {
    let trace = synth(200);
    let table = calibrate(&trace, &requirements()).unwrap();
    let cfg = SimConfig { seed: 11, loss_sweep: vec![0.0, 0.005, 0.01], gpu_memory_slots: Some(25), ..SimConfig::default() };
    let a = serde_json::to_string(&run(&cfg, &table, &trace).unwrap()).unwrap();
    let b = serde_json::to_string(&run(&cfg, &table, &trace).unwrap()).unwrap();
    assert_eq!(a, b);
    let other = SimConfig { seed: 12, ..cfg };
    assert_ne!(a, serde_json::to_string(&run(&other, &table, &trace).unwrap()).unwrap());
}

#[test]
fn invalid_configs_and_trace_miss() {
    let trace = synth(20);
    let table = calibrate(&trace, &requirements()).unwrap();
    for cfg in [
        SimConfig { edge_delay_ms: -1.0, ..SimConfig::default() },
        SimConfig { swap_ratio: -0.5, ..SimConfig::default() },
        SimConfig { gpu_memory_slots: Some(0), ..SimConfig::default() },
        SimConfig { policies: vec![], ..SimConfig::default() },
        SimConfig { edge_loss: LossConfig::bernoulli(1.5), ..SimConfig::default() },
    ] {
        assert!(matches!(run(&cfg, &table, &trace), Err(SimError::ConfigInvalid(_))));
    }
    // an image without its loss-0 row
    let mut t = trace.clone();
    t.rows.retain(|r| !(r.image_id == "img00000" && r.loss_level == 0.0));
    let cfg = SimConfig { workload: WorkloadConfig { images: ImageSelection::RoundRobin, ..WorkloadConfig::default() }, ..SimConfig::default() };
    assert!(matches!(run(&cfg, &table, &t), Err(SimError::TraceMiss { .. })));
}

#[test]
fn ascending_workload() {
    let cfg = SimConfig {
        workload: WorkloadConfig {
            count: 4000,
            requirements: Requirements::Ascending,
            req_min: 0.6,
            req_max: 0.8,
            ..WorkloadConfig::default()
        },
        ..SimConfig::default()
    };
    let w = gen_workload(&cfg, 10);
    assert_eq!(w.len(), 4000);
    assert_eq!(w[0].requirement, 0.6);
    assert!((w[3999].requirement - 0.8).abs() < 1e-12);
    assert!(w.windows(2).all(|p| p[0].requirement <= p[1].requirement && p[0].arrival_us <= p[1].arrival_us));
    assert_eq!(w, gen_workload(&cfg, 10));
}

#[test]
fn round_robin_matches_table_prediction() {
    let trace = synth(300);
    let table = calibrate(&trace, &requirements()).unwrap();
    let mut cfg = single(0.75);
    cfg.workload.count = 600;
    cfg.workload.images = ImageSelection::RoundRobin;
    let run = one(&cfg, Policy::Dual, &trace);
    let predicted = table.entry(0.0, 0.75).unwrap().unwrap().predicted_frontend_fraction;
    assert!((run.report.frontend_handled_fraction - predicted).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn every_request_resolves_once_and_respects_delays(
        seed in any::<u64>(),
        rate in 5.0f64..300.0,
        loss in 0.0f64..0.05,
        slots in proptest::option::of(1u32..60),
        swap in 0.0f64..4.0,
    ) {
        let trace = synth(60);
        let mut cfg = SimConfig { seed, gpu_memory_slots: slots, swap_ratio: swap, ..SimConfig::default() };
        cfg.workload.count = 300;
        cfg.workload.rate_per_s = rate;
        cfg.edge_loss = LossConfig::bernoulli(loss);
        for p in [Policy::Dual, Policy::Baseline] {
            let run = one(&cfg, p, &trace);
            prop_assert_eq!(run.records.len(), 300);
            let ids: std::collections::BTreeSet<u32> = run.records.iter().map(|r| r.id).collect();
            prop_assert_eq!(ids.len(), 300);
            for r in &run.records {
                // cheapest model on each path
                let floor = if r.frontend { 6000 + 1500 } else { 20_000 + 4000 };
                prop_assert!(r.latency_us >= floor);
            }
            let l = run.report.latency_ms;
            prop_assert!(l.p90 <= l.p99 && l.p99 <= l.p100);
            prop_assert!((0.0..=1.0).contains(&run.report.frontend_handled_fraction));
        }
    }
}
