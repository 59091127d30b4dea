//! Discrete-event simulator of an edge/data-center serving setup.
//!
//! Two policies share one workload and one loss pattern:
//!
//! * `Dual`: every request goes to a small frontend model at the edge over
//!   the lossy path and to a large backend model in the data center over the
//!   reliable path. The arbiter accepts the frontend answer when its
//!   confidence clears the calibrated threshold and cancels the backend job.
//! * `Baseline`: each request goes to the cheapest model of its app that
//!   meets the accuracy requirement, wherever that model lives.
//!
//! Each site is one FIFO GPU with LRU model residency; a miss costs
//! `swap_ratio` times the model's service time. Time is integer
//! microseconds.

mod engine;
mod stats;
mod workload;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confidence::CalibrationTable;
use crate::lossmodel::LossConfig;
use crate::trace::{ModelTrace, TraceRow};

pub use engine::{run_policy, PolicyRun, RequestRecord};
pub use stats::{percentiles, Percentiles};
pub use workload::{gen_workload, Arrival, ImageSelection, Request, Requirements, WorkloadConfig};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("trace has no row for image {image_id} at loss level {loss_level}")]
    TraceMiss { image_id: String, loss_level: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Dual,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Site {
    Edge,
    Dc,
}

/// One rung of an app's model ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub accuracy: f64,
    pub service_ms: f64,
    /// Where Baseline hosts this model.
    pub site: Site,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub edge_watts: f64,
    pub dc_watts: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig { edge_watts: 31.74, dc_watts: 106.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub policies: Vec<Policy>,
    pub edge_delay_ms: f64,
    pub internet_delay_ms: f64,
    /// Frontend-side cost of rebuilding a damaged image.
    pub recovery_delay_ms: f64,
    /// Reassembly wait when the last packet of an image is lost.
    pub reassembly_timeout_ms: f64,
    /// Data packets per image; one header packet is sent in addition.
    pub packets_per_image: u32,
    pub edge_loss: LossConfig,
    /// Model load time over inference time.
    pub swap_ratio: f64,
    /// Resident models per GPU. None is unlimited.
    pub gpu_memory_slots: Option<u32>,
    pub cancel: bool,
    pub abort_cost_ms: f64,
    /// Take service times from the trace latency columns when present.
    pub use_trace_latency: bool,
    pub apps: u32,
    /// Per-app model ladder, ascending accuracy. Dual runs the first rung at
    /// the edge and the last rung in the data center.
    pub models: Vec<ModelSpec>,
    pub workload: WorkloadConfig,
    pub energy: EnergyConfig,
    /// Extra Dual runs, one per edge loss rate.
    pub loss_sweep: Vec<f64>,
    /// Bin width of the per-requirement curve.
    pub curve_step: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let m = |name: &str, accuracy, service_ms, site| ModelSpec { name: name.into(), accuracy, service_ms, site };
        SimConfig {
            seed: 0,
            policies: vec![Policy::Dual, Policy::Baseline],
            edge_delay_ms: 3.0,
            internet_delay_ms: 10.0,
            recovery_delay_ms: 0.2,
            reassembly_timeout_ms: 20.0,
            packets_per_image: 100,
            edge_loss: LossConfig::default(),
            swap_ratio: 3.0,
            gpu_memory_slots: None,
            cancel: true,
            abort_cost_ms: 0.0,
            use_trace_latency: false,
            apps: 25,
            models: vec![
                m("m0", 0.7065, 1.5, Site::Edge),
                m("m1", 0.74, 2.0, Site::Edge),
                m("m2", 0.77, 2.5, Site::Edge),
                m("m3", 0.80, 4.0, Site::Dc),
                m("m4", 0.8217, 5.0, Site::Dc),
            ],
            workload: WorkloadConfig::default(),
            energy: EnergyConfig::default(),
            loss_sweep: Vec::new(),
            curve_step: 0.01,
        }
    }
}

pub(crate) fn ms_to_us(ms: f64) -> u64 {
    (ms * 1000.0).round() as u64
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |s: String| Err(SimError::ConfigInvalid(s));
        let nonneg = [
            ("edge_delay_ms", self.edge_delay_ms),
            ("internet_delay_ms", self.internet_delay_ms),
            ("recovery_delay_ms", self.recovery_delay_ms),
            ("reassembly_timeout_ms", self.reassembly_timeout_ms),
            ("swap_ratio", self.swap_ratio),
            ("abort_cost_ms", self.abort_cost_ms),
            ("energy.edge_watts", self.energy.edge_watts),
            ("energy.dc_watts", self.energy.dc_watts),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.policies.is_empty() {
            return bad("no policies".into());
        }
        if self.gpu_memory_slots == Some(0) {
            return bad("gpu_memory_slots must be >= 1".into());
        }
        if self.apps == 0 {
            return bad("apps must be >= 1".into());
        }
        if self.packets_per_image == 0 {
            return bad("packets_per_image must be >= 1".into());
        }
        if self.models.is_empty() {
            return bad("empty model ladder".into());
        }
        for m in &self.models {
            if !(0.0..=1.0).contains(&m.accuracy) || !(m.service_ms.is_finite() && m.service_ms >= 0.0) {
                return bad(format!("model {}: accuracy in [0, 1] and service_ms >= 0 required", m.name));
            }
        }
        if self.models.windows(2).any(|w| w[0].accuracy > w[1].accuracy) {
            return bad("model ladder must be ascending by accuracy".into());
        }
        self.edge_loss.validate().map_err(SimError::ConfigInvalid)?;
        for &r in &self.loss_sweep {
            LossConfig { rate: r, ..self.edge_loss }.validate().map_err(SimError::ConfigInvalid)?;
        }
        let w = &self.workload;
        if w.count == 0 {
            return bad("workload.count must be >= 1".into());
        }
        if !(w.rate_per_s.is_finite() && w.rate_per_s > 0.0) {
            return bad("workload.rate_per_s must be > 0".into());
        }
        if !(0.0 <= w.req_min && w.req_min <= w.req_max && w.req_max <= 1.0) {
            return bad("workload requirements need 0 <= req_min <= req_max <= 1".into());
        }
        if !(self.curve_step.is_finite() && self.curve_step > 0.0) {
            return bad("curve_step must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub requirement: f64,
    pub requests: usize,
    pub latency_ms: Percentiles,
    pub frontend_handled_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: Policy,
    pub requests: usize,
    pub latency_ms: Percentiles,
    pub frontend_handled_fraction: f64,
    pub fallback_fraction: f64,
    pub header_loss_fraction: f64,
    /// Dual: measured from trace correctness. Baseline: nominal accuracy of
    /// the chosen models.
    pub mean_accuracy: f64,
    pub swap_count: u64,
    pub edge_busy_ms: f64,
    pub dc_busy_ms: f64,
    pub total_energy_j: f64,
    pub cancelled_queued: u64,
    pub aborted_running: u64,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub loss_rate: f64,
    pub latency_ms: Percentiles,
    pub frontend_handled_fraction: f64,
    pub fallback_fraction: f64,
    pub mean_observed_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub requests: usize,
    pub arrival_process: Arrival,
    pub table_provenance: String,
    pub policies: Vec<PolicyReport>,
    pub loss_table: Vec<LossRow>,
}

/// Trace rows indexed by image position and loss level.
pub struct TraceView<'a> {
    pub ids: Vec<&'a str>,
    rows: Vec<BTreeMap<u64, &'a TraceRow>>,
}

impl<'a> TraceView<'a> {
    pub fn new(trace: &'a ModelTrace) -> Self {
        let idx = trace.index();
        let ids: Vec<&str> = idx.keys().copied().collect();
        let rows = idx.values().map(|v| v.iter().map(|r| (r.loss_level.to_bits(), *r)).collect()).collect();
        TraceView { ids, rows }
    }

    pub fn row(&self, image: usize, level: f64) -> Result<&'a TraceRow, SimError> {
        self.rows[image].get(&level.to_bits()).copied().ok_or_else(|| SimError::TraceMiss {
            image_id: self.ids[image].to_string(),
            loss_level: level,
        })
    }
}

/// Runs every configured policy and the loss sweep.
pub fn run(cfg: &SimConfig, table: &CalibrationTable, trace: &ModelTrace) -> Result<SimReport, SimError> {
    cfg.validate()?;
    let view = TraceView::new(trace);
    if view.ids.is_empty() {
        return Err(SimError::ConfigInvalid("trace has no rows".into()));
    }
    let reqs = gen_workload(cfg, view.ids.len());
    let mut policies = Vec::new();
    for &p in &cfg.policies {
        policies.push(run_policy(cfg, p, cfg.edge_loss, &reqs, table, &view)?.report);
    }
    let loss_table = std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .loss_sweep
            .iter()
            .map(|&rate| {
                let (reqs, view) = (&reqs, &view);
                s.spawn(move || {
                    let loss = LossConfig { rate, ..cfg.edge_loss };
                    run_policy(cfg, Policy::Dual, loss, reqs, table, view).map(|r| LossRow {
                        loss_rate: rate,
                        latency_ms: r.report.latency_ms,
                        frontend_handled_fraction: r.report.frontend_handled_fraction,
                        fallback_fraction: r.report.fallback_fraction,
                        mean_observed_loss: r.records.iter().map(|x| x.loss_fraction).sum::<f64>()
                            / r.records.len() as f64,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect::<Result<Vec<_>, _>>()
    })?;
    Ok(SimReport {
        seed: cfg.seed,
        requests: reqs.len(),
        arrival_process: cfg.workload.arrival,
        table_provenance: table.provenance.clone(),
        policies,
        loss_table,
    })
}

#[cfg(test)]
mod tests;
