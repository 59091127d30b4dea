use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::stats::percentiles_us;
use super::{ms_to_us, CurvePoint, Policy, PolicyReport, Request, SimConfig, SimError, Site, TraceView};
use crate::confidence::{arbitrate, ArbiterDecision, CalibrationTable};
use crate::lossmodel::LossConfig;

const EDGE: usize = 0;
const DC: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RequestRecord {
    pub id: u32,
    pub requirement: f64,
    pub latency_us: u64,
    /// Dual: the arbiter took the frontend answer. Baseline: served at the
    /// edge.
    pub frontend: bool,
    pub header_lost: bool,
    /// Lost data packets over data packets.
    pub loss_fraction: f64,
    /// 1 or 0 for Dual, nominal model accuracy for Baseline.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub report: PolicyReport,
    pub records: Vec<RequestRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Done { gpu: usize, token: u64 },
    Cancel { job: usize },
    Enqueue { gpu: usize, job: usize },
}

impl Kind {
    fn rank(&self) -> u8 {
        match self {
            Kind::Done { .. } => 0,
            Kind::Cancel { .. } => 1,
            Kind::Enqueue { .. } => 2,
        }
    }
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: u64,
    rank: u8,
    req: u32,
    seq: u64,
    kind: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Front,
    Back,
    Single,
}

#[derive(Debug)]
struct Job {
    req: usize,
    model: u32,
    service_us: u64,
    role: Role,
    cancelled: bool,
    finished: bool,
}

#[derive(Debug)]
struct Running {
    job: Option<usize>,
    start: u64,
    token: u64,
}

#[derive(Debug)]
struct Gpu {
    capacity: Option<usize>,
    /// Least recently used first.
    resident: Vec<u32>,
    queue: VecDeque<usize>,
    running: Option<Running>,
    busy_us: u64,
    swaps: u64,
}

impl Gpu {
    fn new(capacity: Option<u32>, preload: impl Iterator<Item = u32>) -> Self {
        let capacity = capacity.map(|c| c as usize);
        let resident = preload.take(capacity.unwrap_or(usize::MAX)).collect();
        Gpu { capacity, resident, queue: VecDeque::new(), running: None, busy_us: 0, swaps: 0 }
    }

    /// Marks `model` most recently used and returns whether it had to be
    /// loaded.
    fn touch(&mut self, model: u32) -> bool {
        if let Some(i) = self.resident.iter().position(|&m| m == model) {
            self.resident.remove(i);
            self.resident.push(model);
            return false;
        }
        if self.capacity.is_some_and(|c| self.resident.len() >= c) {
            self.resident.remove(0);
        }
        self.resident.push(model);
        self.swaps += 1;
        true
    }
}

struct Sim<'c> {
    cfg: &'c SimConfig,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    token: u64,
    jobs: Vec<Job>,
    gpus: [Gpu; 2],
    swap_ratio: f64,
    abort_us: u64,
    cancelled_queued: u64,
    aborted_running: u64,
    /// Per request: frontend response and backend/single response arrival.
    front_resp: Vec<Option<u64>>,
    back_resp: Vec<Option<u64>>,
    /// Per request: backend job to cancel once the frontend answer is taken.
    cancel_target: Vec<Option<usize>>,
    reqs_id: Vec<u32>,
}

impl Sim<'_> {
    fn push(&mut self, time: u64, kind: Kind, req: u32) {
        self.seq += 1;
        self.heap.push(Reverse(Event { time, rank: kind.rank(), req, seq: self.seq, kind }));
    }

    fn add_job(&mut self, at: u64, gpu: usize, job: Job) -> usize {
        let id = self.jobs.len();
        let req = self.reqs_id[job.req];
        self.jobs.push(job);
        self.push(at, Kind::Enqueue { gpu, job: id }, req);
        id
    }

    fn try_start(&mut self, g: usize, now: u64) {
        if self.gpus[g].running.is_some() {
            return;
        }
        let Some(j) = self.gpus[g].queue.pop_front() else { return };
        let (model, service) = (self.jobs[j].model, self.jobs[j].service_us);
        let swap = if self.gpus[g].touch(model) { (self.swap_ratio * service as f64).round() as u64 } else { 0 };
        self.token += 1;
        let token = self.token;
        self.gpus[g].running = Some(Running { job: Some(j), start: now, token });
        let req = self.reqs_id[self.jobs[j].req];
        self.push(now + swap + service, Kind::Done { gpu: g, token }, req);
    }

    fn finish(&mut self, g: usize, job: usize, now: u64) {
        self.jobs[job].finished = true;
        let r = self.jobs[job].req;
        let cfg = self.cfg;
        match self.jobs[job].role {
            Role::Front => {
                self.front_resp[r] = Some(now + ms_to_us(cfg.edge_delay_ms));
                if let Some(b) = self.cancel_target[r] {
                    self.push(now + ms_to_us(cfg.internet_delay_ms), Kind::Cancel { job: b }, self.reqs_id[r]);
                }
            }
            Role::Back => self.back_resp[r] = Some(now + ms_to_us(cfg.internet_delay_ms)),
            Role::Single => {
                let d = if g == EDGE { cfg.edge_delay_ms } else { cfg.internet_delay_ms };
                self.back_resp[r] = Some(now + ms_to_us(d));
            }
        }
    }

    fn run(&mut self) {
        while let Some(Reverse(ev)) = self.heap.pop() {
            let now = ev.time;
            match ev.kind {
                Kind::Enqueue { gpu, job } => {
                    if !self.jobs[job].cancelled {
                        self.gpus[gpu].queue.push_back(job);
                        self.try_start(gpu, now);
                    }
                }
                Kind::Done { gpu, token } => {
                    let Some(run) = self.gpus[gpu].running.take_if(|r| r.token == token) else { continue };
                    self.gpus[gpu].busy_us += now - run.start;
                    if let Some(j) = run.job {
                        self.finish(gpu, j, now);
                    }
                    self.try_start(gpu, now);
                }
                Kind::Cancel { job } => self.cancel(job, now),
            }
        }
    }

    fn cancel(&mut self, job: usize, now: u64) {
        if self.jobs[job].finished || self.jobs[job].cancelled {
            return;
        }
        self.jobs[job].cancelled = true;
        let g = DC;
        if let Some(pos) = self.gpus[g].queue.iter().position(|&j| j == job) {
            self.gpus[g].queue.remove(pos);
            self.cancelled_queued += 1;
            return;
        }
        match &self.gpus[g].running {
            Some(r) if r.job == Some(job) => {
                self.aborted_running += 1;
                let start = r.start;
                self.gpus[g].busy_us += now - start;
                self.token += 1;
                let token = self.token;
                self.gpus[g].running = Some(Running { job: None, start: now, token });
                self.push(now + self.abort_us, Kind::Done { gpu: g, token }, self.reqs_id[self.jobs[job].req]);
            }
            // not yet enqueued; the Enqueue event will skip it
            _ => self.cancelled_queued += 1,
        }
    }
}

struct LossDraw {
    header_lost: bool,
    lost: u32,
    last_lost: bool,
}

fn draw_losses(cfg: &SimConfig, loss: LossConfig, n: usize) -> Vec<LossDraw> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let mut p = loss.process();
    (0..n)
        .map(|_| {
            let header_lost = p.next_lost(&mut rng);
            let (mut lost, mut last_lost) = (0, false);
            for i in 0..cfg.packets_per_image {
                if p.next_lost(&mut rng) {
                    lost += 1;
                    last_lost = i + 1 == cfg.packets_per_image;
                }
            }
            LossDraw { header_lost, lost, last_lost }
        })
        .collect()
}

/// Simulates one policy over a fixed request list.
pub fn run_policy(
    cfg: &SimConfig,
    policy: Policy,
    loss: LossConfig,
    reqs: &[Request],
    table: &CalibrationTable,
    view: &TraceView<'_>,
) -> Result<PolicyRun, SimError> {
    cfg.validate()?;
    let n = reqs.len();
    let draws = draw_losses(cfg, loss, n);
    let ladder = &cfg.models;
    let l = ladder.len() as u32;
    let gpus = match policy {
        Policy::Dual => [Gpu::new(cfg.gpu_memory_slots, 0..cfg.apps), Gpu::new(cfg.gpu_memory_slots, 0..cfg.apps)],
        Policy::Baseline => {
            let on = |site: Site| {
                (0..cfg.apps).flat_map(move |a| {
                    ladder.iter().enumerate().filter(move |m| m.1.site == site).map(move |(k, _)| a * l + k as u32)
                })
            };
            [Gpu::new(cfg.gpu_memory_slots, on(Site::Edge)), Gpu::new(cfg.gpu_memory_slots, on(Site::Dc))]
        }
    };
    let mut sim = Sim {
        cfg,
        heap: BinaryHeap::new(),
        seq: 0,
        token: 0,
        jobs: Vec::new(),
        gpus,
        swap_ratio: cfg.swap_ratio,
        abort_us: ms_to_us(cfg.abort_cost_ms),
        cancelled_queued: 0,
        aborted_running: 0,
        front_resp: vec![None; n],
        back_resp: vec![None; n],
        cancel_target: vec![None; n],
        reqs_id: reqs.iter().map(|r| r.id).collect(),
    };
    let edge = ms_to_us(cfg.edge_delay_ms);
    let internet = ms_to_us(cfg.internet_delay_ms);
    let mut accepted = vec![false; n];
    let mut accuracy = vec![0.0; n];
    let mut fraction = vec![0.0; n];
    for (i, (r, d)) in reqs.iter().zip(&draws).enumerate() {
        fraction[i] = d.lost as f64 / cfg.packets_per_image as f64;
        match policy {
            Policy::Dual => {
                let row0 = view.row(r.image, 0.0)?;
                let back_ms = row0.back_latency_ms.filter(|_| cfg.use_trace_latency);
                let back_service = ms_to_us(back_ms.unwrap_or(ladder[ladder.len() - 1].service_ms));
                let back = sim.add_job(
                    r.arrival_us + internet,
                    DC,
                    Job { req: i, model: r.app, service_us: back_service, role: Role::Back, cancelled: false, finished: false },
                );
                accuracy[i] = f64::from(u8::from(row0.back_correct));
                if d.header_lost {
                    continue;
                }
                let row = match table.bucket(fraction[i]) {
                    Some(b) => Some(view.row(r.image, b.loss_level)?),
                    None => None,
                };
                if let Some(row) = row {
                    let decision = arbitrate(table, r.requirement, fraction[i], row.front_confidence, &[]);
                    if matches!(decision, Ok(ArbiterDecision::FrontendAnswer { .. })) {
                        accepted[i] = true;
                        accuracy[i] = f64::from(u8::from(row.front_correct));
                        if cfg.cancel {
                            sim.cancel_target[i] = Some(back);
                        }
                    }
                }
                let front_ms = row.unwrap_or(row0).front_latency_ms.filter(|_| cfg.use_trace_latency);
                let mut ready = r.arrival_us + edge;
                if d.last_lost {
                    ready += ms_to_us(cfg.reassembly_timeout_ms);
                }
                if d.lost > 0 {
                    ready += ms_to_us(cfg.recovery_delay_ms);
                }
                let service = ms_to_us(front_ms.unwrap_or(ladder[0].service_ms));
                sim.add_job(
                    ready,
                    EDGE,
                    Job { req: i, model: r.app, service_us: service, role: Role::Front, cancelled: false, finished: false },
                );
            }
            Policy::Baseline => {
                let k = ladder.iter().position(|m| m.accuracy >= r.requirement).unwrap_or(ladder.len() - 1);
                let m = &ladder[k];
                let (gpu, mut at) = match m.site {
                    Site::Edge => (EDGE, r.arrival_us + edge),
                    Site::Dc => (DC, r.arrival_us + internet),
                };
                if gpu == EDGE && (d.header_lost || d.lost > 0) {
                    // one retransmission round trip
                    at += 2 * edge;
                }
                accepted[i] = gpu == EDGE;
                accuracy[i] = m.accuracy;
                sim.add_job(
                    at,
                    gpu,
                    Job {
                        req: i,
                        model: r.app * l + k as u32,
                        service_us: ms_to_us(m.service_ms),
                        role: Role::Single,
                        cancelled: false,
                        finished: false,
                    },
                );
            }
        }
    }
    sim.run();
    let mut records = Vec::with_capacity(n);
    for (i, r) in reqs.iter().enumerate() {
        let resp = match (policy, accepted[i]) {
            (Policy::Dual, true) => sim.front_resp[i].into_iter().chain(sim.back_resp[i]).min(),
            _ => sim.back_resp[i],
        }
        .expect("every request resolves");
        records.push(RequestRecord {
            id: r.id,
            requirement: r.requirement,
            latency_us: resp - r.arrival_us,
            frontend: accepted[i],
            header_lost: draws[i].header_lost,
            loss_fraction: fraction[i],
            accuracy: accuracy[i],
        });
    }
    let report = summarize(cfg, policy, &records, &sim);
    Ok(PolicyRun { report, records })
}

fn fraction_of(records: &[RequestRecord], f: impl Fn(&RequestRecord) -> bool) -> f64 {
    records.iter().filter(|r| f(r)).count() as f64 / records.len() as f64
}

fn summarize(cfg: &SimConfig, policy: Policy, records: &[RequestRecord], sim: &Sim<'_>) -> PolicyReport {
    let lat: Vec<u64> = records.iter().map(|r| r.latency_us).collect();
    let mut bins: BTreeMap<i64, Vec<&RequestRecord>> = BTreeMap::new();
    for r in records {
        bins.entry((r.requirement / cfg.curve_step).round() as i64).or_default().push(r);
    }
    let curve = bins
        .into_iter()
        .map(|(k, v)| {
            let owned: Vec<RequestRecord> = v.iter().map(|r| (*r).clone()).collect();
            CurvePoint {
                requirement: (k as f64 * cfg.curve_step * 1e6).round() / 1e6,
                requests: v.len(),
                latency_ms: percentiles_us(&owned.iter().map(|r| r.latency_us).collect::<Vec<_>>()),
                frontend_handled_fraction: fraction_of(&owned, |r| r.frontend),
            }
        })
        .collect();
    let edge_ms = sim.gpus[EDGE].busy_us as f64 / 1000.0;
    let dc_ms = sim.gpus[DC].busy_us as f64 / 1000.0;
    PolicyReport {
        policy,
        requests: records.len(),
        latency_ms: percentiles_us(&lat),
        frontend_handled_fraction: fraction_of(records, |r| r.frontend),
        fallback_fraction: fraction_of(records, |r| !r.frontend),
        header_loss_fraction: fraction_of(records, |r| r.header_lost),
        mean_accuracy: records.iter().map(|r| r.accuracy).sum::<f64>() / records.len() as f64,
        swap_count: sim.gpus.iter().map(|g| g.swaps).sum(),
        edge_busy_ms: edge_ms,
        dc_busy_ms: dc_ms,
        total_energy_j: (edge_ms * cfg.energy.edge_watts + dc_ms * cfg.energy.dc_watts) / 1000.0,
        cancelled_queued: sim.cancelled_queued,
        aborted_running: sim.aborted_running,
        curve,
    }
}
