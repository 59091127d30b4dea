use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{ms_to_us, SimConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arrival {
    /// Open-loop Poisson at `rate_per_s`.
    #[default]
    Poisson,
    /// One request every 1 / `rate_per_s` seconds.
    Fixed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Requirements {
    /// iid uniform in [req_min, req_max].
    #[default]
    Uniform,
    /// Linear sweep from req_min to req_max over the run.
    Ascending,
    /// Every request asks for req_min.
    Fixed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageSelection {
    #[default]
    Uniform,
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub count: usize,
    pub arrival: Arrival,
    pub rate_per_s: f64,
    pub requirements: Requirements,
    pub req_min: f64,
    pub req_max: f64,
    pub images: ImageSelection,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            count: 4000,
            arrival: Arrival::Poisson,
            rate_per_s: 50.0,
            requirements: Requirements::Uniform,
            req_min: 0.70,
            req_max: 0.85,
            images: ImageSelection::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: u32,
    pub arrival_us: u64,
    pub app: u32,
    pub requirement: f64,
    /// Index into the sorted image ids of the trace.
    pub image: usize,
}

/// Seeded request list, ascending by arrival.
pub fn gen_workload(cfg: &SimConfig, images: usize) -> Vec<Request> {
    let w = &cfg.workload;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let exp = Exp::new(w.rate_per_s).expect("validated rate");
    let interval = ms_to_us(1000.0 / w.rate_per_s);
    let mut t_us = 0u64;
    let mut t_s = 0f64;
    let mut out = Vec::with_capacity(w.count);
    for i in 0..w.count {
        let arrival_us = match w.arrival {
            Arrival::Poisson => {
                t_s += exp.sample(&mut rng);
                ms_to_us(t_s * 1000.0)
            }
            Arrival::Fixed => {
                let t = t_us;
                t_us += interval;
                t
            }
        };
        let app = rng.random_range(0..cfg.apps);
        let requirement = match w.requirements {
            Requirements::Uniform => rng.random_range(w.req_min..=w.req_max),
            Requirements::Ascending if w.count > 1 => {
                w.req_min + (w.req_max - w.req_min) * i as f64 / (w.count - 1) as f64
            }
            Requirements::Ascending | Requirements::Fixed => w.req_min,
        };
        let image = match w.images {
            ImageSelection::Uniform => rng.random_range(0..images),
            ImageSelection::RoundRobin => i % images,
        };
        out.push(Request { id: i as u32, arrival_us, app, requirement, image });
    }
    out
}
