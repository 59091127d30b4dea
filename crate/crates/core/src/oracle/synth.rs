//! Seeded synthetic prediction dumps for two models.
//!
//! Confidences are Beta-distributed conditioned on correctness, so correct
//! answers carry visibly higher confidence than wrong ones. Lossy levels
//! damage a growing share of frontend inputs: a damaged image may lose its
//! correct answer and its confidence is redrawn and scaled down.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::{Prediction, PredictionDump};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub images: usize,
    pub classes: u32,
    pub top_k: usize,
    pub loss_levels: Vec<f64>,
    pub front_accuracy: f64,
    pub back_accuracy: f64,
    /// P(backend correct | frontend correct).
    pub back_given_front_correct: f64,
    /// Beta(a, b) for confidences of correct answers.
    pub beta_correct: (f64, f64),
    /// Beta(a, b) for confidences of wrong answers.
    pub beta_incorrect: (f64, f64),
    /// A lossy image is damaged with probability min(1, damage_per_loss * loss).
    pub damage_per_loss: f64,
    /// Chance that damage turns a correct answer wrong.
    pub damage_flip: f64,
    /// Confidence multiplier for damaged images.
    pub damage_confidence_scale: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            images: 1000,
            classes: 1000,
            top_k: 5,
            loss_levels: vec![0.0, 0.001, 0.005, 0.01],
            front_accuracy: 0.7065,
            back_accuracy: 0.8217,
            back_given_front_correct: 0.95,
            beta_correct: (7.0, 1.5),
            beta_incorrect: (1.5, 4.0),
            damage_per_loss: 40.0,
            damage_flip: 0.6,
            damage_confidence_scale: 0.6,
            seed: 2025,
        }
    }
}

/// Summary written next to the generated dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthMeta {
    pub params: SynthParams,
    /// Top-1 frontend accuracy at loss 0, computed during generation.
    pub front_accuracy_top1: f64,
    pub back_accuracy_top1: f64,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// A top-k list whose first entry has probability `p1` and is `label` when
/// `correct`, otherwise some other class.
fn top_list(rng: &mut ChaCha8Rng, p: &SynthParams, label: u32, correct: bool, p1: f64) -> Vec<(f64, u32)> {
    let p1 = round6(p1.clamp(1e-6, 1.0));
    let mut labels = vec![if correct { label } else { other(rng, p.classes, &[label]) }];
    while labels.len() < p.top_k {
        // the true class turns up in the runner-up slots some of the time
        let l = if !labels.contains(&label) && rng.random_bool(0.35) {
            label
        } else {
            other(rng, p.classes, &labels)
        };
        labels.push(l);
    }
    let mut out = vec![(p1, labels[0])];
    let mut rest = 1.0 - p1;
    let mut prev = p1;
    for &l in &labels[1..] {
        let q = round6((rest * rng.random_range(0.2..0.7)).min(prev));
        out.push((q, l));
        rest -= q;
        prev = q;
    }
    out
}

fn other(rng: &mut ChaCha8Rng, classes: u32, avoid: &[u32]) -> u32 {
    loop {
        let l = rng.random_range(0..classes);
        if !avoid.contains(&l) {
            return l;
        }
    }
}

/// Frontend and backend dumps plus metadata. The backend dump holds loss-0
/// rows only.
pub fn generate(p: &SynthParams) -> (PredictionDump, PredictionDump, SynthMeta) {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let bc = Beta::new(p.beta_correct.0, p.beta_correct.1).expect("beta params");
    let bi = Beta::new(p.beta_incorrect.0, p.beta_incorrect.1).expect("beta params");
    let back_given_wrong =
        ((p.back_accuracy - p.front_accuracy * p.back_given_front_correct) / (1.0 - p.front_accuracy)).clamp(0.0, 1.0);
    let mut front = Vec::new();
    let mut back = Vec::new();
    let (mut fc, mut bcn) = (0usize, 0usize);
    for i in 0..p.images {
        let id = format!("img{i:05}");
        let label = rng.random_range(0..p.classes);
        let f_ok = rng.random_bool(p.front_accuracy);
        let conf = if f_ok { bc.sample(&mut rng) } else { bi.sample(&mut rng) };
        let b_ok = rng.random_bool(if f_ok { p.back_given_front_correct } else { back_given_wrong });
        let b_conf = if b_ok { bc.sample(&mut rng) } else { bi.sample(&mut rng) };
        fc += f_ok as usize;
        bcn += b_ok as usize;
        back.push(Prediction {
            image_id: id.clone(),
            loss_level: 0.0,
            label,
            top: top_list(&mut rng, p, label, b_ok, b_conf),
        });
        for &level in &p.loss_levels {
            let damaged = level > 0.0 && rng.random_bool((p.damage_per_loss * level).min(1.0));
            let (ok, c) = if damaged {
                let ok = f_ok && !rng.random_bool(p.damage_flip);
                let c = if ok { bc.sample(&mut rng) } else { bi.sample(&mut rng) };
                (ok, c * p.damage_confidence_scale)
            } else {
                (f_ok, conf)
            };
            front.push(Prediction {
                image_id: id.clone(),
                loss_level: level,
                label,
                top: top_list(&mut rng, p, label, ok, c),
            });
        }
    }
    let meta = SynthMeta {
        params: p.clone(),
        front_accuracy_top1: fc as f64 / p.images as f64,
        back_accuracy_top1: bcn as f64 / p.images as f64,
    };
    (PredictionDump { rows: front }, PredictionDump { rows: back }, meta)
}
