use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::trace::ModelTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    ConfidenceRange,
    LossLevelRange,
    DuplicateKey,
    MissingLossZero,
    MissingLossLevel,
    NegativeLatency,
    EmptyTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub image_id: Option<String>,
    pub loss_level: Option<f64>,
    pub detail: String,
}

/// Mean frontend confidence split by frontend correctness, at loss 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub mean_confidence_correct: f64,
    pub mean_confidence_incorrect: f64,
    pub separated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: usize,
    pub images: usize,
    pub loss_levels: Vec<f64>,
    pub violations: Vec<Violation>,
    pub separation: Option<Separation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a trace's structural rules. Problems are returned as data.
pub fn validate_trace(trace: &ModelTrace) -> ValidationReport {
    let mut v = Vec::new();
    let levels = trace.loss_levels();
    if trace.is_empty() {
        v.push(Violation {
            kind: ViolationKind::EmptyTrace,
            image_id: None,
            loss_level: None,
            detail: "trace has no rows".into(),
        });
    }
    let mut seen: BTreeMap<&str, BTreeSet<u64>> = BTreeMap::new();
    for r in &trace.rows {
        let at = |kind, detail: String| Violation {
            kind,
            image_id: Some(r.image_id.clone()),
            loss_level: Some(r.loss_level),
            detail,
        };
        if !(0.0..=1.0).contains(&r.front_confidence) {
            v.push(at(ViolationKind::ConfidenceRange, format!("front_confidence {} outside [0, 1]", r.front_confidence)));
        }
        if !(0.0..=1.0).contains(&r.loss_level) {
            v.push(at(ViolationKind::LossLevelRange, format!("loss_level {} outside [0, 1]", r.loss_level)));
        }
        for (name, l) in [("front_latency_ms", r.front_latency_ms), ("back_latency_ms", r.back_latency_ms)] {
            if l.is_some_and(|x| x.is_nan() || x < 0.0) {
                v.push(at(ViolationKind::NegativeLatency, format!("{name} {}", l.unwrap())));
            }
        }
        if !seen.entry(&r.image_id).or_default().insert(r.loss_level.to_bits()) {
            v.push(at(ViolationKind::DuplicateKey, "duplicate (image_id, loss_level) row".into()));
        }
    }
    for (id, have) in &seen {
        if !have.contains(&0f64.to_bits()) {
            v.push(Violation {
                kind: ViolationKind::MissingLossZero,
                image_id: Some(id.to_string()),
                loss_level: Some(0.0),
                detail: "no loss-0 row".into(),
            });
        }
        for &l in &levels {
            if l != 0.0 && !have.contains(&l.to_bits()) {
                v.push(Violation {
                    kind: ViolationKind::MissingLossLevel,
                    image_id: Some(id.to_string()),
                    loss_level: Some(l),
                    detail: "loss level present elsewhere in the trace is missing".into(),
                });
            }
        }
    }
    ValidationReport {
        rows: trace.rows.len(),
        images: seen.len(),
        loss_levels: levels,
        violations: v,
        separation: separation(trace),
    }
}

fn separation(trace: &ModelTrace) -> Option<Separation> {
    let (mut sc, mut nc, mut si, mut ni) = (0.0, 0usize, 0.0, 0usize);
    for r in trace.rows.iter().filter(|r| r.loss_level == 0.0) {
        if r.front_correct {
            sc += r.front_confidence;
            nc += 1;
        } else {
            si += r.front_confidence;
            ni += 1;
        }
    }
    if nc == 0 || ni == 0 {
        return None;
    }
    let (c, i) = (sc / nc as f64, si / ni as f64);
    Some(Separation { mean_confidence_correct: c, mean_confidence_incorrect: i, separated: c > i })
}
