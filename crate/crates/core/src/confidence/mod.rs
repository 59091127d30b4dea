//! Confidence-threshold calibration and the per-request arbiter.
//!
//! The frontend answers a request itself when its confidence is at or above
//! a threshold and defers to the backend otherwise. For an accuracy
//! requirement A the calibrated threshold is the smallest candidate whose
//! end-to-end accuracy on the calibration trace is at least A, which keeps
//! as much traffic on the frontend as the requirement allows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{ModelTrace, TraceRow};

/// Threshold that no confidence in [0, 1] reaches: everything goes to the
/// backend.
pub const ALL_BACKEND: f64 = 1.0 + f64::EPSILON;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfidenceError {
    #[error("trace has no rows")]
    EmptyTrace,
    #[error("accuracy requirement {0} outside [0, 1]")]
    BadRequirement(f64),
    #[error("requirement {0} cannot be met even with every request on the backend")]
    UnsatisfiableRequirement(f64),
    #[error("requirement {0} is above every calibrated requirement")]
    NotCalibrated(f64),
}

/// (confidence, frontend correct, backend correct)
pub type Outcome3 = (f64, bool, bool);

fn outcomes(rows: &[&TraceRow]) -> Vec<Outcome3> {
    rows.iter().map(|r| (r.front_confidence, r.front_correct, r.back_correct)).collect()
}

/// End-to-end accuracy when rows with confidence >= `t` are answered by the
/// frontend and the rest by the backend.
pub fn combined_accuracy(rows: &[Outcome3], t: f64) -> Result<f64, ConfidenceError> {
    if rows.is_empty() {
        return Err(ConfidenceError::EmptyTrace);
    }
    let correct = rows.iter().filter(|&&(c, f, b)| if c >= t { f } else { b }).count();
    Ok(correct as f64 / rows.len() as f64)
}

/// Combined accuracy of every candidate threshold, computed from prefix
/// sums over rows sorted by confidence.
#[derive(Debug, Clone)]
pub struct ThresholdCurve {
    n: usize,
    /// Ascending: 0, distinct confidences, ALL_BACKEND.
    pub candidates: Vec<f64>,
    /// Correct answers at each candidate.
    pub correct: Vec<usize>,
    /// Rows the frontend answers at each candidate.
    pub handled: Vec<usize>,
}

impl ThresholdCurve {
    pub fn new(rows: &[Outcome3]) -> Result<Self, ConfidenceError> {
        if rows.is_empty() {
            return Err(ConfidenceError::EmptyTrace);
        }
        let mut sorted: Vec<Outcome3> = rows.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = sorted.len();
        let front_total = sorted.iter().filter(|r| r.1).count();
        let mut candidates: Vec<f64> = std::iter::once(0.0)
            .chain(sorted.iter().map(|r| r.0).filter(|c| (0.0..=1.0).contains(c)))
            .chain(std::iter::once(ALL_BACKEND))
            .collect();
        candidates.dedup();
        let (mut correct, mut handled) = (Vec::new(), Vec::new());
        // Rows below the current candidate, and how many of them each model
        // gets right.
        let (mut i, mut below_back, mut below_front) = (0usize, 0usize, 0usize);
        for &t in &candidates {
            while i < n && sorted[i].0 < t {
                below_back += sorted[i].2 as usize;
                below_front += sorted[i].1 as usize;
                i += 1;
            }
            correct.push(below_back + front_total - below_front);
            handled.push(n - i);
        }
        Ok(ThresholdCurve { n, candidates, correct, handled })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn accuracy(&self, k: usize) -> f64 {
        self.correct[k] as f64 / self.n as f64
    }

    pub fn frontend_fraction(&self, k: usize) -> f64 {
        self.handled[k] as f64 / self.n as f64
    }

    /// Index of the smallest candidate meeting `a`.
    pub fn first_meeting(&self, a: f64) -> Option<usize> {
        (0..self.candidates.len()).find(|&k| self.accuracy(k) >= a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub requirement: f64,
    /// ALL_BACKEND when unsatisfiable.
    pub threshold: f64,
    pub predicted_frontend_fraction: f64,
    pub predicted_accuracy: f64,
    pub satisfiable: bool,
}

/// Thresholds for one loss bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketTable {
    pub loss_level: f64,
    pub rows: usize,
    /// Ascending by requirement.
    pub entries: Vec<CalibrationEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    /// SHA-256 of the calibration trace.
    pub provenance: String,
    /// Ascending by loss level.
    pub buckets: Vec<BucketTable>,
}

/// Calibrates one set of rows.
pub fn calibrate_rows(rows: &[Outcome3], requirements: &[f64]) -> Result<Vec<CalibrationEntry>, ConfidenceError> {
    let curve = ThresholdCurve::new(rows)?;
    let mut reqs = requirements.to_vec();
    for &a in &reqs {
        if !(0.0..=1.0).contains(&a) {
            return Err(ConfidenceError::BadRequirement(a));
        }
    }
    reqs.sort_by(f64::total_cmp);
    reqs.dedup();
    Ok(reqs
        .into_iter()
        .map(|a| match curve.first_meeting(a) {
            Some(k) => CalibrationEntry {
                requirement: a,
                threshold: curve.candidates[k],
                predicted_frontend_fraction: curve.frontend_fraction(k),
                predicted_accuracy: curve.accuracy(k),
                satisfiable: true,
            },
            None => {
                let k = curve.candidates.len() - 1;
                CalibrationEntry {
                    requirement: a,
                    threshold: ALL_BACKEND,
                    predicted_frontend_fraction: 0.0,
                    predicted_accuracy: curve.accuracy(k),
                    satisfiable: false,
                }
            }
        })
        .collect())
}

/// One table per loss level present in the trace.
pub fn calibrate(trace: &ModelTrace, requirements: &[f64]) -> Result<CalibrationTable, ConfidenceError> {
    if trace.is_empty() {
        return Err(ConfidenceError::EmptyTrace);
    }
    let mut buckets = Vec::new();
    for level in trace.loss_levels() {
        let rows = outcomes(&trace.at_level(level));
        buckets.push(BucketTable { loss_level: level, rows: rows.len(), entries: calibrate_rows(&rows, requirements)? });
    }
    Ok(CalibrationTable { provenance: trace.digest(), buckets })
}

impl CalibrationTable {
    /// The bucket for an observed loss fraction: the smallest level at or
    /// above it. None when the loss exceeds every calibrated level.
    pub fn bucket(&self, loss_fraction: f64) -> Option<&BucketTable> {
        self.buckets.iter().find(|b| b.loss_level >= loss_fraction)
    }

    /// Entry for requirement `a`: exact match or the nearest larger one.
    pub fn entry(&self, loss_fraction: f64, a: f64) -> Option<Result<&CalibrationEntry, ConfidenceError>> {
        let b = self.bucket(loss_fraction)?;
        Some(b.entry(a))
    }
}

impl BucketTable {
    pub fn entry(&self, a: f64) -> Result<&CalibrationEntry, ConfidenceError> {
        let e = self.entries.iter().find(|e| e.requirement >= a).ok_or(ConfidenceError::NotCalibrated(a))?;
        if e.satisfiable {
            Ok(e)
        } else {
            Err(ConfidenceError::UnsatisfiableRequirement(a))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum ArbiterDecision {
    FrontendAnswer { labels: Vec<u32>, confidence: f64, threshold: f64 },
    /// `threshold` is None when the loss exceeded every calibrated bucket.
    Fallback { threshold: Option<f64> },
}

impl ArbiterDecision {
    pub fn is_frontend(&self) -> bool {
        matches!(self, ArbiterDecision::FrontendAnswer { .. })
    }
}

/// Decides whether the frontend's answer is good enough for requirement `a`
/// given the image's observed MCU-loss fraction.
pub fn arbitrate(
    table: &CalibrationTable,
    a: f64,
    loss_fraction: f64,
    confidence: f64,
    labels: &[u32],
) -> Result<ArbiterDecision, ConfidenceError> {
    let Some(entry) = table.entry(loss_fraction, a) else {
        return Ok(ArbiterDecision::Fallback { threshold: None });
    };
    let t = entry?.threshold;
    Ok(if confidence >= t {
        ArbiterDecision::FrontendAnswer { labels: labels.to_vec(), confidence, threshold: t }
    } else {
        ArbiterDecision::Fallback { threshold: Some(t) }
    })
}

#[cfg(test)]
mod tests;
