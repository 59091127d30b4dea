//! Building and checking model traces from raw prediction dumps.
//!
//! A prediction dump is a CSV with one row per (image, loss level):
//! `image_id,loss_level,label,p1,l1,...,pk,lk`, where `label` is the ground
//! truth and the (probability, label) pairs are sorted by descending
//! probability.

pub mod synth;
mod validate;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{ModelTrace, TraceRow};

pub use validate::{validate_trace, Separation, ValidationReport, Violation, ViolationKind};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dump csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("dump row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("image {image_id}: {reason}")]
    IdMismatch { image_id: String, reason: String },
    #[error("image {image_id} at loss {loss_level}: {k} predictions, top-{n} needs {n}")]
    ShortVector { image_id: String, loss_level: f64, k: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub image_id: String,
    pub loss_level: f64,
    /// Ground-truth label.
    pub label: u32,
    /// (probability, label), descending by probability.
    pub top: Vec<(f64, u32)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionDump {
    pub rows: Vec<Prediction>,
}

impl PredictionDump {
    pub fn read_csv(r: impl Read) -> Result<Self, OracleError> {
        let mut rd = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(r);
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |reason: String| OracleError::BadRow { row: line, reason };
            if rec.len() < 3 || (rec.len() - 3) % 2 != 0 {
                return Err(bad(format!("{} fields; expected 3 plus (p, l) pairs", rec.len())));
            }
            let num = |j: usize| rec[j].parse::<f64>().map_err(|e| bad(format!("field {}: {e}", j + 1)));
            let lab = |j: usize| rec[j].parse::<u32>().map_err(|e| bad(format!("field {}: {e}", j + 1)));
            let mut top = Vec::with_capacity((rec.len() - 3) / 2);
            for j in (3..rec.len()).step_by(2) {
                top.push((num(j)?, lab(j + 1)?));
            }
            if top.windows(2).any(|w| w[0].0 < w[1].0) {
                return Err(bad("probabilities not in descending order".into()));
            }
            rows.push(Prediction { image_id: rec[0].to_string(), loss_level: num(1)?, label: lab(2)?, top });
        }
        Ok(PredictionDump { rows })
    }

    pub fn write_csv(&self, w: impl Write) -> Result<(), OracleError> {
        let k = self.rows.iter().map(|r| r.top.len()).max().unwrap_or(0);
        let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
        let mut head: Vec<String> = vec!["image_id".into(), "loss_level".into(), "label".into()];
        for i in 1..=k {
            head.push(format!("p{i}"));
            head.push(format!("l{i}"));
        }
        wr.write_record(&head)?;
        for r in &self.rows {
            let mut rec = vec![r.image_id.clone(), r.loss_level.to_string(), r.label.to_string()];
            for &(p, l) in &r.top {
                rec.push(p.to_string());
                rec.push(l.to_string());
            }
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Confidence of a top-`n` answer: the n-th largest probability.
pub fn nth_confidence(top: &[(f64, u32)], n: usize) -> Option<f64> {
    top.get(n.checked_sub(1)?).map(|p| p.0)
}

/// Ground truth among the first `n` predicted labels.
pub fn top_n_correct(top: &[(f64, u32)], label: u32, n: usize) -> bool {
    top.iter().take(n).any(|p| p.1 == label)
}

/// Joins frontend and backend dumps into a trace.
///
/// Every frontend row becomes one trace row. Backend correctness comes from
/// the backend's loss-0 row for the same image, since the backend always
/// receives the intact image. Both dumps must agree on ground truth.
pub fn build_trace(front: &PredictionDump, back: &PredictionDump, n: usize) -> Result<ModelTrace, OracleError> {
    let mut back_ok: BTreeMap<&str, (u32, bool)> = BTreeMap::new();
    for b in back.rows.iter().filter(|b| b.loss_level == 0.0) {
        if b.top.len() < n {
            return Err(OracleError::ShortVector {
                image_id: b.image_id.clone(),
                loss_level: b.loss_level,
                k: b.top.len(),
                n,
            });
        }
        if back_ok.insert(&b.image_id, (b.label, top_n_correct(&b.top, b.label, n))).is_some() {
            return Err(OracleError::IdMismatch {
                image_id: b.image_id.clone(),
                reason: "duplicate backend row at loss 0".into(),
            });
        }
    }
    let mut rows = Vec::with_capacity(front.rows.len());
    for f in &front.rows {
        let conf = nth_confidence(&f.top, n).ok_or_else(|| OracleError::ShortVector {
            image_id: f.image_id.clone(),
            loss_level: f.loss_level,
            k: f.top.len(),
            n,
        })?;
        let &(label, back_correct) = back_ok.get(f.image_id.as_str()).ok_or_else(|| OracleError::IdMismatch {
            image_id: f.image_id.clone(),
            reason: "no backend row at loss 0".into(),
        })?;
        if label != f.label {
            return Err(OracleError::IdMismatch {
                image_id: f.image_id.clone(),
                reason: format!("ground truth {} in frontend dump, {} in backend dump", f.label, label),
            });
        }
        rows.push(TraceRow {
            image_id: f.image_id.clone(),
            loss_level: f.loss_level,
            front_confidence: conf,
            front_correct: top_n_correct(&f.top, f.label, n),
            back_correct,
            front_latency_ms: None,
            back_latency_ms: None,
        });
    }
    Ok(ModelTrace::new(rows))
}

#[cfg(test)]
mod tests;
