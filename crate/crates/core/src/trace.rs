//! Per-image model outcome records used for calibration and simulation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace row {row}: {reason}")]
    BadRow { row: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub image_id: String,
    /// MCU-loss fraction bucket this row was measured at.
    pub loss_level: f64,
    pub front_confidence: f64,
    pub front_correct: bool,
    pub back_correct: bool,
    pub front_latency_ms: Option<f64>,
    pub back_latency_ms: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    image_id: String,
    loss_level: f64,
    front_confidence: f64,
    front_correct: u8,
    back_correct: u8,
    #[serde(default)]
    front_latency_ms: Option<f64>,
    #[serde(default)]
    back_latency_ms: Option<f64>,
}

/// Rows of (image, loss level) outcomes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelTrace {
    pub rows: Vec<TraceRow>,
}

impl ModelTrace {
    pub fn new(rows: Vec<TraceRow>) -> Self {
        ModelTrace { rows }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct loss levels, ascending.
    pub fn loss_levels(&self) -> Vec<f64> {
        let set: BTreeSet<u64> = self.rows.iter().map(|r| r.loss_level.to_bits()).collect();
        let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn at_level(&self, level: f64) -> Vec<&TraceRow> {
        self.rows.iter().filter(|r| r.loss_level == level).collect()
    }

    /// Rows indexed by image then loss level.
    pub fn index(&self) -> BTreeMap<&str, Vec<&TraceRow>> {
        let mut m: BTreeMap<&str, Vec<&TraceRow>> = BTreeMap::new();
        for r in &self.rows {
            m.entry(r.image_id.as_str()).or_default().push(r);
        }
        for v in m.values_mut() {
            v.sort_by(|a, b| a.loss_level.total_cmp(&b.loss_level));
        }
        m
    }

    pub fn read_csv(r: impl Read) -> Result<Self, TraceError> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut rows = Vec::new();
        for (i, rec) in rd.deserialize::<CsvRow>().enumerate() {
            let c = rec?;
            let flag = |v: u8, name: &str| match v {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(TraceError::BadRow { row: i + 2, reason: format!("{name} must be 0 or 1") }),
            };
            rows.push(TraceRow {
                front_correct: flag(c.front_correct, "front_correct")?,
                back_correct: flag(c.back_correct, "back_correct")?,
                image_id: c.image_id,
                loss_level: c.loss_level,
                front_confidence: c.front_confidence,
                front_latency_ms: c.front_latency_ms,
                back_latency_ms: c.back_latency_ms,
            });
        }
        Ok(ModelTrace { rows })
    }

    pub fn write_csv(&self, w: impl Write) -> Result<(), TraceError> {
        let with_latency =
            self.rows.iter().any(|r| r.front_latency_ms.is_some() || r.back_latency_ms.is_some());
        let mut wr = csv::Writer::from_writer(w);
        let mut head = vec!["image_id", "loss_level", "front_confidence", "front_correct", "back_correct"];
        if with_latency {
            head.extend(["front_latency_ms", "back_latency_ms"]);
        }
        wr.write_record(&head)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![
                r.image_id.clone(),
                r.loss_level.to_string(),
                r.front_confidence.to_string(),
                (r.front_correct as u8).to_string(),
                (r.back_correct as u8).to_string(),
            ];
            if with_latency {
                rec.push(opt(r.front_latency_ms));
                rec.push(opt(r.back_latency_ms));
            }
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// SHA-256 of the canonical CSV encoding, hex.
    pub fn digest(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        hex::encode(Sha256::digest(&buf))
    }
}
