//! Receiver-side reassembly and repair of lossy JPEG deliveries.
//!
//! Packets are filed per MCU block. At finalize time every complete block
//! is kept, broken blocks are dropped (or, in bit mode, trimmed to the MCUs
//! that fully arrived), survivors are spliced back to back, and one recovery
//! MCU per lost MCU is written so a stock decoder sees the MCU count the
//! header promises.

mod bridge;
mod harness;
mod mcu;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jpeg::{JpegHeader, McuSpan, McuWalker, ScanWriter, Unstuffed};
use crate::wire::{MsgType, Packet, PacketHeader, WireError};

pub use bridge::bridge_bits;
pub use harness::{drop_first_n, DropCase, DropComparison};
pub use mcu::{make_recovery_mcu, RecoveryMcu, RecoveryState};

/// Default wait after the first packet before finalizing anyway.
pub const DEFAULT_TIMEOUT_US: u64 = 20_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecoveryError {
    #[error("request {0} already finalized")]
    StaleRequest(u32),
    #[error("packet for request {got} delivered to request {expected}")]
    WrongRequest { expected: u32, got: u32 },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("conflicting packet: {0}")]
    Conflict(&'static str),
    #[error("no {class} Huffman table {id} usable for a recovery MCU")]
    MissingTable { class: &'static str, id: u8 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryMode {
    /// Keep complete blocks only.
    #[default]
    Block,
    /// Also keep the fully received MCUs at the start of broken blocks.
    Bit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// All recovery MCUs after the last surviving MCU.
    #[default]
    Tail,
    /// Recovery MCUs where the lost MCUs were.
    InPlace,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub mode: RecoveryMode,
    pub placement: Placement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Intact,
    Recovered,
    HeaderLost,
    Unrecoverable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredJpeg {
    #[serde(skip)]
    pub bytes: Vec<u8>,
    pub lost_mcu_total: u64,
    pub loss_fraction: f64,
    pub outcome: Outcome,
    /// 0 when the header never arrived.
    pub mcu_count_expected: u64,
    /// MCUs kept from incomplete blocks (bit mode only).
    pub salvaged_mcus: u64,
}

impl RecoveredJpeg {
    fn failed(outcome: Outcome, expected: u64) -> Self {
        RecoveredJpeg {
            bytes: Vec::new(),
            lost_mcu_total: expected,
            loss_fraction: 1.0,
            outcome,
            mcu_count_expected: expected,
            salvaged_mcus: 0,
        }
    }

    pub fn is_decodable(&self) -> bool {
        matches!(self.outcome, Outcome::Intact | Outcome::Recovered)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Parts {
    partition_num: u8,
    start_mcu: u32,
    end_mcu: u32,
    parts: BTreeMap<u8, Vec<u8>>,
}

impl Parts {
    fn complete(&self) -> bool {
        self.parts.len() == self.partition_num as usize
    }

    fn concat(&self) -> Vec<u8> {
        self.parts.values().flatten().copied().collect()
    }

    /// Payloads of partitions 0, 1, ... up to the first gap.
    fn prefix(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (i, (&idx, p)) in self.parts.iter().enumerate() {
            if idx as usize != i {
                break;
            }
            out.extend_from_slice(p);
        }
        out
    }
}

/// Per-request receive buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReassemblyState {
    pub request_id: u32,
    header: Option<Parts>,
    blocks: BTreeMap<u32, Parts>,
    last_block: Option<u32>,
    recoverable: Option<bool>,
    first_arrival_us: Option<u64>,
    timeout_us: u64,
    finalized: bool,
}

impl ReassemblyState {
    pub fn new(request_id: u32) -> Self {
        Self::with_timeout(request_id, DEFAULT_TIMEOUT_US)
    }

    pub fn with_timeout(request_id: u32, timeout_us: u64) -> Self {
        ReassemblyState {
            request_id,
            header: None,
            blocks: BTreeMap::new(),
            last_block: None,
            recoverable: None,
            first_arrival_us: None,
            timeout_us,
            finalized: false,
        }
    }

    pub fn saw_last(&self) -> bool {
        self.last_block.is_some()
    }

    /// Time after which finalize should run even without the last packet.
    pub fn deadline_us(&self) -> Option<u64> {
        self.first_arrival_us.map(|t| t + self.timeout_us)
    }

    /// True once the last packet arrived or the deadline passed.
    pub fn ready(&self, now_us: u64) -> bool {
        self.saw_last() || self.deadline_us().is_some_and(|d| now_us >= d)
    }

    /// Files a packet received at `now_us`.
    pub fn ingest_at(&mut self, now_us: u64, p: &Packet) -> Result<(), RecoveryError> {
        self.ingest(&p.header, &p.payload)?;
        self.first_arrival_us.get_or_insert(now_us);
        Ok(())
    }

    /// Files one DATA packet. Duplicates are ignored; a duplicate whose
    /// contents differ is a conflict.
    pub fn ingest(&mut self, h: &PacketHeader, payload: &[u8]) -> Result<(), RecoveryError> {
        if self.finalized {
            return Err(RecoveryError::StaleRequest(self.request_id));
        }
        if h.request_id != self.request_id {
            return Err(RecoveryError::WrongRequest { expected: self.request_id, got: h.request_id });
        }
        h.validate()?;
        if h.msg_type != MsgType::Data {
            return Err(WireError::InvariantViolation("only DATA packets carry image bytes").into());
        }
        if payload.len() != h.payload_len as usize {
            return Err(WireError::InvariantViolation("payload_len matches payload").into());
        }
        match self.recoverable {
            Some(r) if r != h.flags.recoverable => {
                return Err(RecoveryError::Conflict("recoverable flag differs between packets"))
            }
            _ => self.recoverable = Some(h.flags.recoverable),
        }
        let slot = if h.flags.is_jpeg_header {
            &mut self.header
        } else {
            if h.flags.is_last {
                match self.last_block {
                    Some(b) if b != h.block_num => {
                        return Err(RecoveryError::Conflict("two different last blocks"))
                    }
                    _ => self.last_block = Some(h.block_num),
                }
            }
            self.blocks.entry(h.block_num).or_insert_with(|| Parts {
                partition_num: h.partition_num,
                start_mcu: h.start_mcu,
                end_mcu: h.end_mcu,
                parts: BTreeMap::new(),
            });
            let b = self.blocks.get_mut(&h.block_num).unwrap();
            if (b.partition_num, b.start_mcu, b.end_mcu) != (h.partition_num, h.start_mcu, h.end_mcu) {
                return Err(RecoveryError::Conflict("block metadata differs between partitions"));
            }
            match b.parts.get(&h.partition_idx) {
                Some(old) if old != payload => {
                    return Err(RecoveryError::Conflict("duplicate partition with different payload"))
                }
                Some(_) => {}
                None => {
                    b.parts.insert(h.partition_idx, payload.to_vec());
                }
            }
            return Ok(());
        };
        let hp = slot.get_or_insert_with(|| Parts {
            partition_num: h.partition_num,
            start_mcu: h.start_mcu,
            end_mcu: h.end_mcu,
            parts: BTreeMap::new(),
        });
        if hp.partition_num != h.partition_num {
            return Err(RecoveryError::Conflict("header partition counts differ"));
        }
        match hp.parts.get(&h.partition_idx) {
            Some(old) if old != payload => {
                Err(RecoveryError::Conflict("duplicate partition with different payload"))
            }
            Some(_) => Ok(()),
            None => {
                hp.parts.insert(h.partition_idx, payload.to_vec());
                Ok(())
            }
        }
    }

    /// Builds the output image from whatever has arrived. Further calls to
    /// `ingest` or `finalize` fail with `StaleRequest`.
    pub fn finalize(&mut self, opts: RecoveryOptions) -> Result<RecoveredJpeg, RecoveryError> {
        if self.finalized {
            return Err(RecoveryError::StaleRequest(self.request_id));
        }
        self.finalized = true;
        let header_bytes = match &self.header {
            Some(p) if p.complete() => p.concat(),
            _ => return Ok(RecoveredJpeg::failed(Outcome::HeaderLost, 0)),
        };
        let header = match JpegHeader::parse(&header_bytes) {
            Ok(h) if h.header_len == header_bytes.len() => h,
            _ => return Ok(RecoveredJpeg::failed(Outcome::HeaderLost, 0)),
        };
        let expected = header.mcu_count_expected();
        if let Some(bytes) = self.intact(&header_bytes, expected) {
            return Ok(RecoveredJpeg {
                bytes,
                lost_mcu_total: 0,
                loss_fraction: 0.0,
                outcome: Outcome::Intact,
                mcu_count_expected: expected,
                salvaged_mcus: 0,
            });
        }
        if self.recoverable != Some(true) {
            return Ok(RecoveredJpeg::failed(Outcome::Unrecoverable, expected));
        }
        let rec = match make_recovery_mcu(&header) {
            Ok(r) => r,
            Err(_) => return Ok(RecoveredJpeg::failed(Outcome::Unrecoverable, expected)),
        };
        let pieces = self.surviving_pieces(&header, expected, opts.mode);
        let salvaged = pieces.iter().filter(|p| !p.whole).map(|p| p.spans.len() as u64).sum();
        let surviving: u64 = pieces.iter().map(|p| p.spans.len() as u64).sum();
        let lost = expected - surviving;

        let mut w = ScanWriter::with_restarts(header.restart_interval, expected);
        let mut rs = RecoveryState::default();
        match opts.placement {
            Placement::Tail => {
                for p in &pieces {
                    for s in &p.spans {
                        w.copy_bits(&p.data, s.start, s.end);
                        w.end_mcu();
                    }
                }
                for _ in 0..lost {
                    rec.write(&mut w, &mut rs);
                    w.end_mcu();
                }
            }
            Placement::InPlace => {
                let mut m = 0u64;
                for p in &pieces {
                    while m < p.first {
                        rec.write(&mut w, &mut rs);
                        w.end_mcu();
                        m += 1;
                    }
                    for s in &p.spans {
                        w.copy_bits(&p.data, s.start, s.end);
                        w.end_mcu();
                        m += 1;
                    }
                }
                while m < expected {
                    rec.write(&mut w, &mut rs);
                    w.end_mcu();
                    m += 1;
                }
            }
        }
        let mut bytes = header_bytes;
        bytes.extend_from_slice(&w.finish());
        bytes.extend_from_slice(&[0xFF, 0xD9]);
        Ok(RecoveredJpeg {
            bytes,
            lost_mcu_total: lost,
            loss_fraction: if expected == 0 { 0.0 } else { lost as f64 / expected as f64 },
            outcome: Outcome::Recovered,
            mcu_count_expected: expected,
            salvaged_mcus: salvaged,
        })
    }

    /// The original file, when every block 1..=last arrived and the blocks
    /// tile all expected MCUs.
    fn intact(&self, header_bytes: &[u8], expected: u64) -> Option<Vec<u8>> {
        let last = self.last_block?;
        if self.blocks.len() != last as usize || self.blocks.keys().next() != Some(&1) {
            return None;
        }
        let mut next = 0u64;
        for b in self.blocks.values() {
            if !b.complete() || b.start_mcu as u64 != next {
                return None;
            }
            next = b.end_mcu as u64 + 1;
        }
        if next != expected {
            return None;
        }
        let mut out = header_bytes.to_vec();
        for b in self.blocks.values() {
            out.extend(b.parts.values().flatten());
        }
        Some(out)
    }

    fn surviving_pieces(&self, header: &JpegHeader, expected: u64, mode: RecoveryMode) -> Vec<Piece> {
        let walker = McuWalker::new(header);
        let mut out = Vec::new();
        let mut covered = 0u64;
        for b in self.blocks.values() {
            let (first, count) = (b.start_mcu as u64, b.mcu_count());
            if first < covered || first + count > expected {
                continue;
            }
            let whole = b.complete();
            let bytes = match (whole, mode) {
                (true, _) => b.concat(),
                (false, RecoveryMode::Bit) => b.prefix(),
                (false, RecoveryMode::Block) => continue,
            };
            if bytes.is_empty() {
                continue;
            }
            let data = Unstuffed::new(&bytes);
            let (spans, fault) = walker.walk(&data, first, count);
            if spans.is_empty() || (whole && fault.is_some() && mode == RecoveryMode::Block) {
                continue;
            }
            covered = first + spans.len() as u64;
            out.push(Piece { first, whole: whole && fault.is_none(), data, spans });
        }
        out
    }
}

impl Parts {
    fn mcu_count(&self) -> u64 {
        self.end_mcu as u64 - self.start_mcu as u64 + 1
    }
}

struct Piece {
    first: u64,
    whole: bool,
    data: Unstuffed,
    spans: Vec<McuSpan>,
}

/// Reassembles one request from an arbitrary packet sequence.
pub fn recover_packets<'a>(
    request_id: u32,
    packets: impl IntoIterator<Item = &'a Packet>,
    opts: RecoveryOptions,
) -> Result<RecoveredJpeg, RecoveryError> {
    let mut st = ReassemblyState::new(request_id);
    for p in packets {
        st.ingest(&p.header, &p.payload)?;
    }
    st.finalize(opts)
}
