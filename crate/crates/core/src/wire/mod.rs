//! Datagram format for lossy JPEG delivery.
//!
//! Every datagram starts with a fixed 26-byte big-endian header:
//!
//! ```text
//!  0-1   magic 0xD1AE
//!  2     version 1
//!  3     msg_type (0 DATA, 1 RESULT, 2 CANCEL)
//!  4     flags: bit0 is_jpeg_header, bit1 is_last, bit2 has_next_partition,
//!        bit3 recoverable, bits 4-7 zero
//!  5-8   request_id
//!  9-12  start_mcu
//!  13-16 end_mcu
//!  17-20 block_num
//!  21    partition_num
//!  22    partition_idx
//!  23    reserved, zero
//!  24-25 payload_len
//!  26..  payload
//! ```

mod build;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{build_packets, RequestDatagramSet};

pub const MAGIC: u16 = 0xD1AE;
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 26;
/// start_mcu/end_mcu value carried by JPEG header packets.
pub const HEADER_SENTINEL: u32 = u32::MAX;
pub const MIN_MTU_PAYLOAD: usize = 64;
pub const DEFAULT_MTU_PAYLOAD: usize = 1200;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("bad magic 0x{0:04X}")]
    BadMagic(u16),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown message type {0}")]
    UnknownMsgType(u8),
    #[error("datagram truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("invariant violated: {0}")]
    InvariantViolation(&'static str),
    #[error("mtu payload {0} outside [{MIN_MTU_PAYLOAD}, 65535]")]
    MtuOutOfRange(usize),
    #[error("JPEG header needs {0} packets, more than 255")]
    HeaderTooLarge(usize),
    #[error("block {block} needs {packets} packets, more than 255")]
    PayloadOverflow { block: u32, packets: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MsgType {
    Data = 0,
    Result = 1,
    Cancel = 2,
}

impl MsgType {
    fn from_u8(v: u8) -> Result<Self, WireError> {
        match v {
            0 => Ok(MsgType::Data),
            1 => Ok(MsgType::Result),
            2 => Ok(MsgType::Cancel),
            other => Err(WireError::UnknownMsgType(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flags {
    pub is_jpeg_header: bool,
    pub is_last: bool,
    pub has_next_partition: bool,
    pub recoverable: bool,
}

impl Flags {
    pub fn to_byte(self) -> u8 {
        self.is_jpeg_header as u8
            | (self.is_last as u8) << 1
            | (self.has_next_partition as u8) << 2
            | (self.recoverable as u8) << 3
    }

    pub fn from_byte(b: u8) -> Result<Self, WireError> {
        if b & 0xF0 != 0 {
            return Err(WireError::InvariantViolation("flag bits 4-7 must be zero"));
        }
        Ok(Flags {
            is_jpeg_header: b & 1 != 0,
            is_last: b & 2 != 0,
            has_next_partition: b & 4 != 0,
            recoverable: b & 8 != 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PacketHeader {
    pub msg_type: MsgType,
    pub flags: Flags,
    pub request_id: u32,
    pub start_mcu: u32,
    /// Inclusive.
    pub end_mcu: u32,
    pub block_num: u32,
    pub partition_num: u8,
    pub partition_idx: u8,
    pub payload_len: u16,
}

impl PacketHeader {
    /// Checks the cross-field rules every header must satisfy.
    pub fn validate(&self) -> Result<(), WireError> {
        use WireError::InvariantViolation as V;
        if self.partition_num == 0 {
            return Err(V("partition_num >= 1"));
        }
        if self.partition_idx >= self.partition_num {
            return Err(V("partition_idx < partition_num"));
        }
        let f = self.flags;
        match self.msg_type {
            MsgType::Data => {
                if f.has_next_partition != (self.partition_idx + 1 < self.partition_num) {
                    return Err(V("has_next_partition set exactly on non-final partitions"));
                }
                if f.is_jpeg_header {
                    if self.block_num != 0 {
                        return Err(V("is_jpeg_header implies block_num = 0"));
                    }
                    if self.start_mcu != HEADER_SENTINEL || self.end_mcu != HEADER_SENTINEL {
                        return Err(V("is_jpeg_header implies start_mcu = end_mcu = 0xFFFFFFFF"));
                    }
                    if f.is_last {
                        return Err(V("is_last never set on a JPEG header packet"));
                    }
                } else {
                    if self.block_num == 0 {
                        return Err(V("data block_num >= 1"));
                    }
                    if self.start_mcu > self.end_mcu {
                        return Err(V("start_mcu <= end_mcu"));
                    }
                    if f.is_last && f.has_next_partition {
                        return Err(V("is_last only on the final partition of a block"));
                    }
                }
            }
            MsgType::Result | MsgType::Cancel => {
                if f != Flags::default() {
                    return Err(V("control messages carry no flags"));
                }
                if self.partition_num != 1
                    || self.block_num != 0
                    || self.start_mcu != 0
                    || self.end_mcu != 0
                {
                    return Err(V("control messages use a single zero block"));
                }
                if self.msg_type == MsgType::Cancel && self.payload_len != 0 {
                    return Err(V("CANCEL carries no payload"));
                }
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<[u8; HEADER_LEN], WireError> {
        self.validate()?;
        let mut b = [0u8; HEADER_LEN];
        b[0..2].copy_from_slice(&MAGIC.to_be_bytes());
        b[2] = VERSION;
        b[3] = self.msg_type as u8;
        b[4] = self.flags.to_byte();
        b[5..9].copy_from_slice(&self.request_id.to_be_bytes());
        b[9..13].copy_from_slice(&self.start_mcu.to_be_bytes());
        b[13..17].copy_from_slice(&self.end_mcu.to_be_bytes());
        b[17..21].copy_from_slice(&self.block_num.to_be_bytes());
        b[21] = self.partition_num;
        b[22] = self.partition_idx;
        b[24..26].copy_from_slice(&self.payload_len.to_be_bytes());
        Ok(b)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < HEADER_LEN {
            return Err(WireError::Truncated { need: HEADER_LEN, have: bytes.len() });
        }
        let u32_at = |i: usize| u32::from_be_bytes(bytes[i..i + 4].try_into().unwrap());
        let magic = u16::from_be_bytes([bytes[0], bytes[1]]);
        if magic != MAGIC {
            return Err(WireError::BadMagic(magic));
        }
        if bytes[2] != VERSION {
            return Err(WireError::UnsupportedVersion(bytes[2]));
        }
        if bytes[23] != 0 {
            return Err(WireError::InvariantViolation("reserved byte must be zero"));
        }
        let h = PacketHeader {
            msg_type: MsgType::from_u8(bytes[3])?,
            flags: Flags::from_byte(bytes[4])?,
            request_id: u32_at(5),
            start_mcu: u32_at(9),
            end_mcu: u32_at(13),
            block_num: u32_at(17),
            partition_num: bytes[21],
            partition_idx: bytes[22],
            payload_len: u16::from_be_bytes([bytes[24], bytes[25]]),
        };
        h.validate()?;
        Ok(h)
    }
}

/// A header plus its payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub header: PacketHeader,
    pub payload: Vec<u8>,
}

impl Packet {
    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        if self.payload.len() != self.header.payload_len as usize {
            return Err(WireError::InvariantViolation("payload_len matches payload"));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.header.encode()?);
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    /// Decodes one datagram. Trailing bytes past payload_len are rejected.
    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let header = PacketHeader::decode(bytes)?;
        let need = HEADER_LEN + header.payload_len as usize;
        if bytes.len() < need {
            return Err(WireError::Truncated { need, have: bytes.len() });
        }
        if bytes.len() > need {
            return Err(WireError::InvariantViolation("payload_len matches payload"));
        }
        Ok(Packet { header, payload: bytes[HEADER_LEN..].to_vec() })
    }
}

fn control_header(msg_type: MsgType, request_id: u32, payload_len: u16) -> PacketHeader {
    PacketHeader {
        msg_type,
        flags: Flags::default(),
        request_id,
        start_mcu: 0,
        end_mcu: 0,
        block_num: 0,
        partition_num: 1,
        partition_idx: 0,
        payload_len,
    }
}

pub fn make_cancel(request_id: u32) -> Packet {
    Packet { header: control_header(MsgType::Cancel, request_id, 0), payload: Vec::new() }
}

/// RESULT payload: label count (u8), labels (u32 each), confidence (f64),
/// all big-endian.
pub fn make_result(request_id: u32, labels: &[u32], confidence: f64) -> Result<Packet, WireError> {
    if labels.len() > 255 {
        return Err(WireError::InvariantViolation("at most 255 labels"));
    }
    if !(0.0..=1.0).contains(&confidence) {
        return Err(WireError::InvariantViolation("confidence within [0, 1]"));
    }
    let mut payload = Vec::with_capacity(1 + 4 * labels.len() + 8);
    payload.push(labels.len() as u8);
    for l in labels {
        payload.extend_from_slice(&l.to_be_bytes());
    }
    payload.extend_from_slice(&confidence.to_be_bytes());
    let header = control_header(MsgType::Result, request_id, payload.len() as u16);
    Ok(Packet { header, payload })
}

/// Labels and confidence carried by a RESULT packet.
pub fn parse_result(p: &Packet) -> Result<(Vec<u32>, f64), WireError> {
    if p.header.msg_type != MsgType::Result {
        return Err(WireError::InvariantViolation("RESULT message expected"));
    }
    let b = &p.payload;
    let n = *b.first().ok_or(WireError::Truncated { need: 1, have: 0 })? as usize;
    let need = 1 + 4 * n + 8;
    if b.len() != need {
        return Err(WireError::Truncated { need, have: b.len() });
    }
    let labels = (0..n)
        .map(|i| u32::from_be_bytes(b[1 + 4 * i..5 + 4 * i].try_into().unwrap()))
        .collect();
    let conf = f64::from_be_bytes(b[1 + 4 * n..].try_into().unwrap());
    if !(0.0..=1.0).contains(&conf) {
        return Err(WireError::InvariantViolation("confidence within [0, 1]"));
    }
    Ok((labels, conf))
}
