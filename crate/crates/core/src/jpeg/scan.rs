//! Entropy-decoding just far enough to find MCU bit extents.
//!
//! Raw scan bytes are first split into a contiguous run of data bytes with
//! stuffing removed plus a list of restart markers. MCU walking happens in
//! those "unstuffed" bit coordinates; results are mapped back to raw scan
//! coordinates, where a position never lands on a stuffed 0x00.

use serde::{Deserialize, Serialize};

use super::header::JpegHeader;
use super::huffman::HuffmanTable;
use super::JpegError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RestartMark {
    /// Unstuffed byte index of the first data byte after the marker.
    pub at: usize,
    /// Raw offset of the marker's 0xFF.
    pub raw: usize,
    /// Marker number 0..=7.
    pub n: u8,
}

/// Entropy-coded bytes with stuffing and restart markers stripped out.
#[derive(Debug, Clone, Default)]
pub(crate) struct Unstuffed {
    pub data: Vec<u8>,
    /// Raw offset of every data byte.
    pub raw_index: Vec<u32>,
    pub marks: Vec<RestartMark>,
    /// Raw offset just past the last data byte (and its stuffing).
    pub raw_data_end: usize,
}

impl Unstuffed {
    /// Splits raw entropy-coded bytes. Stops at the first non-restart
    /// marker; a lone trailing 0xFF (a stuffed pair cut in half) is dropped.
    pub fn new(raw: &[u8]) -> Self {
        let mut u = Unstuffed {
            data: Vec::with_capacity(raw.len()),
            raw_index: Vec::with_capacity(raw.len()),
            ..Default::default()
        };
        let mut i = 0;
        while i < raw.len() {
            let b = raw[i];
            if b != 0xFF {
                u.data.push(b);
                u.raw_index.push(i as u32);
                i += 1;
                u.raw_data_end = i;
                continue;
            }
            let mut j = i + 1;
            while j < raw.len() && raw[j] == 0xFF {
                j += 1;
            }
            if j >= raw.len() {
                break;
            }
            match raw[j] {
                0x00 if j == i + 1 => {
                    u.data.push(0xFF);
                    u.raw_index.push(i as u32);
                    i = j + 1;
                    u.raw_data_end = i;
                }
                m @ 0xD0..=0xD7 => {
                    u.marks.push(RestartMark { at: u.data.len(), raw: i, n: m - 0xD0 });
                    i = j + 1;
                }
                _ => break,
            }
        }
        u
    }

    pub fn bit_len(&self) -> u64 {
        self.data.len() as u64 * 8
    }

    /// Maps an unstuffed bit position to raw scan coordinates.
    pub fn raw_bit(&self, bit: u64) -> u64 {
        let byte = (bit / 8) as usize;
        if byte < self.data.len() {
            self.raw_index[byte] as u64 * 8 + bit % 8
        } else {
            // Past the data: right after the last data byte, or after a
            // trailing restart marker when one follows.
            let after_mark = self.marks.last().filter(|m| m.at == self.data.len()).map(|m| m.raw + 2);
            after_mark.unwrap_or(self.raw_data_end) as u64 * 8
        }
    }

    /// Reads 16 bits starting at `bit`, padding with ones past the end.
    #[inline]
    pub fn window(&self, bit: u64) -> u16 {
        let byte = (bit / 8) as usize;
        let get = |k: usize| self.data.get(k).copied().unwrap_or(0xFF) as u32;
        let w = (get(byte) << 16) | (get(byte + 1) << 8) | get(byte + 2);
        (w >> (8 - (bit % 8) as u32)) as u16
    }

    /// Reads `n <= 16` bits at `bit` as an unsigned value.
    pub fn bits(&self, bit: u64, n: u8) -> u32 {
        if n == 0 {
            0
        } else {
            (self.window(bit) >> (16 - n)) as u32
        }
    }
}

/// Bit extent of one MCU in unstuffed coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct McuSpan {
    pub start: u64,
    pub end: u64,
}

/// Why MCU walking stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ScanFault {
    /// Absolute index of the MCU that could not be decoded.
    pub mcu: u64,
    /// Unstuffed bit where decoding failed.
    pub bit: u64,
}

/// Block layout and tables needed to walk MCUs.
pub(crate) struct McuWalker<'a> {
    blocks: Vec<(&'a HuffmanTable, &'a HuffmanTable)>,
    restart_interval: u64,
    total: u64,
}

impl<'a> McuWalker<'a> {
    pub fn new(header: &'a JpegHeader) -> Self {
        let blocks = header
            .mcu_blocks()
            .into_iter()
            .map(|(_, dc, ac)| {
                (
                    header.dc_tables[dc as usize].as_ref().expect("validated at parse"),
                    header.ac_tables[ac as usize].as_ref().expect("validated at parse"),
                )
            })
            .collect();
        McuWalker {
            blocks,
            restart_interval: header.restart_interval as u64,
            total: header.mcu_count_expected(),
        }
    }

    /// True when a restart marker precedes absolute MCU `m`.
    pub fn restart_before(&self, m: u64) -> bool {
        self.restart_interval > 0 && m > 0 && m < self.total && m.is_multiple_of(self.restart_interval)
    }

    /// Decodes up to `count` MCUs starting with absolute MCU `first`, whose
    /// code begins at unstuffed bit 0 of `u`. On failure the spans decoded so
    /// far are returned alongside the fault.
    pub fn walk(&self, u: &Unstuffed, first: u64, count: u64) -> (Vec<McuSpan>, Option<ScanFault>) {
        let mut spans = Vec::with_capacity(count as usize);
        let mut pos = 0u64;
        let mut mark_idx = 0usize;
        for m in first..first + count {
            if m > first && self.restart_before(m) {
                let aligned = pos.div_ceil(8) * 8;
                let expect = ((m / self.restart_interval - 1) % 8) as u8;
                match u.marks.get(mark_idx) {
                    Some(mk) if mk.at as u64 * 8 == aligned && mk.n == expect => {
                        mark_idx += 1;
                        pos = aligned;
                    }
                    _ => return (spans, Some(ScanFault { mcu: m, bit: pos })),
                }
            }
            // Data for this MCU must not run into the next restart marker.
            let limit = u
                .marks
                .get(mark_idx)
                .map(|mk| mk.at as u64 * 8)
                .unwrap_or_else(|| u.bit_len());
            match self.walk_one(u, pos, limit) {
                Some(end) => {
                    spans.push(McuSpan { start: pos, end });
                    pos = end;
                }
                None => return (spans, Some(ScanFault { mcu: m, bit: pos })),
            }
        }
        (spans, None)
    }

    fn walk_one(&self, u: &Unstuffed, mut pos: u64, limit: u64) -> Option<u64> {
        for &(dc, ac) in &self.blocks {
            let (len, s) = dc.decode(u.window(pos))?;
            if s > 11 {
                return None;
            }
            pos += len as u64 + s as u64;
            let mut k = 1u32;
            while k < 64 {
                let (len, rs) = ac.decode(u.window(pos))?;
                pos += len as u64;
                let (r, s) = ((rs >> 4) as u32, (rs & 0x0F) as u32);
                if s == 0 {
                    if r == 15 {
                        k += 16;
                        if k > 64 {
                            return None;
                        }
                        continue;
                    }
                    break;
                }
                k += r;
                if k > 63 {
                    return None;
                }
                pos += s as u64;
                k += 1;
            }
            if pos > limit {
                return None;
            }
        }
        Some(pos)
    }
}

/// Per-image index of MCU bit boundaries, in raw scan coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McuMap {
    /// Bit offset where each MCU's code begins.
    pub boundaries: Vec<u64>,
    /// Bit offset one past the last MCU's code.
    pub end_bit: u64,
    /// Whether each MCU ends on a byte boundary (or right before a restart
    /// marker, which is byte-aligned by construction).
    pub byte_aligned: Vec<bool>,
    /// Unstuffed bits left after the last MCU, before EOI.
    pub trailing_bits: u64,
}

impl McuMap {
    pub fn mcu_count(&self) -> usize {
        self.boundaries.len()
    }

    /// Scan byte offset where a block ending with MCU `m` ends, if MCU `m`
    /// ends byte-aligned and is not the last one.
    pub fn aligned_end_byte(&self, m: usize) -> Option<usize> {
        if m + 1 < self.boundaries.len() && self.byte_aligned[m] {
            Some((self.boundaries[m + 1] / 8) as usize)
        } else {
            None
        }
    }

    /// Ceiling byte offset of MCU `m`'s end.
    pub fn end_byte_ceil(&self, m: usize) -> usize {
        let end = self.boundaries.get(m + 1).copied().unwrap_or(self.end_bit);
        end.div_ceil(8) as usize
    }
}

/// Walks every MCU of a scan (`scan` = raw entropy-coded bytes, EOI excluded).
pub(crate) fn map_scan(header: &JpegHeader, scan: &[u8]) -> Result<McuMap, JpegError> {
    let u = Unstuffed::new(scan);
    let walker = McuWalker::new(header);
    let total = header.mcu_count_expected();
    let (spans, fault) = walker.walk(&u, 0, total);
    if let Some(f) = fault {
        return Err(JpegError::CorruptScan { mcu: f.mcu, bit: u.raw_bit(f.bit) });
    }
    let mut boundaries = Vec::with_capacity(spans.len());
    let mut byte_aligned = Vec::with_capacity(spans.len());
    for (m, s) in spans.iter().enumerate() {
        boundaries.push(u.raw_bit(s.start));
        let restart_follows = walker.restart_before(m as u64 + 1);
        byte_aligned.push(restart_follows || s.end % 8 == 0);
    }
    let last_end = spans.last().map(|s| s.end).unwrap_or(0);
    Ok(McuMap {
        boundaries,
        end_bit: u.raw_bit(last_end),
        byte_aligned,
        trailing_bits: u.bit_len() - last_end,
    })
}
