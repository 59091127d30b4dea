//! Baseline JPEG parsing and MCU boundary discovery.
//!
//! Only sequential Huffman-coded (SOF0) files with a single interleaved scan
//! are accepted. The scan is entropy-decoded without dequantization or IDCT,
//! just far enough to learn where every MCU's code starts and ends, which is
//! what the MCU-block packetizer and the receiver-side recovery need.

mod bits;
mod header;
mod huffman;
mod plan;
mod scan;

use std::ops::Range;

use thiserror::Error;

pub use bits::ScanWriter;
pub use header::{Component, JpegHeader};
pub use huffman::HuffmanTable;
pub use plan::{plan_mcu_blocks, McuBlock, McuBlockPlan, DEFAULT_MAX_SCAN, DEFAULT_TARGET_BLOCK_BYTES};
pub use scan::McuMap;

pub(crate) use scan::{McuSpan, McuWalker, Unstuffed};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JpegError {
    #[error("not a baseline JPEG: {what} (marker 0x{marker:02X} at byte {offset})")]
    NotBaseline { marker: u8, offset: usize, what: &'static str },
    #[error("file truncated in marker 0x{marker:02X} at byte {offset}")]
    TruncatedFile { marker: u8, offset: usize },
    #[error("malformed marker 0x{marker:02X} at byte {offset}: {reason}")]
    MalformedMarker { marker: u8, offset: usize, reason: String },
    #[error("corrupt scan: undecodable code at bit {bit} in MCU {mcu}")]
    CorruptScan { mcu: u64, bit: u64 },
}

/// A parsed baseline JPEG file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JpegImage {
    pub raw_bytes: Vec<u8>,
    /// SOI through the end of the SOS segment.
    pub header_span: Range<usize>,
    /// Entropy-coded data, up to but excluding the EOI marker.
    pub scan_span: Range<usize>,
    pub header: JpegHeader,
}

impl JpegImage {
    pub fn width(&self) -> u16 {
        self.header.width
    }

    pub fn height(&self) -> u16 {
        self.header.height
    }

    pub fn restart_interval(&self) -> u16 {
        self.header.restart_interval
    }

    pub fn mcu_count_expected(&self) -> u64 {
        self.header.mcu_count_expected()
    }

    pub fn header_bytes(&self) -> &[u8] {
        &self.raw_bytes[self.header_span.clone()]
    }

    pub fn scan_bytes(&self) -> &[u8] {
        &self.raw_bytes[self.scan_span.clone()]
    }

    /// EOI marker and anything that follows it.
    pub fn trailer_bytes(&self) -> &[u8] {
        &self.raw_bytes[self.scan_span.end..]
    }
}

/// Parses a complete baseline JPEG file.
pub fn parse_jpeg(bytes: &[u8]) -> Result<JpegImage, JpegError> {
    let header = JpegHeader::parse(bytes)?;
    let scan_end = header::find_scan_end(bytes, header.header_len)?;
    let (header_span, scan_span) = header::spans(&header, scan_end);
    Ok(JpegImage { raw_bytes: bytes.to_vec(), header_span, scan_span, header })
}

/// Finds every MCU's bit extent in the image's scan.
pub fn scan_mcu_boundaries(img: &JpegImage) -> Result<McuMap, JpegError> {
    scan::map_scan(&img.header, img.scan_bytes())
}

#[cfg(test)]
mod tests;
