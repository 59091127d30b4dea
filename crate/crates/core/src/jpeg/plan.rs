use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::scan::McuMap;
use super::JpegImage;

/// Default cap on how far past the size target we look for a byte-aligned
/// MCU end.
pub const DEFAULT_MAX_SCAN: usize = 64;
/// Default minimum block size in bytes.
pub const DEFAULT_TARGET_BLOCK_BYTES: usize = 1024;

/// A run of consecutive MCUs whose bytes start and end on byte boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McuBlock {
    pub start_mcu: u32,
    /// Inclusive.
    pub end_mcu: u32,
    /// Byte range relative to the start of the scan.
    pub byte_range: Range<usize>,
}

impl McuBlock {
    pub fn mcu_count(&self) -> u32 {
        self.end_mcu - self.start_mcu + 1
    }

    pub fn len(&self) -> usize {
        self.byte_range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.byte_range.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McuBlockPlan {
    pub blocks: Vec<McuBlock>,
    /// False when the scan could not be cut into at least two blocks; any
    /// loss then makes the whole image unusable.
    pub recoverable: bool,
}

/// Greedy partition of the scan into byte-aligned MCU blocks.
///
/// Each block grows until it holds at least `target_block_bytes` and ends
/// with a byte-aligned MCU. If no aligned end turns up within `max_scan`
/// MCUs of reaching the size target, the image falls back to a single
/// non-recoverable block. The final block always runs to the end of the scan.
pub fn plan_mcu_blocks(
    img: &JpegImage,
    map: &McuMap,
    max_scan: usize,
    target_block_bytes: usize,
) -> McuBlockPlan {
    let scan_len = img.scan_span.len();
    let n = map.mcu_count();
    let whole = || McuBlockPlan {
        blocks: vec![McuBlock {
            start_mcu: 0,
            end_mcu: n.saturating_sub(1) as u32,
            byte_range: 0..scan_len,
        }],
        recoverable: false,
    };
    if n == 0 {
        return whole();
    }
    let mut blocks = Vec::new();
    let (mut start_mcu, mut start_byte) = (0usize, 0usize);
    while start_mcu < n {
        // First MCU whose end reaches the size target.
        let mut m = start_mcu;
        while m + 1 < n && map.end_byte_ceil(m) - start_byte < target_block_bytes {
            m += 1;
        }
        let window_end = (m + max_scan).min(n - 1);
        let cut = (m..=window_end).find_map(|k| map.aligned_end_byte(k).map(|b| (k, b)));
        match cut {
            Some((k, end_byte)) => {
                blocks.push(McuBlock {
                    start_mcu: start_mcu as u32,
                    end_mcu: k as u32,
                    byte_range: start_byte..end_byte,
                });
                start_mcu = k + 1;
                start_byte = end_byte;
            }
            None if window_end == n - 1 => {
                blocks.push(McuBlock {
                    start_mcu: start_mcu as u32,
                    end_mcu: (n - 1) as u32,
                    byte_range: start_byte..scan_len,
                });
                break;
            }
            None => return whole(),
        }
    }
    if blocks.len() < 2 {
        return whole();
    }
    McuBlockPlan { blocks, recoverable: true }
}
