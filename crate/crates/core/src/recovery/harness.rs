//! Drop the first N data packets of an image and recover it with each
//! recovery-MCU placement, for side-by-side comparison.

use serde::{Deserialize, Serialize};

use super::{recover_packets, Placement, RecoveredJpeg, RecoveryError, RecoveryMode, RecoveryOptions};
use crate::wire::RequestDatagramSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropCase {
    pub dropped: usize,
    pub placement: Placement,
    pub result: RecoveredJpeg,
    /// Size of the rebuilt file; the bytes themselves are in `result`.
    pub bytes_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropComparison {
    pub request_id: u32,
    pub data_packets: usize,
    pub cases: Vec<DropCase>,
}

/// Recovers `set` once per (count, placement) after removing the first
/// `count` data packets. Counts beyond the number of data packets are
/// clamped.
pub fn drop_first_n(
    set: &RequestDatagramSet,
    counts: &[usize],
    mode: RecoveryMode,
) -> Result<DropComparison, RecoveryError> {
    let data: Vec<_> = set.packets.iter().filter(|p| !p.header.flags.is_jpeg_header).collect();
    let header: Vec<_> = set.packets.iter().filter(|p| p.header.flags.is_jpeg_header).collect();
    let mut cases = Vec::new();
    for &n in counts {
        let n = n.min(data.len());
        for placement in [Placement::Tail, Placement::InPlace] {
            let kept = header.iter().chain(&data[n..]).copied();
            let result = recover_packets(set.request_id, kept, RecoveryOptions { mode, placement })?;
            cases.push(DropCase { dropped: n, placement, bytes_len: result.bytes.len(), result });
        }
    }
    Ok(DropComparison { request_id: set.request_id, data_packets: data.len(), cases })
}
