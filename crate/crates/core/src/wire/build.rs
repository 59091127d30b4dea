use serde::{Deserialize, Serialize};

use super::{Flags, MsgType, Packet, PacketHeader, WireError, HEADER_SENTINEL, MIN_MTU_PAYLOAD};
use crate::jpeg::{JpegImage, McuBlockPlan};

/// Every datagram for one image, header packets first, then blocks in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestDatagramSet {
    pub request_id: u32,
    pub packets: Vec<Packet>,
}

impl RequestDatagramSet {
    /// Payloads concatenated in (block_num, partition_idx) order.
    pub fn concat_payloads(&self) -> Vec<u8> {
        let mut order: Vec<&Packet> = self.packets.iter().collect();
        order.sort_by_key(|p| (p.header.block_num, p.header.partition_idx));
        order.into_iter().flat_map(|p| p.payload.iter().copied()).collect()
    }

    pub fn header_packets(&self) -> usize {
        self.packets.iter().filter(|p| p.header.flags.is_jpeg_header).count()
    }
}

/// Splits `img` into datagrams following `plan`.
///
/// Header packets use block_num 0; MCU blocks are numbered from 1. The EOI
/// marker (and anything after it) rides at the end of the final block so
/// that concatenating all payloads reproduces the file.
pub fn build_packets(
    img: &JpegImage,
    plan: &McuBlockPlan,
    request_id: u32,
    mtu_payload: usize,
) -> Result<RequestDatagramSet, WireError> {
    if !(MIN_MTU_PAYLOAD..=u16::MAX as usize).contains(&mtu_payload) {
        return Err(WireError::MtuOutOfRange(mtu_payload));
    }
    let recoverable = plan.recoverable;
    let mut packets = Vec::new();

    let header = img.header_bytes();
    let parts = header.len().div_ceil(mtu_payload).max(1);
    if parts > 255 {
        return Err(WireError::HeaderTooLarge(parts));
    }
    split(&mut packets, header, mtu_payload, |idx, len| PacketHeader {
        msg_type: MsgType::Data,
        flags: Flags {
            is_jpeg_header: true,
            is_last: false,
            has_next_partition: idx + 1 < parts,
            recoverable,
        },
        request_id,
        start_mcu: HEADER_SENTINEL,
        end_mcu: HEADER_SENTINEL,
        block_num: 0,
        partition_num: parts as u8,
        partition_idx: idx as u8,
        payload_len: len as u16,
    });

    let scan = img.scan_bytes();
    let n_blocks = plan.blocks.len();
    for (i, block) in plan.blocks.iter().enumerate() {
        let block_num = i as u32 + 1;
        let final_block = i + 1 == n_blocks;
        let mut bytes = scan[block.byte_range.clone()].to_vec();
        if final_block {
            bytes.extend_from_slice(img.trailer_bytes());
        }
        let parts = bytes.len().div_ceil(mtu_payload).max(1);
        if parts > 255 {
            return Err(WireError::PayloadOverflow { block: block_num, packets: parts });
        }
        split(&mut packets, &bytes, mtu_payload, |idx, len| PacketHeader {
            msg_type: MsgType::Data,
            flags: Flags {
                is_jpeg_header: false,
                is_last: final_block && idx + 1 == parts,
                has_next_partition: idx + 1 < parts,
                recoverable,
            },
            request_id,
            start_mcu: block.start_mcu,
            end_mcu: block.end_mcu,
            block_num,
            partition_num: parts as u8,
            partition_idx: idx as u8,
            payload_len: len as u16,
        });
    }
    Ok(RequestDatagramSet { request_id, packets })
}

fn split(
    out: &mut Vec<Packet>,
    bytes: &[u8],
    mtu: usize,
    header: impl Fn(usize, usize) -> PacketHeader,
) {
    if bytes.is_empty() {
        out.push(Packet { header: header(0, 0), payload: Vec::new() });
        return;
    }
    for (idx, chunk) in bytes.chunks(mtu).enumerate() {
        out.push(Packet { header: header(idx, chunk.len()), payload: chunk.to_vec() });
    }
}
