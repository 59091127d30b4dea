use crate::jpeg::{HuffmanTable, JpegHeader, ScanWriter};

use super::RecoveryError;

#[derive(Debug, Clone, PartialEq, Eq)]
enum DcCode {
    /// Category 0: the block repeats the previous DC level.
    Zero { code: u16, len: u8 },
    /// No category-0 code; alternate +m / -m so the predictor returns to
    /// its starting level every second block.
    Alternating { code: u16, len: u8, cat: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct BlockCode {
    component: usize,
    dc: DcCode,
    /// AC codes (and their extra bits) as (value, bit length).
    ac: Vec<(u32, u8)>,
}

/// The smallest valid MCU for a scan: DC delta 0 and an immediate
/// end-of-block in every block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryMcu {
    blocks: Vec<BlockCode>,
}

/// Alternation state for tables without a category-0 DC code.
#[derive(Debug, Clone, Default)]
pub struct RecoveryState {
    negative: Vec<bool>,
}

/// Builds the recovery MCU for the scan described by `header`.
pub fn make_recovery_mcu(header: &JpegHeader) -> Result<RecoveryMcu, RecoveryError> {
    let mut blocks = Vec::new();
    for (component, dc_id, ac_id) in header.mcu_blocks() {
        let dc_t = header.dc_tables[dc_id as usize]
            .as_ref()
            .ok_or(RecoveryError::MissingTable { class: "DC", id: dc_id })?;
        let ac_t = header.ac_tables[ac_id as usize]
            .as_ref()
            .ok_or(RecoveryError::MissingTable { class: "AC", id: ac_id })?;
        let dc = dc_code(dc_t).ok_or(RecoveryError::MissingTable { class: "DC", id: dc_id })?;
        let ac = ac_completion(ac_t).ok_or(RecoveryError::MissingTable { class: "AC", id: ac_id })?;
        blocks.push(BlockCode { component, dc, ac });
    }
    Ok(RecoveryMcu { blocks })
}

fn dc_code(t: &HuffmanTable) -> Option<DcCode> {
    if let Some((code, len)) = t.code_of(0) {
        return Some(DcCode::Zero { code, len });
    }
    (1..=11u8).find_map(|cat| t.code_of(cat).map(|(code, len)| DcCode::Alternating { code, len, cat }))
}

/// Cheapest AC symbol sequence that validly ends a block: EOB when the
/// table has it, otherwise a shortest path over run/size symbols that
/// lands exactly on coefficient 63.
fn ac_completion(t: &HuffmanTable) -> Option<Vec<(u32, u8)>> {
    if let Some((code, len)) = t.code_of(0x00) {
        return Some(vec![(code as u32, len)]);
    }
    // dist[k]: cheapest bits to reach coefficient index k (1..=64).
    const INF: u32 = u32::MAX;
    let mut dist = [INF; 65];
    let mut prev: [Option<(usize, u8)>; 65] = [None; 65];
    dist[1] = 0;
    for k in 1..64 {
        if dist[k] == INF {
            continue;
        }
        for &sym in &t.symbols {
            let (r, s) = ((sym >> 4) as usize, sym & 0x0F);
            let (_, len) = t.code_of(sym)?;
            let next = match (r, s) {
                (15, 0) => k + 16,
                (_, 0) => continue,
                _ => k + r + 1,
            };
            if next > 64 {
                continue;
            }
            let cost = dist[k] + len as u32 + s as u32;
            if cost < dist[next] {
                dist[next] = cost;
                prev[next] = Some((k, sym));
            }
        }
    }
    if dist[64] == INF {
        return None;
    }
    let mut syms = Vec::new();
    let mut k = 64;
    while let Some((p, sym)) = prev[k] {
        syms.push(sym);
        k = p;
    }
    syms.reverse();
    let mut out = Vec::new();
    for sym in syms {
        let (code, len) = t.code_of(sym)?;
        out.push((code as u32, len));
        let s = sym & 0x0F;
        if s > 0 {
            // smallest positive amplitude of this size
            out.push((1u32 << (s - 1), s));
        }
    }
    Some(out)
}

impl RecoveryMcu {
    /// Appends one MCU to `w`. Does not call [`ScanWriter::end_mcu`].
    pub fn write(&self, w: &mut ScanWriter, state: &mut RecoveryState) {
        for b in &self.blocks {
            match b.dc {
                DcCode::Zero { code, len } => w.write_bits(code as u32, len),
                DcCode::Alternating { code, len, cat } => {
                    if state.negative.len() <= b.component {
                        state.negative.resize(b.component + 1, false);
                    }
                    let neg = state.negative[b.component];
                    w.write_bits(code as u32, len);
                    // +2^(cat-1) is 1 followed by zeros; its negation is the
                    // one's complement.
                    let pos = 1u32 << (cat - 1);
                    let bits = if neg { !pos & ((1u32 << cat) - 1) } else { pos };
                    w.write_bits(bits, cat);
                    state.negative[b.component] = !neg;
                }
            }
            for &(v, l) in &b.ac {
                w.write_bits(v, l);
            }
        }
    }

    /// Bits in one emission.
    pub fn bit_len(&self) -> u64 {
        self.blocks
            .iter()
            .map(|b| {
                let dc = match b.dc {
                    DcCode::Zero { len, .. } => len as u64,
                    DcCode::Alternating { len, cat, .. } => len as u64 + cat as u64,
                };
                dc + b.ac.iter().map(|&(_, l)| l as u64).sum::<u64>()
            })
            .sum()
    }

    pub fn blocks(&self) -> usize {
        self.blocks.len()
    }

    /// One MCU as stuffed bytes padded with ones.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ScanWriter::new();
        self.write(&mut w, &mut RecoveryState::default());
        w.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bits of `codes` packed MSB-first, padded with ones.
    fn pack(codes: &[(u32, u8)]) -> (Vec<u8>, u64) {
        let mut w = ScanWriter::new();
        for &(v, l) in codes {
            w.write_bits(v, l);
        }
        let bits = w.data_bits();
        (crate::jpeg::Unstuffed::new(&w.finish()).data, bits)
    }

    #[test]
    fn ac_completion_without_eob_fills_the_block() {
        // symbols 0x01 (one coefficient), 0xF0 (16 zeros), 0x31 (3 zeros + 1)
        let t = HuffmanTable::new([0, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0], vec![0x01, 0xF0, 0x31]).unwrap();
        let seq = ac_completion(&t).unwrap();
        let (data, bits) = pack(&seq);
        let u = crate::jpeg::Unstuffed::new(&data);
        let (mut pos, mut k) = (0u64, 1u32);
        while k < 64 {
            let (len, rs) = t.decode(u.window(pos)).unwrap();
            pos += len as u64;
            let (r, s) = ((rs >> 4) as u32, (rs & 0x0F) as u32);
            if s == 0 {
                assert_eq!(r, 15);
                k += 16;
            } else {
                k += r + 1;
                pos += s as u64;
            }
        }
        assert_eq!(k, 64);
        assert_eq!(pos, bits);
    }

    #[test]
    fn ac_completion_prefers_eob() {
        let t = HuffmanTable::new([0, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0], vec![0x01, 0x00]).unwrap();
        assert_eq!(ac_completion(&t).unwrap(), vec![(1, 2)]);
    }

    #[test]
    fn impossible_completion_is_none() {
        // only runs of 2 zeros + value: 3 positions each, 63 = 21 * 3 works,
        // so use 0x31 (4 positions) alone: 63 is not a multiple of 4
        let t = HuffmanTable::new([1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0], vec![0x31]).unwrap();
        assert_eq!(ac_completion(&t), None);
        let t = HuffmanTable::new([1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0], vec![0x21]).unwrap();
        assert!(ac_completion(&t).is_some());
    }

    #[test]
    fn dc_fallback_alternates_sign() {
        let t = HuffmanTable::new([0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0], vec![2]).unwrap();
        let dc = dc_code(&t).unwrap();
        assert_eq!(dc, DcCode::Alternating { code: 0, len: 2, cat: 2 });
        let rec = RecoveryMcu { blocks: vec![BlockCode { component: 0, dc, ac: vec![] }] };
        let mut w = ScanWriter::new();
        let mut st = RecoveryState::default();
        rec.write(&mut w, &mut st);
        rec.write(&mut w, &mut st);
        // code 00, +2 = 10, code 00, -2 = 01
        assert_eq!(w.finish(), vec![0b0010_0001]);
    }
}
