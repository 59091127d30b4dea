//! Canonical Huffman tables as defined by DHT segments.

use serde::{Deserialize, Serialize};

const LUT_BITS: u32 = 9;

/// A decoded DHT table with a fast lookup for short codes and a reverse map
/// for encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HuffmanTable {
    /// Number of codes of each length 1..=16.
    pub counts: [u8; 16],
    /// Symbols in code order.
    pub symbols: Vec<u8>,
    #[serde(skip)]
    lut: Vec<u16>,
    #[serde(skip)]
    maxcode: [i32; 18],
    #[serde(skip)]
    valptr: [i32; 17],
    #[serde(skip)]
    mincode: [i32; 17],
    #[serde(skip)]
    encode: Vec<(u16, u8)>,
}

impl HuffmanTable {
    /// Builds a table from DHT counts and symbols. Fails on code-space
    /// overflow or when the symbol count does not match.
    pub fn new(counts: [u8; 16], symbols: Vec<u8>) -> Result<Self, String> {
        let total: usize = counts.iter().map(|&c| c as usize).sum();
        if total != symbols.len() {
            return Err(format!("{} symbols for {} codes", symbols.len(), total));
        }
        if total > 256 {
            return Err("more than 256 codes".into());
        }
        let mut lut = vec![0u16; 1 << LUT_BITS];
        let mut maxcode = [-1i32; 18];
        let mut valptr = [0i32; 17];
        let mut mincode = [0i32; 17];
        let mut encode = vec![(0u16, 0u8); 256];
        let mut code: u32 = 0;
        let mut k = 0usize;
        for len in 1..=16u32 {
            let n = counts[len as usize - 1] as usize;
            valptr[len as usize] = k as i32;
            mincode[len as usize] = code as i32;
            for _ in 0..n {
                if code >= (1 << len) {
                    return Err(format!("code space overflow at length {len}"));
                }
                let sym = symbols[k];
                encode[sym as usize] = (code as u16, len as u8);
                if len <= LUT_BITS {
                    let shift = LUT_BITS - len;
                    let base = (code << shift) as usize;
                    for fill in 0..(1usize << shift) {
                        lut[base + fill] = ((len as u16) << 8) | sym as u16;
                    }
                }
                code += 1;
                k += 1;
            }
            maxcode[len as usize] = if n > 0 { code as i32 - 1 } else { -1 };
            code <<= 1;
        }
        maxcode[17] = i32::MAX;
        Ok(HuffmanTable { counts, symbols, lut, maxcode, valptr, mincode, encode })
    }

    /// Decodes one symbol from the top of a 16-bit window, returning
    /// `(code_length, symbol)`.
    #[inline]
    pub fn decode(&self, window: u16) -> Option<(u8, u8)> {
        let e = self.lut[(window >> (16 - LUT_BITS)) as usize];
        if e != 0 {
            return Some(((e >> 8) as u8, e as u8));
        }
        for len in (LUT_BITS + 1)..=16 {
            let code = (window >> (16 - len)) as i32;
            if self.maxcode[len as usize] >= 0 && code <= self.maxcode[len as usize] {
                let idx = self.valptr[len as usize] + code - self.mincode[len as usize];
                return Some((len as u8, self.symbols[idx as usize]));
            }
        }
        None
    }

    /// Code and length for `symbol`, if the table defines it.
    pub fn code_of(&self, symbol: u8) -> Option<(u16, u8)> {
        let (code, len) = self.encode[symbol as usize];
        (len > 0).then_some((code, len))
    }

    /// Symbols the table can encode.
    pub fn has_symbol(&self, symbol: u8) -> bool {
        self.code_of(symbol).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Standard luminance DC table (ITU T.81 K.3).
    fn std_dc() -> HuffmanTable {
        HuffmanTable::new(
            [0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0],
            (0..12).collect(),
        )
        .unwrap()
    }

    #[test]
    fn standard_dc_codes() {
        let t = std_dc();
        assert_eq!(t.code_of(0), Some((0b00, 2)));
        assert_eq!(t.code_of(1), Some((0b010, 3)));
        assert_eq!(t.code_of(11), Some((0b1_1111_1110, 9)));
        assert_eq!(t.decode(0b0000_0000_0000_0000), Some((2, 0)));
        assert_eq!(t.decode(0b1111_1111_0000_0000), Some((9, 11)));
        // all-ones is never a valid code
        assert_eq!(t.decode(0xFFFF), None);
    }

    #[test]
    fn long_codes_use_slow_path() {
        // one code of each length 1..=15, plus one of length 16
        let mut counts = [1u8; 16];
        counts[15] = 1;
        let t = HuffmanTable::new(counts, (0..16).collect()).unwrap();
        // length-12 code: eleven ones then a zero
        let (code, len) = t.code_of(11).unwrap();
        assert_eq!(len, 12);
        let window = code << 4;
        assert_eq!(t.decode(window), Some((12, 11)));
    }

    #[test]
    fn overflow_rejected() {
        assert!(HuffmanTable::new([3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0], vec![0, 1, 2]).is_err());
    }
}
