use super::scan::Unstuffed;

/// MSB-first writer for entropy-coded data.
///
/// Applies byte stuffing as bytes complete, pads with one bits, and inserts
/// restart markers on the MCU cadence when constructed with an interval.
#[derive(Debug, Clone, Default)]
pub struct ScanWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u8,
    data_bits: u64,
    restart_interval: u64,
    total_mcus: u64,
    mcus: u64,
}

impl ScanWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// A writer that emits RSTn after every `interval` MCUs, except after the
    /// last of `total_mcus`.
    pub fn with_restarts(interval: u16, total_mcus: u64) -> Self {
        ScanWriter { restart_interval: interval as u64, total_mcus, ..Self::default() }
    }

    fn push_byte(&mut self, b: u8) {
        self.out.push(b);
        if b == 0xFF {
            self.out.push(0x00);
        }
    }

    /// Appends the low `len` bits of `value` (len <= 24).
    pub fn write_bits(&mut self, value: u32, len: u8) {
        debug_assert!(len <= 24);
        if len == 0 {
            return;
        }
        self.acc = (self.acc << len) | (value & ((1u32 << len) - 1));
        self.nbits += len;
        self.data_bits += len as u64;
        while self.nbits >= 8 {
            self.nbits -= 8;
            let b = (self.acc >> self.nbits) as u8;
            self.push_byte(b);
        }
        self.acc &= (1u32 << self.nbits) - 1;
    }

    pub fn is_aligned(&self) -> bool {
        self.nbits == 0
    }

    /// Data bits written so far, excluding stuffing, padding and markers.
    pub fn data_bits(&self) -> u64 {
        self.data_bits
    }

    pub fn mcus_written(&self) -> u64 {
        self.mcus
    }

    /// Appends bytes that are already stuffed entropy-coded data.
    /// The writer must be byte-aligned.
    pub fn extend_stuffed(&mut self, bytes: &[u8], mcus: u64) {
        assert!(self.is_aligned(), "extend_stuffed on an unaligned writer");
        debug_assert!(self.restart_interval == 0);
        self.out.extend_from_slice(bytes);
        self.data_bits += bytes.iter().filter(|&&b| b != 0x00).count() as u64 * 8;
        self.mcus += mcus;
    }

    /// Copies unstuffed bits `[start, end)` of `src`.
    pub(crate) fn copy_bits(&mut self, src: &Unstuffed, start: u64, end: u64) {
        let mut pos = start;
        if self.is_aligned() && pos.is_multiple_of(8) {
            let whole = ((end - pos) / 8) as usize;
            let from = (pos / 8) as usize;
            for i in from..from + whole {
                self.push_byte(src.data[i]);
            }
            self.data_bits += whole as u64 * 8;
            pos += whole as u64 * 8;
        }
        while pos < end {
            let n = (end - pos).min(16) as u8;
            self.write_bits(src.bits(pos, n), n);
            pos += n as u64;
        }
    }

    /// Marks the end of one MCU, emitting a restart marker when due.
    pub fn end_mcu(&mut self) {
        self.mcus += 1;
        let r = self.restart_interval;
        if r > 0 && self.mcus.is_multiple_of(r) && self.mcus < self.total_mcus {
            self.pad();
            let n = ((self.mcus / r - 1) % 8) as u8;
            self.out.extend_from_slice(&[0xFF, 0xD0 + n]);
        }
    }

    /// Fills the current byte with one bits.
    pub fn pad(&mut self) {
        if self.nbits > 0 {
            let fill = 8 - self.nbits;
            self.write_bits((1u32 << fill) - 1, fill);
            self.data_bits -= fill as u64;
        }
    }

    /// Pads and returns the stuffed bytes.
    pub fn finish(mut self) -> Vec<u8> {
        self.pad();
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stuffs_ff_and_pads_with_ones() {
        let mut w = ScanWriter::new();
        w.write_bits(0xFF, 8);
        w.write_bits(0b101, 3);
        assert_eq!(w.finish(), vec![0xFF, 0x00, 0b1011_1111]);
    }

    #[test]
    fn inserts_restart_markers_on_cadence() {
        let mut w = ScanWriter::with_restarts(2, 5);
        for _ in 0..5 {
            w.write_bits(0b0, 1);
            w.end_mcu();
        }
        // two MCUs, pad, RST0, two MCUs, pad, RST1, last MCU, pad
        assert_eq!(w.finish(), vec![0x3F, 0xFF, 0xD0, 0x3F, 0xFF, 0xD1, 0x7F]);
    }

    #[test]
    fn copy_bits_unaligned() {
        let src = Unstuffed::new(&[0b1100_1010, 0b0101_0000]);
        let mut w = ScanWriter::new();
        w.write_bits(0b1, 1);
        w.copy_bits(&src, 2, 12);
        // 1 + 0010100101
        assert_eq!(w.data_bits(), 11);
        assert_eq!(w.finish(), vec![0b1001_0100, 0b1011_1111]);
    }
}
