use crate::jpeg::{ScanWriter, Unstuffed};

/// Splices two stuffed entropy-coded bit runs.
///
/// `prefix_bits` and `suffix_bits` count data bits (stuffing excluded) from
/// the start of each slice. The suffix is shifted to follow the prefix
/// directly, stuffing is recomputed, and the final partial byte is padded
/// with ones.
pub fn bridge_bits(prefix: &[u8], prefix_bits: u64, suffix: &[u8], suffix_bits: u64) -> Vec<u8> {
    let p = Unstuffed::new(prefix);
    let s = Unstuffed::new(suffix);
    assert!(prefix_bits <= p.bit_len(), "prefix_bits past prefix data");
    assert!(suffix_bits <= s.bit_len(), "suffix_bits past suffix data");
    let mut w = ScanWriter::new();
    w.copy_bits(&p, 0, prefix_bits);
    w.copy_bits(&s, 0, suffix_bits);
    w.finish()
}
