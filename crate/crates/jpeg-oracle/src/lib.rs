//! Reference JPEG codec for tests.
//!
//! Wraps the system libjpeg through a small C shim so test suites can encode
//! corpora with controlled sampling, restart intervals and Huffman tables, and
//! decode outputs with a stock decoder that counts every corrupt-data warning.
//! Nothing here shares code with the crates under test.

use std::ffi::CStr;
use std::os::raw::{c_char, c_int, c_long, c_uchar, c_ulong};

pub mod corpus;

extern "C" {
    fn jo_free(p: *mut c_uchar);
    #[allow(clippy::too_many_arguments)]
    fn jo_encode(
        pixels: *const c_uchar,
        width: c_int,
        height: c_int,
        components: c_int,
        quality: c_int,
        h_samp: *const c_int,
        v_samp: *const c_int,
        restart_interval: c_int,
        optimize: c_int,
        progressive: c_int,
        arith: c_int,
        out: *mut *mut c_uchar,
        out_len: *mut c_ulong,
        errmsg: *mut c_char,
        errlen: c_int,
    ) -> c_int;
    #[allow(clippy::too_many_arguments)]
    fn jo_decode(
        buf: *const c_uchar,
        len: c_ulong,
        width: *mut c_int,
        height: *mut c_int,
        components: *mut c_int,
        mcus: *mut c_long,
        warnings: *mut c_int,
        warnmsg: *mut c_char,
        warnlen: c_int,
        pixels_out: *mut *mut c_uchar,
        errmsg: *mut c_char,
        errlen: c_int,
    ) -> c_int;
}

/// Chroma layout of an encoded image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Sampling {
    Gray,
    S444,
    S422,
    S420,
    S440,
    S411,
}

impl Sampling {
    pub const ALL: [Sampling; 6] = [
        Sampling::Gray,
        Sampling::S444,
        Sampling::S422,
        Sampling::S420,
        Sampling::S440,
        Sampling::S411,
    ];

    pub fn components(self) -> usize {
        if self == Sampling::Gray {
            1
        } else {
            3
        }
    }

    /// Luma sampling factors; chroma is always 1x1.
    fn luma(self) -> (i32, i32) {
        match self {
            Sampling::Gray | Sampling::S444 => (1, 1),
            Sampling::S422 => (2, 1),
            Sampling::S420 => (2, 2),
            Sampling::S440 => (1, 2),
            Sampling::S411 => (4, 1),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EncodeParams {
    pub width: u32,
    pub height: u32,
    pub sampling: Sampling,
    pub quality: u8,
    pub restart_interval: u16,
    pub optimize: bool,
    pub progressive: bool,
    pub arithmetic: bool,
}

impl EncodeParams {
    pub fn baseline(width: u32, height: u32, sampling: Sampling) -> Self {
        EncodeParams {
            width,
            height,
            sampling,
            quality: 85,
            restart_interval: 0,
            optimize: false,
            progressive: false,
            arithmetic: false,
        }
    }
}

/// Encodes interleaved 8-bit pixels (gray or RGB, matching `params.sampling`).
pub fn encode(params: &EncodeParams, pixels: &[u8]) -> Result<Vec<u8>, String> {
    let comps = params.sampling.components();
    let expected = params.width as usize * params.height as usize * comps;
    if pixels.len() != expected {
        return Err(format!("pixel buffer is {} bytes, expected {expected}", pixels.len()));
    }
    let (lh, lv) = params.sampling.luma();
    let h = [lh, 1, 1];
    let v = [lv, 1, 1];
    let mut out: *mut c_uchar = std::ptr::null_mut();
    let mut out_len: c_ulong = 0;
    let mut err = [0 as c_char; 256];
    // SAFETY: all pointers are valid for the duration of the call; the shim
    // allocates `out` with malloc and we release it with jo_free.
    let rc = unsafe {
        jo_encode(
            pixels.as_ptr(),
            params.width as c_int,
            params.height as c_int,
            comps as c_int,
            params.quality as c_int,
            h.as_ptr(),
            v.as_ptr(),
            params.restart_interval as c_int,
            params.optimize as c_int,
            params.progressive as c_int,
            params.arithmetic as c_int,
            &mut out,
            &mut out_len,
            err.as_mut_ptr(),
            err.len() as c_int,
        )
    };
    if rc != 0 {
        // SAFETY: the shim always NUL-terminates errmsg.
        return Err(unsafe { CStr::from_ptr(err.as_ptr()) }.to_string_lossy().into_owned());
    }
    // SAFETY: out points at out_len bytes owned by us until jo_free.
    let bytes = unsafe { std::slice::from_raw_parts(out, out_len as usize) }.to_vec();
    unsafe { jo_free(out) };
    Ok(bytes)
}

/// Result of a full libjpeg decode.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub width: u32,
    pub height: u32,
    pub components: u32,
    /// MCUs in the (single) scan as computed by libjpeg.
    pub mcu_count: u64,
    /// Number of corrupt-data warnings raised while decoding.
    pub warnings: u32,
    pub first_warning: Option<String>,
    pub pixels: Vec<u8>,
}

impl Decoded {
    /// True when libjpeg consumed the stream without complaint.
    pub fn is_clean(&self) -> bool {
        self.warnings == 0
    }
}

/// Decodes with libjpeg. Fatal errors are returned as `Err`; non-fatal
/// corruption shows up in [`Decoded::warnings`].
pub fn decode(bytes: &[u8]) -> Result<Decoded, String> {
    let (mut w, mut h, mut c) = (0 as c_int, 0 as c_int, 0 as c_int);
    let mut mcus: c_long = 0;
    let mut warnings: c_int = 0;
    let mut warn = [0 as c_char; 256];
    let mut err = [0 as c_char; 256];
    let mut pixels: *mut c_uchar = std::ptr::null_mut();
    // SAFETY: see encode.
    let rc = unsafe {
        jo_decode(
            bytes.as_ptr(),
            bytes.len() as c_ulong,
            &mut w,
            &mut h,
            &mut c,
            &mut mcus,
            &mut warnings,
            warn.as_mut_ptr(),
            warn.len() as c_int,
            &mut pixels,
            err.as_mut_ptr(),
            err.len() as c_int,
        )
    };
    if rc != 0 {
        // SAFETY: NUL-terminated by the shim.
        return Err(unsafe { CStr::from_ptr(err.as_ptr()) }.to_string_lossy().into_owned());
    }
    let len = w as usize * h as usize * c as usize;
    // SAFETY: the shim allocated at least len bytes.
    let px = unsafe { std::slice::from_raw_parts(pixels, len) }.to_vec();
    unsafe { jo_free(pixels) };
    let first_warning = if warnings > 0 {
        Some(unsafe { CStr::from_ptr(warn.as_ptr()) }.to_string_lossy().into_owned())
    } else {
        None
    };
    Ok(Decoded {
        width: w as u32,
        height: h as u32,
        components: c as u32,
        mcu_count: mcus as u64,
        warnings: warnings as u32,
        first_warning,
        pixels: px,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_gray() {
        let px = vec![128u8; 16 * 16];
        let jpg = encode(&EncodeParams::baseline(16, 16, Sampling::Gray), &px).unwrap();
        let d = decode(&jpg).unwrap();
        assert_eq!((d.width, d.height, d.components), (16, 16, 1));
        assert_eq!(d.mcu_count, 4);
        assert!(d.is_clean());
    }

    #[test]
    fn mcu_count_420() {
        let px = vec![90u8; 16 * 16 * 3];
        let jpg = encode(&EncodeParams::baseline(16, 16, Sampling::S420), &px).unwrap();
        assert_eq!(decode(&jpg).unwrap().mcu_count, 1);
    }

    #[test]
    fn truncated_scan_warns() {
        let px: Vec<u8> = (0..64 * 64 * 3).map(|i| (i * 7 % 251) as u8).collect();
        let jpg = encode(&EncodeParams::baseline(64, 64, Sampling::S444), &px).unwrap();
        let mut cut = jpg[..jpg.len() / 2].to_vec();
        cut.extend_from_slice(&[0xFF, 0xD9]);
        let d = decode(&cut).unwrap();
        assert!(d.warnings > 0);
    }
}
