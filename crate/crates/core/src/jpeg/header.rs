//! Marker-segment parsing up to and including the SOS header, and location of
//! the entropy-coded scan.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::huffman::HuffmanTable;
use super::JpegError;

pub(crate) const SOI: u8 = 0xD8;
pub(crate) const EOI: u8 = 0xD9;
const SOS: u8 = 0xDA;
const DHT: u8 = 0xC4;
const DRI: u8 = 0xDD;
const SOF0: u8 = 0xC0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub id: u8,
    pub h_sampling: u8,
    pub v_sampling: u8,
    pub quant_table_id: u8,
    /// DC/AC Huffman table selectors from the SOS header.
    pub dc_table: u8,
    pub ac_table: u8,
}

/// Everything the decoder needs from the header section (SOI through the SOS
/// segment).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JpegHeader {
    pub width: u16,
    pub height: u16,
    /// Frame components, in frame order.
    pub components: Vec<Component>,
    /// Indices into `components` in scan order.
    pub scan_order: Vec<usize>,
    pub dc_tables: [Option<HuffmanTable>; 4],
    pub ac_tables: [Option<HuffmanTable>; 4],
    /// MCUs between RST markers; 0 when restart markers are not used.
    pub restart_interval: u16,
    /// Length in bytes of the header section, i.e. the offset where the
    /// entropy-coded data begins.
    pub header_len: usize,
}

impl JpegHeader {
    fn max_sampling(&self) -> (u32, u32) {
        self.components.iter().fold((1, 1), |(h, v), c| {
            (h.max(c.h_sampling as u32), v.max(c.v_sampling as u32))
        })
    }

    /// True when the scan carries a single component (one block per MCU).
    pub fn is_non_interleaved(&self) -> bool {
        self.scan_order.len() == 1
    }

    /// MCU grid `(columns, rows)`.
    pub fn mcu_grid(&self) -> (u32, u32) {
        let (w, h) = (self.width as u32, self.height as u32);
        let (hmax, vmax) = self.max_sampling();
        if self.is_non_interleaved() {
            // A lone component is coded block by block over its own
            // (possibly subsampled) extent.
            let c = &self.components[self.scan_order[0]];
            let cw = (w * c.h_sampling as u32).div_ceil(hmax);
            let ch = (h * c.v_sampling as u32).div_ceil(vmax);
            (cw.div_ceil(8), ch.div_ceil(8))
        } else {
            (w.div_ceil(8 * hmax), h.div_ceil(8 * vmax))
        }
    }

    /// Total MCUs the decoder will expect in the scan.
    pub fn mcu_count_expected(&self) -> u64 {
        let (c, r) = self.mcu_grid();
        c as u64 * r as u64
    }

    /// Per-MCU block sequence as `(component index, dc table, ac table)`.
    pub fn mcu_blocks(&self) -> Vec<(usize, u8, u8)> {
        if self.is_non_interleaved() {
            let i = self.scan_order[0];
            let c = &self.components[i];
            return vec![(i, c.dc_table, c.ac_table)];
        }
        let mut out = Vec::new();
        for &i in &self.scan_order {
            let c = &self.components[i];
            for _ in 0..(c.h_sampling as usize * c.v_sampling as usize) {
                out.push((i, c.dc_table, c.ac_table));
            }
        }
        out
    }

    /// Parses the header section of `bytes`, stopping after the SOS segment.
    pub fn parse(bytes: &[u8]) -> Result<JpegHeader, JpegError> {
        if bytes.len() < 2 {
            return Err(JpegError::TruncatedFile { marker: SOI, offset: 0 });
        }
        if bytes[0] != 0xFF || bytes[1] != SOI {
            return Err(JpegError::MalformedMarker {
                marker: bytes[1],
                offset: 0,
                reason: "missing SOI".into(),
            });
        }
        let mut dc_tables: [Option<HuffmanTable>; 4] = Default::default();
        let mut ac_tables: [Option<HuffmanTable>; 4] = Default::default();
        let mut restart_interval = 0u16;
        let mut frame: Option<(u16, u16, Vec<Component>)> = None;
        let mut i = 2usize;
        loop {
            // Marker, with any number of 0xFF fill bytes.
            if i >= bytes.len() {
                return Err(JpegError::TruncatedFile { marker: 0, offset: i });
            }
            if bytes[i] != 0xFF {
                return Err(JpegError::MalformedMarker {
                    marker: bytes[i],
                    offset: i,
                    reason: "expected a marker".into(),
                });
            }
            let marker_at = i;
            while i < bytes.len() && bytes[i] == 0xFF {
                i += 1;
            }
            if i >= bytes.len() {
                return Err(JpegError::TruncatedFile { marker: 0xFF, offset: marker_at });
            }
            let marker = bytes[i];
            i += 1;
            match marker {
                0x01 | 0xD0..=0xD7 => continue,
                0x00 => {
                    return Err(JpegError::MalformedMarker {
                        marker,
                        offset: marker_at,
                        reason: "stuffed zero outside entropy data".into(),
                    })
                }
                EOI | SOI => {
                    return Err(JpegError::MalformedMarker {
                        marker,
                        offset: marker_at,
                        reason: "unexpected before SOS".into(),
                    })
                }
                _ => {}
            }
            if i + 2 > bytes.len() {
                return Err(JpegError::TruncatedFile { marker, offset: marker_at });
            }
            let seg_len = u16::from_be_bytes([bytes[i], bytes[i + 1]]) as usize;
            if seg_len < 2 {
                return Err(JpegError::MalformedMarker {
                    marker,
                    offset: marker_at,
                    reason: format!("segment length {seg_len}"),
                });
            }
            if i + seg_len > bytes.len() {
                return Err(JpegError::TruncatedFile { marker, offset: marker_at });
            }
            let body = &bytes[i + 2..i + seg_len];
            let end = i + seg_len;
            let malformed = |reason: &str| JpegError::MalformedMarker {
                marker,
                offset: marker_at,
                reason: reason.to_string(),
            };
            match marker {
                SOF0 => {
                    if frame.is_some() {
                        return Err(malformed("second frame header"));
                    }
                    frame = Some(parse_sof(body, marker, marker_at)?);
                }
                0xC1..=0xC3 | 0xC5..=0xC7 | 0xC9..=0xCB | 0xCD..=0xCF => {
                    let what = match marker {
                        0xC1 => "extended sequential",
                        0xC2 => "progressive",
                        0xC3 => "lossless",
                        0xC9..=0xCB | 0xCD..=0xCF => "arithmetic coding",
                        _ => "hierarchical",
                    };
                    return Err(JpegError::NotBaseline { marker, offset: marker_at, what });
                }
                0xCC => {
                    return Err(JpegError::NotBaseline {
                        marker,
                        offset: marker_at,
                        what: "arithmetic conditioning",
                    })
                }
                0xDC => {
                    return Err(JpegError::NotBaseline { marker, offset: marker_at, what: "DNL" })
                }
                0xDE | 0xDF | 0xC8 => {
                    return Err(JpegError::NotBaseline {
                        marker,
                        offset: marker_at,
                        what: "hierarchical",
                    })
                }
                DHT => parse_dht(body, &mut dc_tables, &mut ac_tables).map_err(|r| malformed(&r))?,
                DRI => {
                    if body.len() != 2 {
                        return Err(malformed("DRI length"));
                    }
                    restart_interval = u16::from_be_bytes([body[0], body[1]]);
                }
                SOS => {
                    let Some((width, height, mut components)) = frame.take() else {
                        return Err(malformed("SOS before frame header"));
                    };
                    let scan_order = parse_sos(body, &mut components).map_err(|r| malformed(&r))?;
                    let header = JpegHeader {
                        width,
                        height,
                        components,
                        scan_order,
                        dc_tables,
                        ac_tables,
                        restart_interval,
                        header_len: end,
                    };
                    for (_, dc, ac) in header.mcu_blocks() {
                        if header.dc_tables[dc as usize].is_none() {
                            return Err(malformed(&format!("DC table {dc} not defined")));
                        }
                        if header.ac_tables[ac as usize].is_none() {
                            return Err(malformed(&format!("AC table {ac} not defined")));
                        }
                    }
                    return Ok(header);
                }
                0x02..=0xBF => return Err(malformed("reserved marker")),
                // APPn, COM, DQT, DAC-free extensions: skipped.
                _ => {}
            }
            i = end;
        }
    }
}

fn parse_sof(body: &[u8], marker: u8, offset: usize) -> Result<(u16, u16, Vec<Component>), JpegError> {
    let malformed = |reason: String| JpegError::MalformedMarker { marker, offset, reason };
    if body.len() < 6 {
        return Err(malformed("frame header too short".into()));
    }
    if body[0] != 8 {
        return Err(JpegError::NotBaseline { marker, offset, what: "sample precision other than 8" });
    }
    let height = u16::from_be_bytes([body[1], body[2]]);
    let width = u16::from_be_bytes([body[3], body[4]]);
    if height == 0 {
        return Err(JpegError::NotBaseline { marker, offset, what: "height deferred to DNL" });
    }
    if width == 0 {
        return Err(malformed("zero width".into()));
    }
    let n = body[5] as usize;
    if n == 0 || n > 4 || body.len() != 6 + 3 * n {
        return Err(malformed(format!("{n} components in {} bytes", body.len())));
    }
    let mut comps: Vec<Component> = Vec::with_capacity(n);
    for c in body[6..].chunks_exact(3) {
        let (h, v) = (c[1] >> 4, c[1] & 0x0F);
        if !(1..=4).contains(&h) || !(1..=4).contains(&v) {
            return Err(malformed(format!("sampling factors {h}x{v}")));
        }
        if comps.iter().any(|x| x.id == c[0]) {
            return Err(malformed(format!("duplicate component id {}", c[0])));
        }
        comps.push(Component {
            id: c[0],
            h_sampling: h,
            v_sampling: v,
            quant_table_id: c[2],
            dc_table: 0,
            ac_table: 0,
        });
    }
    Ok((width, height, comps))
}

fn parse_dht(
    mut body: &[u8],
    dc: &mut [Option<HuffmanTable>; 4],
    ac: &mut [Option<HuffmanTable>; 4],
) -> Result<(), String> {
    while !body.is_empty() {
        if body.len() < 17 {
            return Err("truncated DHT".into());
        }
        let (class, id) = (body[0] >> 4, (body[0] & 0x0F) as usize);
        if class > 1 || id > 3 {
            return Err(format!("bad table class/id {class}/{id}"));
        }
        let mut counts = [0u8; 16];
        counts.copy_from_slice(&body[1..17]);
        let n: usize = counts.iter().map(|&c| c as usize).sum();
        if body.len() < 17 + n {
            return Err("truncated DHT symbols".into());
        }
        let table = HuffmanTable::new(counts, body[17..17 + n].to_vec())?;
        if class == 0 {
            dc[id] = Some(table);
        } else {
            ac[id] = Some(table);
        }
        body = &body[17 + n..];
    }
    Ok(())
}

fn parse_sos(body: &[u8], comps: &mut [Component]) -> Result<Vec<usize>, String> {
    if body.is_empty() {
        return Err("empty SOS".into());
    }
    let n = body[0] as usize;
    if n == 0 || n > 4 || body.len() != 1 + 2 * n + 3 {
        return Err(format!("{n} scan components in {} bytes", body.len()));
    }
    let mut order = Vec::with_capacity(n);
    for c in body[1..1 + 2 * n].chunks_exact(2) {
        let idx = comps
            .iter()
            .position(|x| x.id == c[0])
            .ok_or_else(|| format!("scan references unknown component {}", c[0]))?;
        if order.contains(&idx) {
            return Err(format!("component {} listed twice", c[0]));
        }
        let (td, ta) = (c[1] >> 4, c[1] & 0x0F);
        if td > 3 || ta > 3 {
            return Err(format!("table selectors {td}/{ta}"));
        }
        comps[idx].dc_table = td;
        comps[idx].ac_table = ta;
        order.push(idx);
    }
    let tail = &body[1 + 2 * n..];
    if tail != [0, 63, 0] {
        return Err(format!("spectral selection {:?} is not sequential", tail));
    }
    if n != comps.len() {
        return Err("scan does not cover every component (multi-scan image)".into());
    }
    if n > 1 {
        let blocks: usize = comps.iter().map(|c| c.h_sampling as usize * c.v_sampling as usize).sum();
        if blocks > 10 {
            return Err(format!("{blocks} blocks per MCU exceeds 10"));
        }
    }
    Ok(order)
}

/// Locates the end of the entropy-coded segment that starts at `start`:
/// returns the offset of the EOI marker (including any fill bytes before it).
pub(crate) fn find_scan_end(bytes: &[u8], start: usize) -> Result<usize, JpegError> {
    let mut p = start;
    while p < bytes.len() {
        if bytes[p] != 0xFF {
            p += 1;
            continue;
        }
        let mut q = p + 1;
        while q < bytes.len() && bytes[q] == 0xFF {
            q += 1;
        }
        if q >= bytes.len() {
            break;
        }
        match bytes[q] {
            0x00 if q == p + 1 => p = q + 1,
            0xD0..=0xD7 => p = q + 1,
            EOI => return Ok(p),
            0x00 => {
                return Err(JpegError::MalformedMarker {
                    marker: 0x00,
                    offset: p,
                    reason: "fill bytes before stuffed zero".into(),
                })
            }
            m @ (SOS | DHT | 0xDB | DRI | 0xDC) => {
                return Err(JpegError::NotBaseline {
                    marker: m,
                    offset: p,
                    what: "more than one scan",
                })
            }
            m => {
                return Err(JpegError::MalformedMarker {
                    marker: m,
                    offset: p,
                    reason: "unexpected marker inside scan".into(),
                })
            }
        }
    }
    Err(JpegError::TruncatedFile { marker: SOS, offset: bytes.len() })
}

/// Byte spans of a parsed file.
pub(crate) fn spans(header: &JpegHeader, scan_end: usize) -> (Range<usize>, Range<usize>) {
    (0..header.header_len, header.header_len..scan_end)
}
