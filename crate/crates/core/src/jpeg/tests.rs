use jpeg_oracle::corpus::{baseline_corpus, render};
use jpeg_oracle::{encode, EncodeParams, Sampling};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn make(w: u32, h: u32, s: Sampling, ri: u16) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(w as u64 * 1000 + h as u64);
    let px = render(&mut rng, w, h, s.components());
    let mut p = EncodeParams::baseline(w, h, s);
    p.restart_interval = ri;
    encode(&p, &px).unwrap()
}

#[test]
fn gray_16x16_has_four_mcus() {
    let img = parse_jpeg(&make(16, 16, Sampling::Gray, 0)).unwrap();
    assert_eq!(img.mcu_count_expected(), 4);
    let map = scan_mcu_boundaries(&img).unwrap();
    assert_eq!(map.mcu_count(), 4);
    assert_eq!(map.boundaries[0], 0);
}

#[test]
fn yuv420_16x16_has_one_mcu() {
    let img = parse_jpeg(&make(16, 16, Sampling::S420, 0)).unwrap();
    assert_eq!(img.mcu_count_expected(), 1);
    assert_eq!(scan_mcu_boundaries(&img).unwrap().mcu_count(), 1);
}

#[test]
fn partial_mcus_round_up() {
    let img = parse_jpeg(&make(33, 17, Sampling::S420, 0)).unwrap();
    assert_eq!(img.header.mcu_grid(), (3, 2));
    let img = parse_jpeg(&make(33, 17, Sampling::S411, 0)).unwrap();
    assert_eq!(img.header.mcu_grid(), (2, 3));
}

#[test]
fn spans_cover_file() {
    let bytes = make(40, 24, Sampling::S422, 0);
    let img = parse_jpeg(&bytes).unwrap();
    assert_eq!(img.header_span.start, 0);
    assert_eq!(img.header_span.end, img.scan_span.start);
    assert_eq!(img.trailer_bytes(), &[0xFF, 0xD9]);
    let mut joined = img.header_bytes().to_vec();
    joined.extend_from_slice(img.scan_bytes());
    joined.extend_from_slice(img.trailer_bytes());
    assert_eq!(joined, bytes);
}

#[test]
fn rejects_progressive_and_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let px = render(&mut rng, 32, 32, 3);
    let mut p = EncodeParams::baseline(32, 32, Sampling::S420);
    p.progressive = true;
    let err = parse_jpeg(&encode(&p, &px).unwrap()).unwrap_err();
    assert!(matches!(err, JpegError::NotBaseline { marker: 0xC2, .. }), "{err:?}");
    let mut p = EncodeParams::baseline(32, 32, Sampling::S420);
    p.arithmetic = true;
    let err = parse_jpeg(&encode(&p, &px).unwrap()).unwrap_err();
    assert!(matches!(err, JpegError::NotBaseline { marker: 0xC9, .. }), "{err:?}");
}

#[test]
fn truncated_file_is_reported() {
    let bytes = make(64, 64, Sampling::S444, 0);
    let img = parse_jpeg(&bytes).unwrap();
    let cut = &bytes[..img.scan_span.start + 20];
    assert!(matches!(parse_jpeg(cut), Err(JpegError::TruncatedFile { .. })));
    let cut = &bytes[..10];
    assert!(parse_jpeg(cut).is_err());
}

#[test]
fn truncated_scan_is_corrupt() {
    let bytes = make(64, 64, Sampling::S444, 0);
    let img = parse_jpeg(&bytes).unwrap();
    let mut b = bytes[..img.scan_span.start + img.scan_span.len() / 2].to_vec();
    b.extend_from_slice(&[0xFF, 0xD9]);
    let img2 = parse_jpeg(&b).unwrap();
    match scan_mcu_boundaries(&img2) {
        Err(JpegError::CorruptScan { mcu, .. }) => assert!(mcu > 0 && mcu < 64),
        other => panic!("{other:?}"),
    }
}

#[test]
fn restart_boundaries_are_aligned() {
    let img = parse_jpeg(&make(64, 48, Sampling::S420, 3)).unwrap();
    let map = scan_mcu_boundaries(&img).unwrap();
    assert_eq!(map.mcu_count(), 12);
    let scan = img.scan_bytes();
    for m in [2usize, 5, 8] {
        assert!(map.byte_aligned[m]);
        let end = map.aligned_end_byte(m).unwrap();
        // the block keeps the marker
        assert_eq!(scan[end - 2], 0xFF);
        assert_eq!(scan[end - 1], 0xD0 + ((m as u8 + 1) / 3 - 1) % 8);
    }
}

#[test]
fn boundaries_never_point_at_stuffing() {
    for ci in baseline_corpus(30, 11, 96) {
        let img = parse_jpeg(&ci.bytes).unwrap();
        let map = scan_mcu_boundaries(&img).unwrap();
        let scan = img.scan_bytes();
        for w in map.boundaries.windows(2) {
            assert!(w[0] < w[1]);
        }
        for &b in &map.boundaries {
            let byte = (b / 8) as usize;
            if b % 8 == 0 && byte > 0 && byte < scan.len() {
                assert!(!(scan[byte - 1] == 0xFF && scan[byte] == 0x00), "{}", ci.name);
            }
        }
    }
}

#[test]
fn plan_tiles_the_scan() {
    for ci in baseline_corpus(40, 21, 200) {
        let img = parse_jpeg(&ci.bytes).unwrap();
        let map = scan_mcu_boundaries(&img).unwrap();
        for target in [64usize, 256, 1024] {
            let plan = plan_mcu_blocks(&img, &map, DEFAULT_MAX_SCAN, target);
            let mut next_mcu = 0u32;
            let mut next_byte = 0usize;
            for b in &plan.blocks {
                assert_eq!(b.start_mcu, next_mcu);
                assert_eq!(b.byte_range.start, next_byte);
                assert!(b.end_mcu >= b.start_mcu);
                next_mcu = b.end_mcu + 1;
                next_byte = b.byte_range.end;
            }
            assert_eq!(next_mcu as u64, img.mcu_count_expected());
            assert_eq!(next_byte, img.scan_span.len());
            assert_eq!(plan.recoverable, plan.blocks.len() >= 2);
            for b in &plan.blocks[..plan.blocks.len() - 1] {
                assert!(b.len() >= target || plan.blocks.len() == 1, "{}", ci.name);
            }
        }
    }
}

#[test]
fn prefix_of_blocks_decodes_cleanly() {
    for ci in baseline_corpus(20, 33, 160) {
        let img = parse_jpeg(&ci.bytes).unwrap();
        let map = scan_mcu_boundaries(&img).unwrap();
        let plan = plan_mcu_blocks(&img, &map, DEFAULT_MAX_SCAN, 128);
        if !plan.recoverable {
            continue;
        }
        let first = &plan.blocks[0];
        let u = Unstuffed::new(&img.scan_bytes()[first.byte_range.clone()]);
        let walker = McuWalker::new(&img.header);
        let (spans, fault) = walker.walk(&u, 0, first.mcu_count() as u64);
        assert!(fault.is_none(), "{}", ci.name);
        assert_eq!(spans.len() as u32, first.mcu_count());
    }
}
