//! Regenerates everything under `fixtures/` except the hand-written sim
//! configs.
//!
//! cargo run -p edgeserve-core --example gen_fixtures -- fixtures

use std::fs;
use std::path::{Path, PathBuf};

use edgeserve_core::confidence::calibrate;
use edgeserve_core::jpeg::{parse_jpeg, plan_mcu_blocks, scan_mcu_boundaries, DEFAULT_MAX_SCAN, DEFAULT_TARGET_BLOCK_BYTES};
use edgeserve_core::oracle::build_trace;
use edgeserve_core::oracle::synth::{generate, SynthParams};
use jpeg_oracle::corpus::render;
use jpeg_oracle::{decode, encode, EncodeParams, Sampling};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

// (width, height, sampling, quality, restart interval, optimized tables)
const IMAGES: [(u32, u32, Sampling, u8, u16, bool); 20] = [
    (128, 128, Sampling::Gray, 85, 0, false),
    (200, 150, Sampling::Gray, 95, 8, true),
    (96, 96, Sampling::S444, 75, 0, false),
    (256, 192, Sampling::S444, 90, 0, true),
    (160, 120, Sampling::S444, 60, 4, false),
    (176, 144, Sampling::S420, 85, 0, false),
    (320, 240, Sampling::S420, 92, 0, false),
    (240, 240, Sampling::S420, 80, 16, true),
    (300, 200, Sampling::S420, 100, 0, false),
    (99, 77, Sampling::S420, 70, 0, false),
    (224, 224, Sampling::S422, 88, 0, false),
    (180, 100, Sampling::S422, 50, 6, false),
    (128, 256, Sampling::S440, 85, 0, false),
    (250, 130, Sampling::S440, 90, 3, true),
    (256, 128, Sampling::S411, 85, 0, false),
    (200, 64, Sampling::S411, 95, 1, false),
    (64, 64, Sampling::S420, 85, 0, false),
    (320, 320, Sampling::S444, 95, 0, false),
    (288, 216, Sampling::S420, 97, 2, false),
    (150, 150, Sampling::Gray, 40, 0, true),
];

fn write_json(path: &Path, v: &impl serde::Serialize) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap() + "\n").unwrap();
}

fn jpegs(root: &Path) {
    let dir = root.join("jpeg");
    fs::create_dir_all(&dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut entries = Vec::new();
    for (i, &(w, h, s, q, r, opt)) in IMAGES.iter().enumerate() {
        let params = EncodeParams { quality: q, restart_interval: r, optimize: opt, ..EncodeParams::baseline(w, h, s) };
        let px = render(&mut rng, w, h, s.components());
        let bytes = encode(&params, &px).unwrap();
        let name = format!("{i:02}-{s:?}-{w}x{h}{}.jpg", if r > 0 { format!("-r{r}") } else { String::new() }).to_lowercase();
        let d = decode(&bytes).unwrap();
        assert!(d.is_clean());
        let img = parse_jpeg(&bytes).unwrap();
        let map = scan_mcu_boundaries(&img).unwrap();
        let plan = plan_mcu_blocks(&img, &map, DEFAULT_MAX_SCAN, DEFAULT_TARGET_BLOCK_BYTES);
        fs::write(dir.join(&name), &bytes).unwrap();
        entries.push(json!({
            "file": name,
            "width": d.width,
            "height": d.height,
            "components": d.components,
            "mcu_count": d.mcu_count,
            "restart_interval": r,
            "quality": q,
            "bytes": bytes.len(),
            "blocks": plan.blocks.len(),
            "recoverable": plan.recoverable,
        }));
    }
    write_json(&dir.join("manifest.json"), &json!({ "decoder": "libjpeg", "images": entries }));
}

fn traces(root: &Path) {
    let dir = root.join("trace");
    fs::create_dir_all(&dir).unwrap();
    let p = SynthParams::default();
    let (front, back, meta) = generate(&p);
    front.write_csv(fs::File::create(dir.join("front.csv")).unwrap()).unwrap();
    back.write_csv(fs::File::create(dir.join("back.csv")).unwrap()).unwrap();
    let trace = build_trace(&front, &back, 1).unwrap();
    trace.write_csv(fs::File::create(dir.join("trace.csv")).unwrap()).unwrap();
    write_json(&dir.join("meta.json"), &meta);
    let reqs: Vec<f64> = (70..=85).map(|i| f64::from(i) / 100.0).collect();
    write_json(&dir.join("table.json"), &calibrate(&trace, &reqs).unwrap());
}

/// Header bytes laid out field by field, independent of the codec.
#[allow(clippy::too_many_arguments)]
fn header_bytes(
    magic: u16,
    version: u8,
    msg: u8,
    flags: u8,
    rid: u32,
    start: u32,
    end: u32,
    block: u32,
    pnum: u8,
    pidx: u8,
    reserved: u8,
    len: u16,
) -> Vec<u8> {
    let mut v = Vec::new();
    v.extend(magic.to_be_bytes());
    v.extend([version, msg, flags]);
    for x in [rid, start, end, block] {
        v.extend(x.to_be_bytes());
    }
    v.extend([pnum, pidx, reserved]);
    v.extend(len.to_be_bytes());
    v
}

fn wire(root: &Path) {
    let dir = root.join("wire");
    fs::create_dir_all(&dir).unwrap();
    let hx = |b: &[u8]| b.iter().map(|x| format!("{x:02x}")).collect::<String>();
    let mut vectors: Vec<Value> = Vec::new();
    let mut ok = |name: &str, bytes: Vec<u8>, payload: &[u8], fields: Value| {
        let mut all = bytes;
        all.extend_from_slice(payload);
        vectors.push(json!({ "name": name, "hex": hx(&all), "valid": true, "header": fields }));
    };
    let f = |j, l, n, r| json!({ "is_jpeg_header": j, "is_last": l, "has_next_partition": n, "recoverable": r });
    ok(
        "jpeg-header-single",
        header_bytes(0xD1AE, 1, 0, 0b1001, 7, u32::MAX, u32::MAX, 0, 1, 0, 0, 4),
        &[0xFF, 0xD8, 0xFF, 0xDB],
        json!({ "msg_type": "DATA", "flags": f(true, false, false, true), "request_id": 7, "start_mcu": u32::MAX,
                "end_mcu": u32::MAX, "block_num": 0, "partition_num": 1, "partition_idx": 0, "payload_len": 4 }),
    );
    ok(
        "data-first-of-three",
        header_bytes(0xD1AE, 1, 0, 0b1100, 0x01020304, 10, 57, 3, 3, 0, 0, 2),
        &[0xAB, 0xCD],
        json!({ "msg_type": "DATA", "flags": f(false, false, true, true), "request_id": 0x01020304u32, "start_mcu": 10,
                "end_mcu": 57, "block_num": 3, "partition_num": 3, "partition_idx": 0, "payload_len": 2 }),
    );
    ok(
        "data-last",
        header_bytes(0xD1AE, 1, 0, 0b1010, 9, 100, 199, 2, 2, 1, 0, 1),
        &[0xD9],
        json!({ "msg_type": "DATA", "flags": f(false, true, false, true), "request_id": 9, "start_mcu": 100,
                "end_mcu": 199, "block_num": 2, "partition_num": 2, "partition_idx": 1, "payload_len": 1 }),
    );
    ok(
        "cancel",
        header_bytes(0xD1AE, 1, 2, 0, 42, 0, 0, 0, 1, 0, 0, 0),
        &[],
        json!({ "msg_type": "CANCEL", "flags": f(false, false, false, false), "request_id": 42, "start_mcu": 0,
                "end_mcu": 0, "block_num": 0, "partition_num": 1, "partition_idx": 0, "payload_len": 0 }),
    );
    let mut bad = |name: &str, bytes: Vec<u8>, error: &str| {
        vectors.push(json!({ "name": name, "hex": hx(&bytes), "valid": false, "error": error }));
    };
    bad("bad-magic", header_bytes(0xD1AF, 1, 0, 0b10, 1, 0, 0, 1, 1, 0, 0, 0), "BadMagic");
    bad("bad-version", header_bytes(0xD1AE, 2, 0, 0b10, 1, 0, 0, 1, 1, 0, 0, 0), "UnsupportedVersion");
    bad("unknown-msg-type", header_bytes(0xD1AE, 1, 3, 0, 1, 0, 0, 0, 1, 0, 0, 0), "UnknownMsgType");
    bad("partition-idx-equals-num", header_bytes(0xD1AE, 1, 0, 0, 1, 0, 0, 1, 2, 2, 0, 0), "InvariantViolation");
    bad("header-without-sentinel", header_bytes(0xD1AE, 1, 0, 1, 1, 0, 0, 0, 1, 0, 0, 0), "InvariantViolation");
    bad("high-flag-bits", header_bytes(0xD1AE, 1, 0, 0x12, 1, 0, 0, 1, 1, 0, 0, 0), "InvariantViolation");
    bad("reserved-nonzero", header_bytes(0xD1AE, 1, 0, 0b10, 1, 0, 0, 1, 1, 0, 5, 0), "InvariantViolation");
    bad("truncated", header_bytes(0xD1AE, 1, 0, 0b10, 1, 0, 0, 1, 1, 0, 0, 0)[..20].to_vec(), "Truncated");
    bad("payload-shorter-than-length", header_bytes(0xD1AE, 1, 0, 0b10, 1, 0, 0, 1, 1, 0, 0, 8), "Truncated");
    write_json(&dir.join("vectors.json"), &json!({ "header_len": 26, "vectors": vectors }));
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    jpegs(&root);
    traces(&root);
    wire(&root);
    println!("fixtures written to {}", root.display());
}
