use std::path::Path;

use edgeserve_core::jpeg::{parse_jpeg, plan_mcu_blocks, scan_mcu_boundaries, JpegImage, McuBlockPlan};
use edgeserve_core::lossmodel::{LossConfig, LossKind};
use edgeserve_core::recovery::{recover_packets, Outcome, Placement, RecoveryError, RecoveryMode, RecoveryOptions};
use edgeserve_core::wire::{build_packets, Packet, WireError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{read, to_json_pretty, write, CliError};

#[derive(Debug, Serialize, Deserialize)]
pub struct BlockEntry {
    pub block_num: u32,
    pub start_mcu: u32,
    pub end_mcu: u32,
    pub bytes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PacketEntry {
    pub file: String,
    pub block_num: u32,
    pub partition_idx: u8,
    pub partition_num: u8,
    pub is_jpeg_header: bool,
    pub is_last: bool,
    pub payload_len: u16,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub request_id: u32,
    pub source: String,
    pub source_bytes: usize,
    pub source_sha256: String,
    pub mtu: usize,
    pub width: u16,
    pub height: u16,
    pub mcu_count_expected: u64,
    pub recoverable: bool,
    pub blocks: Vec<BlockEntry>,
    pub packets: Vec<PacketEntry>,
}

#[derive(Debug, Serialize)]
struct ScanReport {
    file: String,
    width: u16,
    height: u16,
    components: usize,
    restart_interval: u16,
    mcu_count: usize,
    mcu_count_expected: u64,
    byte_aligned_mcus: usize,
    recoverable: bool,
    blocks: Vec<BlockEntry>,
}

fn jpeg_err(e: impl std::fmt::Display) -> CliError {
    CliError::input("jpeg", e)
}

fn wire_err(e: WireError) -> CliError {
    match e {
        WireError::InvariantViolation(_) => CliError::Internal(e.to_string()),
        _ => CliError::input("wire", e),
    }
}

fn load(file: &Path, max_scan: usize, target: usize) -> Result<(Vec<u8>, JpegImage, McuBlockPlan, usize), CliError> {
    let bytes = read(file)?;
    let img = parse_jpeg(&bytes).map_err(jpeg_err)?;
    let map = scan_mcu_boundaries(&img).map_err(jpeg_err)?;
    let aligned = map.byte_aligned.iter().filter(|&&a| a).count();
    let plan = plan_mcu_blocks(&img, &map, max_scan, target);
    Ok((bytes, img, plan, aligned))
}

fn block_entries(plan: &McuBlockPlan) -> Vec<BlockEntry> {
    plan.blocks
        .iter()
        .enumerate()
        .map(|(i, b)| BlockEntry { block_num: i as u32 + 1, start_mcu: b.start_mcu, end_mcu: b.end_mcu, bytes: b.len() })
        .collect()
}

pub fn scan(file: &Path, json: bool, max_scan: usize, target: usize) -> Result<(), CliError> {
    let (_, img, plan, aligned) = load(file, max_scan, target)?;
    let mcu_count = plan.blocks.last().map_or(0, |b| b.end_mcu as usize + 1);
    let r = ScanReport {
        file: file.display().to_string(),
        width: img.width(),
        height: img.height(),
        components: img.header.components.len(),
        restart_interval: img.restart_interval(),
        mcu_count,
        mcu_count_expected: img.mcu_count_expected(),
        byte_aligned_mcus: aligned,
        recoverable: plan.recoverable,
        blocks: block_entries(&plan),
    };
    if json {
        print!("{}", to_json_pretty(&r)?);
        return Ok(());
    }
    println!("{}: {}x{}, {} components, restart interval {}", r.file, r.width, r.height, r.components, r.restart_interval);
    println!("mcu_count {} (aligned ends {})", r.mcu_count, r.byte_aligned_mcus);
    println!("blocks {} recoverable {}", r.blocks.len(), r.recoverable);
    for b in &r.blocks {
        println!("  block {:>4}  mcus {:>6}-{:<6} {:>7} bytes", b.block_num, b.start_mcu, b.end_mcu, b.bytes);
    }
    Ok(())
}

fn packet_file(i: usize) -> String {
    format!("pkt-{i:05}.bin")
}

pub fn pack(file: &Path, request_id: u32, mtu: usize, out: &Path, max_scan: usize, target: usize) -> Result<(), CliError> {
    let (bytes, img, plan, _) = load(file, max_scan, target)?;
    let set = build_packets(&img, &plan, request_id, mtu).map_err(wire_err)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    // stale datagrams from an earlier pack would be picked up by recover
    for entry in std::fs::read_dir(out).map_err(|e| CliError::io(out, e))? {
        let p = entry.map_err(|e| CliError::io(out, e))?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("pkt-") && name.ends_with(".bin") {
            std::fs::remove_file(&p).map_err(|e| CliError::io(&p, e))?;
        }
    }
    let mut packets = Vec::with_capacity(set.packets.len());
    for (i, p) in set.packets.iter().enumerate() {
        let name = packet_file(i);
        write(&out.join(&name), p.encode().map_err(wire_err)?)?;
        let h = &p.header;
        packets.push(PacketEntry {
            file: name,
            block_num: h.block_num,
            partition_idx: h.partition_idx,
            partition_num: h.partition_num,
            is_jpeg_header: h.flags.is_jpeg_header,
            is_last: h.flags.is_last,
            payload_len: h.payload_len,
        });
    }
    let m = Manifest {
        request_id,
        source: file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        source_bytes: bytes.len(),
        source_sha256: hex::encode(Sha256::digest(&bytes)),
        mtu,
        width: img.width(),
        height: img.height(),
        mcu_count_expected: img.mcu_count_expected(),
        recoverable: plan.recoverable,
        blocks: block_entries(&plan),
        packets,
    };
    write(&out.join("manifest.json"), to_json_pretty(&m)?)?;
    println!(
        "{}",
        serde_json::json!({ "packets": m.packets.len(), "blocks": m.blocks.len(), "recoverable": m.recoverable, "out": out.display().to_string() })
    );
    Ok(())
}

fn read_manifest(path: &Path) -> Result<Manifest, CliError> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::input("manifest", format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
struct LossgenReport {
    seed: u64,
    model: LossKind,
    rate: f64,
    burst: f64,
    packets: usize,
    dropped: Vec<String>,
}

pub fn lossgen(dir: &Path, rate: f64, burst: f64, model: LossKind, seed: u64, spare_header: bool) -> Result<(), CliError> {
    let cfg = LossConfig { model, rate, burst };
    cfg.validate().map_err(|e| CliError::input("loss_model", e))?;
    let m = read_manifest(&dir.join("manifest.json"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut process = cfg.process();
    let mut dropped = Vec::new();
    for p in &m.packets {
        // draw for every packet so sparing the header does not shift the rest
        let lost = process.next_lost(&mut rng);
        if lost && !(spare_header && p.is_jpeg_header) {
            let path = dir.join(&p.file);
            match std::fs::remove_file(&path) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(CliError::io(&path, e)),
            }
            dropped.push(p.file.clone());
        }
    }
    let r = LossgenReport { seed, model, rate, burst, packets: m.packets.len(), dropped };
    println!("{}", serde_json::to_string(&r).map_err(|e| CliError::Internal(e.to_string()))?);
    Ok(())
}

#[derive(Debug, Serialize)]
struct RecoverReport {
    request_id: u32,
    outcome: Outcome,
    lost_mcu_total: u64,
    loss_fraction: f64,
    mcu_count_expected: u64,
    salvaged_mcus: u64,
    packets_expected: usize,
    packets_received: usize,
    files_rejected: usize,
    output: Option<String>,
}

pub fn recover(
    dir: &Path,
    manifest: Option<&Path>,
    mode: RecoveryMode,
    placement: Placement,
    out: &Path,
    report: Option<&Path>,
) -> Result<(), CliError> {
    let mpath = manifest.map(Path::to_path_buf).unwrap_or_else(|| dir.join("manifest.json"));
    let m = read_manifest(&mpath)?;
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    names.sort();
    let mut packets = Vec::new();
    let mut rejected = 0;
    for p in &names {
        match Packet::decode(&read(p)?) {
            Ok(pkt) if pkt.header.request_id == m.request_id => packets.push(pkt),
            _ => rejected += 1,
        }
    }
    let r = recover_packets(m.request_id, &packets, RecoveryOptions { mode, placement }).map_err(|e| match e {
        RecoveryError::Conflict(_) | RecoveryError::Wire(_) => CliError::input("datagrams", e),
        _ => CliError::Internal(e.to_string()),
    })?;
    let output = if r.bytes.is_empty() {
        None
    } else {
        write(out, &r.bytes)?;
        Some(out.display().to_string())
    };
    let rep = RecoverReport {
        request_id: m.request_id,
        outcome: r.outcome,
        lost_mcu_total: r.lost_mcu_total,
        loss_fraction: r.loss_fraction,
        mcu_count_expected: r.mcu_count_expected,
        salvaged_mcus: r.salvaged_mcus,
        packets_expected: m.packets.len(),
        packets_received: packets.len(),
        files_rejected: rejected,
        output,
    };
    let text = serde_json::to_string(&rep).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(p) = report {
        write(p, format!("{text}\n"))?;
    }
    println!("{text}");
    Ok(())
}
