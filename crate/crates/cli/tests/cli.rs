use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edgeserve"))
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn jpeg(name: &str) -> PathBuf {
    fixtures().join("jpeg").join(name)
}

#[test]
fn version_names_protocol() {
    let out = ok(&["--version"]);
    assert!(out.contains("0xD1AE") && out.contains("version 1"), "{out}");
}

#[test]
fn scan_json_matches_manifest() {
    let m: Value = serde_json::from_slice(&std::fs::read(fixtures().join("jpeg/manifest.json")).unwrap()).unwrap();
    for e in m["images"].as_array().unwrap() {
        let f = jpeg(e["file"].as_str().unwrap());
        let v: Value = serde_json::from_str(&ok(&["scan", s(&f), "--json"])).unwrap();
        assert_eq!(v["mcu_count"], e["mcu_count"], "{}", e["file"]);
        assert_eq!(v["recoverable"], e["recoverable"]);
        assert_eq!(v["blocks"].as_array().unwrap().len() as u64, e["blocks"].as_u64().unwrap());
    }
}

#[test]
fn pack_then_recover_is_identity() {
    let d = tempfile::tempdir().unwrap();
    let src = jpeg("06-s420-320x240.jpg");
    let pk = d.path().join("p");
    ok(&["pack", s(&src), "--request-id", "1", "--mtu", "1200", "--out", s(&pk)]);
    assert!(pk.join("manifest.json").exists() && pk.join("pkt-00000.bin").exists());
    let out = d.path().join("x.jpg");
    let r: Value = serde_json::from_str(&ok(&["recover", "--in", s(&pk), "--out", s(&out)])).unwrap();
    assert_eq!(r["outcome"], "intact");
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&src).unwrap());
}

#[test]
fn lossgen_is_seeded_and_requires_seed() {
    let d = tempfile::tempdir().unwrap();
    let src = jpeg("17-s444-320x320.jpg");
    let listing = |dir: &Path| {
        let mut v: Vec<String> =
            std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        v.sort();
        v
    };
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let pk = d.path().join(name);
        ok(&["pack", s(&src), "--request-id", "3", "--mtu", "600", "--out", s(&pk)]);
        ok(&["lossgen", "--dir", s(&pk), "--rate", "0.05", "--seed", "11", "--spare-header"]);
        runs.push(listing(&pk));
    }
    assert_eq!(runs[0], runs[1]);
    let o = run(&["lossgen", "--dir", s(&d.path().join("a")), "--rate", "0.05"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["kind"], "missing_seed");
    // a damaged directory still recovers to something a decoder accepts
    let out = d.path().join("y.jpg");
    let r: Value =
        serde_json::from_str(&ok(&["recover", "--in", s(&d.path().join("a")), "--mode", "bit", "--out", s(&out)])).unwrap();
    assert_eq!(r["outcome"], "recovered");
    let dec = jpeg_oracle::decode(&std::fs::read(&out).unwrap()).unwrap();
    assert!(dec.is_clean());
    assert_eq!(dec.mcu_count, r["mcu_count_expected"].as_u64().unwrap());
}

#[test]
fn input_errors_exit_one_with_json() {
    for args in [
        vec!["scan", "/no/such/file.jpg"],
        vec!["frobnicate"],
        vec!["pack", "Cargo.toml", "--request-id", "1", "--out", "/tmp/never"],
        vec!["simulate", "--config", "x", "--table", "y", "--trace", "z", "--out", "o"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let text = String::from_utf8(o.stderr).unwrap();
        assert_eq!(text.trim_end().lines().count(), 1, "{text}");
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["error"], "input");
    }
}

#[test]
fn simulate_is_byte_identical_and_report_exports_curves() {
    let d = tempfile::tempdir().unwrap();
    let t = fixtures().join("trace");
    let cfg = fixtures().join("sim/default.toml");
    let outs: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let out = d.path().join(format!("r{i}.json"));
            ok(&[
                "simulate", "--config", s(&cfg), "--table", s(&t.join("table.json")), "--trace",
                s(&t.join("trace.csv")), "--out", s(&out), "--seed", "7",
            ]);
            std::fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    let csv = d.path().join("c.csv");
    let text = ok(&["report", "--in", s(&d.path().join("r0.json")), "--csv", s(&csv)]);
    assert!(text.contains("dual") && text.contains("baseline"));
    let curves = std::fs::read_to_string(csv).unwrap();
    assert!(curves.starts_with("policy,requirement,"));
    assert!(curves.lines().count() > 10);
}

#[test]
fn calibrate_rejects_mismatched_table() {
    let d = tempfile::tempdir().unwrap();
    let t = fixtures().join("trace");
    // a table from a different trace
    let other = d.path().join("t.csv");
    let text = std::fs::read_to_string(t.join("trace.csv")).unwrap();
    let cut: String = text.lines().take(200).map(|l| format!("{l}\n")).collect();
    std::fs::write(&other, cut).unwrap();
    let table = d.path().join("table.json");
    ok(&["calibrate", "--trace", s(&other), "--requirements", "0.7,0.75", "--out", s(&table)]);
    let o = run(&[
        "simulate", "--config", s(&fixtures().join("sim/default.toml")), "--table", s(&table), "--trace",
        s(&t.join("trace.csv")), "--out", s(&d.path().join("r.json")), "--seed", "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn full_pipeline_on_fixture_corpus() {
    let start = Instant::now();
    let d = tempfile::tempdir().unwrap();
    let m: Value = serde_json::from_slice(&std::fs::read(fixtures().join("jpeg/manifest.json")).unwrap()).unwrap();
    for (i, e) in m["images"].as_array().unwrap().iter().enumerate() {
        let pk = d.path().join(format!("p{i}"));
        let id = i.to_string();
        ok(&["pack", s(&jpeg(e["file"].as_str().unwrap())), "--request-id", &id, "--mtu", "1200", "--out", s(&pk)]);
        ok(&["lossgen", "--dir", s(&pk), "--rate", "0.01", "--seed", &id]);
        let r: Value =
            serde_json::from_str(&ok(&["recover", "--in", s(&pk), "--out", s(&d.path().join(format!("{i}.jpg")))])).unwrap();
        assert!(r["outcome"].is_string());
    }
    let t = fixtures().join("trace");
    let table = d.path().join("table.json");
    ok(&["calibrate", "--trace", s(&t.join("trace.csv")), "--requirements", "0.70,0.75,0.80,0.85", "--out", s(&table)]);
    let report = d.path().join("report.json");
    ok(&[
        "simulate", "--config", s(&fixtures().join("sim/fraction.toml")), "--table", s(&table), "--trace",
        s(&t.join("trace.csv")), "--out", s(&report), "--seed", "3",
    ]);
    ok(&["report", "--in", s(&report)]);
    assert!(start.elapsed().as_secs() < 60, "{:?}", start.elapsed());
}
