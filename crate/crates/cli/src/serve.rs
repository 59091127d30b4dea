use std::fmt::Write as _;
use std::path::Path;

use edgeserve_core::confidence::{calibrate as build_table, CalibrationTable, ConfidenceError};
use edgeserve_core::servsim::{run, SimConfig, SimError, SimReport};
use edgeserve_core::trace::ModelTrace;

use crate::error::{read, to_json_pretty, write, CliError};

fn load_trace(path: &Path) -> Result<ModelTrace, CliError> {
    ModelTrace::read_csv(&read(path)?[..]).map_err(|e| CliError::input("trace", format!("{}: {e}", path.display())))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path, kind: &'static str) -> Result<T, CliError> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::input(kind, format!("{}: {e}", path.display())))
}

pub fn calibrate(trace: &Path, requirements: &[f64], out: &Path) -> Result<(), CliError> {
    let t = load_trace(trace)?;
    let table = build_table(&t, requirements).map_err(|e| match e {
        ConfidenceError::EmptyTrace | ConfidenceError::BadRequirement(_) => CliError::input("calibrate", e),
        _ => CliError::Internal(e.to_string()),
    })?;
    write(out, to_json_pretty(&table)?)?;
    let unsat = table.buckets.iter().flat_map(|b| &b.entries).filter(|e| !e.satisfiable).count();
    println!(
        "{}",
        serde_json::json!({ "buckets": table.buckets.len(), "unsatisfiable_entries": unsat, "provenance": table.provenance })
    );
    Ok(())
}

pub fn simulate(config: &Path, table: &Path, trace: &Path, out: &Path, seed: u64) -> Result<(), CliError> {
    let text = String::from_utf8(read(config)?).map_err(|e| CliError::input("config", e))?;
    let mut cfg: SimConfig =
        toml::from_str(&text).map_err(|e| CliError::input("config", format!("{}: {}", config.display(), e.message())))?;
    cfg.seed = seed;
    let table: CalibrationTable = load_json(table, "table")?;
    let t = load_trace(trace)?;
    if table.provenance != t.digest() {
        return Err(CliError::input("table", "table was calibrated from a different trace (provenance mismatch)"));
    }
    let report = run(&cfg, &table, &t).map_err(|e| match e {
        SimError::ConfigInvalid(_) => CliError::input("config", e),
        SimError::TraceMiss { .. } => CliError::input("trace", e),
    })?;
    write(out, to_json_pretty(&report)?)?;
    for p in &report.policies {
        println!(
            "{}",
            serde_json::json!({ "policy": p.policy, "p99_ms": p.latency_ms.p99, "frontend_handled_fraction": p.frontend_handled_fraction })
        );
    }
    Ok(())
}

fn name(p: impl serde::Serialize) -> String {
    serde_json::to_value(p).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

pub fn report(input: &Path, csv: Option<&Path>) -> Result<(), CliError> {
    let r: SimReport = load_json(input, "report")?;
    let mut s = String::new();
    let _ = writeln!(s, "seed {}  requests {}  arrivals {}", r.seed, r.requests, name(r.arrival_process));
    let _ = writeln!(
        s,
        "{:<9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>7} {:>10}",
        "policy", "mean_ms", "p90_ms", "p99_ms", "p100_ms", "frontend", "accuracy", "swaps", "energy_j"
    );
    for p in &r.policies {
        let l = p.latency_ms;
        let _ = writeln!(
            s,
            "{:<9} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.4} {:>9.4} {:>7} {:>10.3}",
            name(p.policy),
            l.mean,
            l.p90,
            l.p99,
            l.p100,
            p.frontend_handled_fraction,
            p.mean_accuracy,
            p.swap_count,
            p.total_energy_j
        );
    }
    if !r.loss_table.is_empty() {
        let _ = writeln!(s, "\n{:<9} {:>9} {:>9} {:>9} {:>9} {:>9}", "loss", "mean_ms", "p99_ms", "frontend", "fallback", "observed");
        for row in &r.loss_table {
            let _ = writeln!(
                s,
                "{:<9} {:>9.3} {:>9.3} {:>9.4} {:>9.4} {:>9.5}",
                row.loss_rate,
                row.latency_ms.mean,
                row.latency_ms.p99,
                row.frontend_handled_fraction,
                row.fallback_fraction,
                row.mean_observed_loss
            );
        }
    }
    print!("{s}");
    if let Some(path) = csv {
        let mut out = String::from("policy,requirement,requests,mean_ms,p90_ms,p99_ms,p100_ms,frontend_handled_fraction\n");
        for p in &r.policies {
            for c in &p.curve {
                let l = c.latency_ms;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    name(p.policy),
                    c.requirement,
                    c.requests,
                    l.mean,
                    l.p90,
                    l.p99,
                    l.p100,
                    c.frontend_handled_fraction
                );
            }
        }
        write(path, out)?;
    }
    Ok(())
}
