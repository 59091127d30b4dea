//! `edgeserve`: pack, damage, recover, calibrate and simulate from the shell.
//!
//! Exit codes: 0 success, 1 input error, 2 internal failure. Errors are one
//! JSON object on one stderr line.

mod error;
mod serve;
mod transport;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use edgeserve_core::lossmodel::LossKind;
use edgeserve_core::recovery::{Placement, RecoveryMode};
use edgeserve_core::wire::{DEFAULT_MTU_PAYLOAD, MAGIC, VERSION};

use crate::error::CliError;

fn version() -> &'static str {
    Box::leak(format!("{} (protocol magic 0x{MAGIC:04X}, version {VERSION})", env!("CARGO_PKG_VERSION")).into_boxed_str())
}

#[derive(Parser)]
#[command(name = "edgeserve", version = version(), about = "Loss-tolerant JPEG transport and confidence-scaled serving tools")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Block,
    Bit,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlacementArg {
    Tail,
    InPlace,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Bernoulli,
    GilbertElliott,
}

#[derive(Subcommand)]
enum Cmd {
    /// Map MCUs and plan byte-aligned blocks for one JPEG.
    Scan {
        file: PathBuf,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = edgeserve_core::jpeg::DEFAULT_MAX_SCAN)]
        max_scan: usize,
        #[arg(long, default_value_t = edgeserve_core::jpeg::DEFAULT_TARGET_BLOCK_BYTES)]
        target_bytes: usize,
    },
    /// Split a JPEG into datagram files plus manifest.json.
    Pack {
        file: PathBuf,
        #[arg(long)]
        request_id: u32,
        #[arg(long, default_value_t = DEFAULT_MTU_PAYLOAD)]
        mtu: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = edgeserve_core::jpeg::DEFAULT_MAX_SCAN)]
        max_scan: usize,
        #[arg(long, default_value_t = edgeserve_core::jpeg::DEFAULT_TARGET_BLOCK_BYTES)]
        target_bytes: usize,
    },
    /// Delete datagram files from a pack directory with a seeded loss model.
    Lossgen {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        rate: f64,
        /// Mean loss-burst length (Gilbert-Elliott only).
        #[arg(long, default_value_t = 1.0)]
        burst: f64,
        #[arg(long, value_enum, default_value_t = LossArg::Bernoulli)]
        model: LossArg,
        #[arg(long)]
        seed: Option<u64>,
        /// Never drop JPEG header packets.
        #[arg(long)]
        spare_header: bool,
    },
    /// Rebuild a JPEG from whatever datagram files remain.
    Recover {
        #[arg(long = "in")]
        input: PathBuf,
        /// Defaults to manifest.json inside the input directory.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Block)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = PlacementArg::Tail)]
        placement: PlacementArg,
        #[arg(long)]
        out: PathBuf,
        /// Also write the loss report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build a threshold table from a trace.
    Calibrate {
        #[arg(long)]
        trace: PathBuf,
        /// Comma-separated accuracy requirements.
        #[arg(long, value_delimiter = ',', required = true)]
        requirements: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the serving simulator.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a simulator report as tables; optionally export curves.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Scan { file, json, max_scan, target_bytes } => transport::scan(&file, json, max_scan, target_bytes),
        Cmd::Pack { file, request_id, mtu, out, max_scan, target_bytes } => {
            transport::pack(&file, request_id, mtu, &out, max_scan, target_bytes)
        }
        Cmd::Lossgen { dir, rate, burst, model, seed, spare_header } => {
            let seed = seed.ok_or_else(|| CliError::input("missing_seed", "lossgen is randomized; pass --seed"))?;
            let model = match model {
                LossArg::Bernoulli => LossKind::Bernoulli,
                LossArg::GilbertElliott => LossKind::GilbertElliott,
            };
            transport::lossgen(&dir, rate, burst, model, seed, spare_header)
        }
        Cmd::Recover { input, manifest, mode, placement, out, report } => {
            let mode = match mode {
                ModeArg::Block => RecoveryMode::Block,
                ModeArg::Bit => RecoveryMode::Bit,
            };
            let placement = match placement {
                PlacementArg::Tail => Placement::Tail,
                PlacementArg::InPlace => Placement::InPlace,
            };
            transport::recover(&input, manifest.as_deref(), mode, placement, &out, report.as_deref())
        }
        Cmd::Calibrate { trace, requirements, out } => serve::calibrate(&trace, &requirements, &out),
        Cmd::Simulate { config, table, trace, out, seed } => {
            let seed = seed.ok_or_else(|| CliError::input("missing_seed", "simulate is randomized; pass --seed"))?;
            serve::simulate(&config, &table, &trace, &out, seed)
        }
        Cmd::Report { input, csv } => serve::report(&input, csv.as_deref()),
    }
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|info| {
        eprintln!("{}", CliError::Internal(info.to_string()).to_json());
        std::process::exit(2);
    }));
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::input("usage", first).to_json());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code())
        }
    }
}
