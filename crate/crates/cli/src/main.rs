use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hybrid_otfs::harness::results::{plot_points_to_csv, rebin, records_to_string};
use hybrid_otfs::harness::{emit_results, load_results, parse_choice, run_sweep, OutputFormat, SimConfig};
use hybrid_otfs::selftest::run_selftest;
use std::path::PathBuf;
use std::process::ExitCode;

/// Hybrid OTFS/OFDM link-level simulator.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a BER sweep and write one record per (velocity, SNR) point.
    Sweep(Box<SweepArgs>),
    /// Run the built-in invariant checks.
    Selftest,
    /// Merge sweep records into plot-ready curves with 2-sigma bands.
    Plotdata(PlotArgs),
    /// Print the default configuration.
    Config,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// TOML configuration; the shipped defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json; guessed from --out when omitted.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// SNR points in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// Velocities in km/h, comma separated.
    #[arg(long, value_delimiter = ',')]
    speed: Option<Vec<f64>>,
    /// tfds, tdic, blind_tdic or genie_tdic.
    #[arg(long)]
    receiver: Option<String>,
    /// lmmse or mrc_dfe.
    #[arg(long)]
    detector: Option<String>,
    /// Profile name (EPA, EVA, ETU, flat, identity) or CSV path.
    #[arg(long)]
    channel: Option<String>,
    /// none or ldpc.
    #[arg(long)]
    coding: Option<String>,
    /// perfect or estimated.
    #[arg(long)]
    csi: Option<String>,
    /// hybrid, standalone_otfs or standalone_ofdm.
    #[arg(long)]
    frame_kind: Option<String>,
    /// Maximum frames per point.
    #[arg(long)]
    frames: Option<u64>,
    /// Raw bit errors per component that end a point early.
    #[arg(long)]
    target_errors: Option<u64>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Sweep output (csv or json).
    input: PathBuf,
    /// SNR bin width in dB; 0 merges identical SNRs only.
    #[arg(long, default_value_t = 0.0)]
    bin: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve_config(a: &SweepArgs) -> Result<SimConfig> {
    let mut cfg = match &a.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.workers {
        cfg.workers = Some(v);
    }
    if let Some(v) = &a.snr {
        cfg.snr_db = v.clone();
    }
    if let Some(v) = &a.speed {
        cfg.channel.velocities_kmh = v.clone();
    }
    if let Some(v) = &a.receiver {
        cfg.receiver = parse_choice(v)?;
    }
    if let Some(v) = &a.detector {
        cfg.detector = parse_choice(v)?;
    }
    if let Some(v) = &a.channel {
        cfg.channel.profile = v.clone();
    }
    if let Some(v) = &a.coding {
        cfg.coding = parse_choice(v)?;
    }
    if let Some(v) = &a.csi {
        cfg.csi = parse_choice(v)?;
    }
    if let Some(v) = &a.frame_kind {
        cfg.frame_kind = parse_choice(v)?;
    }
    if let Some(v) = a.frames {
        cfg.stop.max_frames = v;
        cfg.stop.min_frames = cfg.stop.min_frames.min(v);
    }
    if let Some(v) = a.target_errors {
        cfg.stop.target_errors = Some(v);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let cfg = resolve_config(a)?;
    let format = match (&a.format, &a.out) {
        (Some(f), _) => f.parse::<OutputFormat>()?,
        (None, Some(p)) => OutputFormat::from_path(p),
        (None, None) => OutputFormat::Csv,
    };
    let records = run_sweep(&cfg)?;
    match &a.out {
        Some(p) => emit_results(&records, format, p).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", records_to_string(&records, format)?),
    }
    Ok(())
}

fn plotdata(a: &PlotArgs) -> Result<()> {
    if !(a.bin.is_finite() && a.bin >= 0.0) {
        bail!("--bin must be a non-negative number of dB");
    }
    let records = load_results(&a.input, OutputFormat::from_path(&a.input))?;
    let text = plot_points_to_csv(&rebin(&records, a.bin))?;
    match &a.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Sweep(a) => sweep(&a)?,
        Command::Plotdata(a) => plotdata(&a)?,
        Command::Config => print!("{}", hybrid_otfs::harness::config::DEFAULT_CONFIG),
        Command::Selftest => {
            let checks = run_selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
