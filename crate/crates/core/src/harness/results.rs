//! BER records, file output and plotting helpers.

use super::config::{CodingMode, CsiMode, DetectorKind, ReceiverKind, SimConfig};
use super::trial::{ErrorCount, TrialCounts};
use super::HarnessError;
use crate::tx::FrameKind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// One sweep point. BERs are absent when no bits of that kind were counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub snr_db: f64,
    pub velocity_kmh: f64,
    pub profile: String,
    pub receiver: ReceiverKind,
    pub detector: DetectorKind,
    pub csi: CsiMode,
    pub coding: CodingMode,
    pub frame_kind: FrameKind,
    pub ber_otfs_raw: Option<f64>,
    pub ber_ofdm_raw: Option<f64>,
    pub ber_otfs_coded: Option<f64>,
    pub ber_ofdm_coded: Option<f64>,
    pub otfs_raw_errors: u64,
    pub otfs_raw_bits: u64,
    pub ofdm_raw_errors: u64,
    pub ofdm_raw_bits: u64,
    pub otfs_coded_errors: u64,
    pub otfs_coded_bits: u64,
    pub ofdm_coded_errors: u64,
    pub ofdm_coded_bits: u64,
    pub frames: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    OtfsRaw,
    OfdmRaw,
    OtfsCoded,
    OfdmCoded,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::OtfsRaw, Metric::OfdmRaw, Metric::OtfsCoded, Metric::OfdmCoded];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::OtfsRaw => "otfs_raw",
            Metric::OfdmRaw => "ofdm_raw",
            Metric::OtfsCoded => "otfs_coded",
            Metric::OfdmCoded => "ofdm_coded",
        })
    }
}

impl BerRecord {
    pub fn from_counts(config: &SimConfig, snr_db: f64, velocity_kmh: f64, c: &TrialCounts) -> Self {
        BerRecord {
            snr_db,
            velocity_kmh,
            profile: config.channel.profile.clone(),
            receiver: config.receiver,
            detector: config.detector,
            csi: config.csi,
            coding: config.coding,
            frame_kind: config.frame_kind,
            ber_otfs_raw: c.otfs_raw.ber(),
            ber_ofdm_raw: c.ofdm_raw.ber(),
            ber_otfs_coded: c.otfs_coded.ber(),
            ber_ofdm_coded: c.ofdm_coded.ber(),
            otfs_raw_errors: c.otfs_raw.errors,
            otfs_raw_bits: c.otfs_raw.bits,
            ofdm_raw_errors: c.ofdm_raw.errors,
            ofdm_raw_bits: c.ofdm_raw.bits,
            otfs_coded_errors: c.otfs_coded.errors,
            otfs_coded_bits: c.otfs_coded.bits,
            ofdm_coded_errors: c.ofdm_coded.errors,
            ofdm_coded_bits: c.ofdm_coded.bits,
            frames: c.frames,
            seed: config.seed,
        }
    }

    pub fn count(&self, metric: Metric) -> ErrorCount {
        let (errors, bits) = match metric {
            Metric::OtfsRaw => (self.otfs_raw_errors, self.otfs_raw_bits),
            Metric::OfdmRaw => (self.ofdm_raw_errors, self.ofdm_raw_bits),
            Metric::OtfsCoded => (self.otfs_coded_errors, self.otfs_coded_bits),
            Metric::OfdmCoded => (self.ofdm_coded_errors, self.ofdm_coded_bits),
        };
        ErrorCount { errors, bits }
    }

    pub fn ber(&self, metric: Metric) -> Option<f64> {
        self.count(metric).ber()
    }

    /// Identifies the curve a record belongs to.
    pub fn series_label(&self) -> String {
        format!(
            "{}_{}kmh_{}_{}_{}_{}_{}",
            self.profile,
            self.velocity_kmh,
            frame_kind_name(self.frame_kind),
            self.receiver,
            self.detector,
            self.csi,
            self.coding
        )
    }
}

fn frame_kind_name(k: FrameKind) -> &'static str {
    match k {
        FrameKind::Hybrid => "hybrid",
        FrameKind::StandaloneOtfs => "standalone_otfs",
        FrameKind::StandaloneOfdm => "standalone_ofdm",
    }
}

/// Standard deviation of a BER estimate from `errors` out of `bits`.
pub fn counting_sigma(count: ErrorCount) -> f64 {
    match count.ber() {
        Some(p) => (p * (1.0 - p) / count.bits as f64).sqrt(),
        None => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(HarnessError::Config(format!("unknown output format {other:?}"))),
        }
    }
}

impl OutputFormat {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }
    }
}

pub fn records_to_string(records: &[BerRecord], format: OutputFormat) -> Result<String, HarnessError> {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(records).map_err(|e| HarnessError::Format(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in records {
                w.serialize(r).map_err(|e| HarnessError::Format(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| HarnessError::Format(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

pub fn records_from_str(text: &str, format: OutputFormat) -> Result<Vec<BerRecord>, HarnessError> {
    match format {
        OutputFormat::Json => serde_json::from_str(text).map_err(|e| HarnessError::Format(e.to_string())),
        OutputFormat::Csv => csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| HarnessError::Format(e.to_string())),
    }
}

pub fn emit_results(records: &[BerRecord], format: OutputFormat, path: &Path) -> Result<(), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Config("no records to write".into()));
    }
    let text = records_to_string(records, format)?;
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn load_results(path: &Path, format: OutputFormat) -> Result<Vec<BerRecord>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    records_from_str(&text, format)
}

/// One point of a plotted curve with a 2-sigma counting band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub series: String,
    pub metric: Metric,
    pub snr_db: f64,
    pub ber: f64,
    pub ber_low: f64,
    pub ber_high: f64,
    pub errors: u64,
    pub bits: u64,
}

/// Groups records into curves, merging records of the same curve whose SNRs
/// fall in the same `bin_db` wide bin (centred on multiples of `bin_db`).
/// With `bin_db = 0` only identical SNRs are merged.
pub fn rebin(records: &[BerRecord], bin_db: f64) -> Vec<PlotPoint> {
    let key = |snr: f64| -> i64 {
        if bin_db > 0.0 {
            (snr / bin_db).round() as i64
        } else {
            (snr * 1e6).round() as i64
        }
    };
    let mut acc: BTreeMap<(String, Metric, i64), (f64, usize, ErrorCount)> = BTreeMap::new();
    for r in records {
        for metric in Metric::ALL {
            let c = r.count(metric);
            if c.bits == 0 {
                continue;
            }
            let e = acc
                .entry((r.series_label(), metric, key(r.snr_db)))
                .or_insert((0.0, 0, ErrorCount::default()));
            e.0 += r.snr_db;
            e.1 += 1;
            e.2 += c;
        }
    }
    acc.into_iter()
        .map(|((series, metric, k), (snr_sum, n, count))| {
            let ber = count.ber().unwrap_or(0.0);
            let s = counting_sigma(count);
            PlotPoint {
                series,
                metric,
                snr_db: if bin_db > 0.0 {
                    k as f64 * bin_db
                } else {
                    snr_sum / n as f64
                },
                ber,
                ber_low: (ber - 2.0 * s).max(0.0),
                ber_high: (ber + 2.0 * s).min(1.0),
                errors: count.errors,
                bits: count.bits,
            }
        })
        .collect()
}

pub fn plot_points_to_csv(points: &[PlotPoint]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p).map_err(|e| HarnessError::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// SNR at which a BER curve first falls to `target`, interpolating
/// `log10(BER)` linearly between the bracketing points. Points must be sorted
/// by SNR; zero-BER points are treated as one error in `bits`.
pub fn crossing_snr(curve: &[(f64, ErrorCount)], target: f64) -> Option<f64> {
    let log_ber = |c: &ErrorCount| (c.errors.max(1) as f64 / c.bits.max(1) as f64).log10();
    let t = target.log10();
    curve.windows(2).find_map(|w| {
        let (s0, b0) = (w[0].0, log_ber(&w[0].1));
        let (s1, b1) = (w[1].0, log_ber(&w[1].1));
        if b0 >= t && b1 <= t {
            if (b0 - b1).abs() < f64::EPSILON {
                Some(s0)
            } else {
                Some(s0 + (s1 - s0) * (b0 - t) / (b0 - b1))
            }
        } else {
            None
        }
    })
}

/// `(snr, count)` curve of one metric, sorted by SNR.
pub fn curve(records: &[BerRecord], metric: Metric) -> Vec<(f64, ErrorCount)> {
    let mut c: Vec<(f64, ErrorCount)> = records
        .iter()
        .map(|r| (r.snr_db, r.count(metric)))
        .filter(|(_, c)| c.bits > 0)
        .collect();
    c.sort_by(|a, b| a.0.total_cmp(&b.0));
    c
}
