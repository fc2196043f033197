//! Monte-Carlo BER sweeps: configuration, trials, aggregation and output.

pub mod config;
pub mod results;
pub mod sweep;
pub mod trial;

pub use config::{
    parse_choice, CodingMode, CsiMode, DetectorKind, DetectorParams, ReceiverKind, SimConfig, StopConfig,
};
pub use results::{emit_results, load_results, BerRecord, Metric, OutputFormat};
pub use sweep::{run_point, run_sweep};
pub use trial::{run_trial, trial_rng, ErrorCount, Role, Simulator, TrialCounts};

use crate::error::RxError;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("results format: {0}")]
    Format(String),
    #[error("frame {frame} at {snr_db} dB, {velocity_kmh} km/h: {source}")]
    Trial {
        frame: u64,
        snr_db: f64,
        velocity_kmh: f64,
        #[source]
        source: RxError,
    },
    #[error(transparent)]
    Rx(#[from] RxError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
