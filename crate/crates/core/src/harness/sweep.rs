//! Monte-Carlo sweeps over SNR and velocity.
//!
//! Frames of a point are simulated in parallel batches, but the stopping rule
//! is applied in frame-index order: the point ends at the first frame where
//! the rule holds and later frames of that batch are discarded. Output is
//! therefore independent of the batch size and the worker count.

use super::config::{SimConfig, StopConfig};
use super::results::BerRecord;
use super::trial::{Simulator, TrialCounts};
use super::HarnessError;
use rayon::prelude::*;

fn should_stop(acc: &TrialCounts, stop: &StopConfig) -> bool {
    if acc.frames >= stop.max_frames {
        return true;
    }
    if acc.frames < stop.min_frames {
        return false;
    }
    let Some(target) = stop.target_errors else {
        return false;
    };
    let active: Vec<u64> = [acc.otfs_raw, acc.ofdm_raw]
        .iter()
        .filter(|c| c.bits > 0)
        .map(|c| c.errors)
        .collect();
    !active.is_empty() && active.iter().all(|&e| e >= target)
}

/// Aggregated counts of one sweep point.
pub fn run_point(sim: &Simulator, snr_db: f64, velocity_kmh: f64, batch: usize) -> Result<TrialCounts, HarnessError> {
    let stop = sim.config().stop;
    let batch = batch.max(1) as u64;
    let mut acc = TrialCounts::default();
    let mut next = 0u64;
    while next < stop.max_frames {
        let end = (next + batch).min(stop.max_frames);
        let results: Vec<Result<TrialCounts, HarnessError>> = (next..end)
            .into_par_iter()
            .map(|f| sim.run_trial(snr_db, velocity_kmh, f))
            .collect();
        for r in results {
            acc += r?;
            if should_stop(&acc, &stop) {
                return Ok(acc);
            }
        }
        next = end;
    }
    Ok(acc)
}

/// Runs every (velocity, SNR) point of the config, velocities outermost.
pub fn run_sweep(config: &SimConfig) -> Result<Vec<BerRecord>, HarnessError> {
    let sim = Simulator::new(config)?;
    let body = || -> Result<Vec<BerRecord>, HarnessError> {
        let batch = 2 * rayon::current_num_threads();
        let mut records = Vec::new();
        for &v in &config.channel.velocities_kmh {
            for &snr in &config.snr_db {
                let counts = run_point(&sim, snr, v, batch)?;
                records.push(BerRecord::from_counts(config, snr, v, &counts));
            }
        }
        Ok(records)
    };
    match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?
            .install(body),
        None => body(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::trial::ErrorCount;

    fn counts(frames: u64, otfs: u64, ofdm: u64) -> TrialCounts {
        TrialCounts {
            otfs_raw: ErrorCount {
                errors: otfs,
                bits: 100,
            },
            ofdm_raw: ErrorCount {
                errors: ofdm,
                bits: 100,
            },
            frames,
            ..TrialCounts::default()
        }
    }

    #[test]
    fn stopping_rule() {
        let stop = StopConfig {
            max_frames: 10,
            min_frames: 2,
            target_errors: Some(5),
        };
        assert!(!should_stop(&counts(1, 9, 9), &stop));
        assert!(should_stop(&counts(2, 5, 5), &stop));
        assert!(!should_stop(&counts(3, 5, 4), &stop));
        assert!(should_stop(&counts(10, 0, 0), &stop));
        let mut only_otfs = counts(3, 6, 0);
        only_otfs.ofdm_raw.bits = 0;
        assert!(should_stop(&only_otfs, &stop));
        let no_target = StopConfig {
            target_errors: None,
            ..stop
        };
        assert!(!should_stop(&counts(9, 99, 99), &no_target));
    }
}
