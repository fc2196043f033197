//! Threshold-based delay-Doppler channel estimation from a pilot frame.
//!
//! The pilot frame is a standalone OTFS frame (`r = 1`, all `N` columns)
//! carrying one pulse at delay-Doppler bin `(l_p, k_p)`. Each on-grid path
//! `(g, l, k)` maps that pulse to bin `(l_p + l, k_p + k)` with value
//! `A g exp(j2 pi k l_p / (MN))`, so reading the bins above `kappa * sigma`
//! returns the paths directly.

use super::{ChannelError, ChannelRealization, ChannelTap, EdgeMode, NoiseModel, PhaseReference};
use crate::geometry::FrameGeometry;
use crate::grid::{Grid, TimeFrame, C64};
use crate::transforms::{heisenberg, isfft, wigner, IsfftDirection};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotSpec {
    pub delay_bin: usize,
    pub doppler_bin: usize,
    /// Pulse amplitude in the delay-Doppler domain.
    pub amplitude: f64,
}

impl PilotSpec {
    /// Pulse at `(0, 0)` carrying the energy of a full unit-power frame (`MN`).
    pub fn full_frame(geometry: &FrameGeometry) -> Self {
        PilotSpec {
            delay_bin: 0,
            doppler_bin: 0,
            amplitude: (geometry.frame_len() as f64).sqrt(),
        }
    }

    /// Time-domain pilot frame over all `N` columns of `geometry`.
    pub fn build_frame(&self, geometry: &FrameGeometry) -> TimeFrame {
        let mut dd = Grid::zeros(geometry.m(), geometry.n());
        dd[(self.delay_bin, self.doppler_bin)] = C64::new(self.amplitude, 0.0);
        heisenberg(&isfft(&dd, IsfftDirection::DdToTf))
    }
}

/// Reads every delay-Doppler bin whose magnitude exceeds `kappa * sigma` as
/// one on-grid path relative to the pilot position.
pub fn estimate_dd_channel(
    received: &TimeFrame,
    geometry: &FrameGeometry,
    pilot: &PilotSpec,
    noise: &NoiseModel,
    kappa: f64,
) -> Result<ChannelRealization, ChannelError> {
    let (m, n) = (geometry.m(), geometry.n());
    if received.len() != m * n {
        return Err(ChannelError::FrameLength {
            expected: m * n,
            got: received.len(),
        });
    }
    let tf = wigner(received, m).expect("length checked");
    let dd = isfft(&tf, IsfftDirection::TfToDd);
    let threshold = kappa * noise.sigma2().sqrt();
    let ts = geometry.sample_period();
    let doppler_step = geometry.delta_f() / n as f64;
    let mut taps = Vec::new();
    for k in 0..n {
        for l in 0..m {
            let y = dd[(l, k)];
            if y.norm() <= threshold {
                continue;
            }
            let delay = (l + m - pilot.delay_bin) % m;
            let mut k_rel = ((k + n - pilot.doppler_bin) % n) as i64;
            if k_rel > (n / 2) as i64 {
                k_rel -= n as i64;
            }
            let doppler_hz = k_rel as f64 * doppler_step;
            let phase = 2.0 * PI * doppler_hz * pilot.delay_bin as f64 * ts;
            taps.push(ChannelTap {
                gain: y / (pilot.amplitude * C64::from_polar(1.0, phase)),
                delay_ns: delay as f64 * ts * 1e9,
                delay_samples: delay,
                doppler_hz,
            });
        }
    }
    if taps.is_empty() {
        return Err(ChannelError::EmptyChannel);
    }
    let nu_max = taps.iter().map(|t| t.doppler_hz.abs()).fold(0.0, f64::max);
    Ok(ChannelRealization {
        taps,
        mode: EdgeMode::Linear,
        phase_ref: PhaseReference::DelayedSample,
        profile: "estimated".into(),
        nu_max,
    })
}
