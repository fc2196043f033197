//! Doubly-dispersive tapped-delay-line channels.
//!
//! A realization is a short list of paths, each with a complex gain, an
//! integer sample delay and a Doppler shift. The same realization can be
//! applied sample by sample, materialized as the sparse `MN x MN` matrix
//! `H_t`, or approximated per time-frequency bin (`H_tf`, and the per-symbol
//! OFDM response).

mod estimate;
mod profile;

pub use estimate::{estimate_dd_channel, PilotSpec};
pub use profile::{DelayProfile, ProfileRecord};

use crate::geometry::FrameGeometry;
use crate::grid::{Grid, TimeFrame, C64};
use crate::sparse::CsrMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Propagation speed used for the Doppler computation.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("unknown channel profile `{0}`")]
    UnknownProfile(String),
    #[error("channel profile `{0}` has no taps")]
    EmptyProfile(String),
    #[error("bad channel profile: {0}")]
    BadProfile(String),
    #[error("velocity must be finite and non-negative, got {0}")]
    Velocity(f64),
    #[error("tap delay {delay} samples does not fit a frame of {frame_len} samples")]
    DelayTooLong { delay: usize, frame_len: usize },
    #[error("CP shorter than delay spread: L_cp = {l_cp}, max delay = {max_delay} samples")]
    CpTooShort { l_cp: usize, max_delay: usize },
    #[error("frame length {got} does not match geometry ({expected})")]
    FrameLength { expected: usize, got: usize },
    #[error("noise variance must be positive, got {0}")]
    NoiseVariance(f64),
    #[error("OFDM symbol index {index} outside [0, {n})")]
    SymbolIndex { index: usize, n: usize },
    #[error("no delay-Doppler bin exceeds the detection threshold")]
    EmptyChannel,
}

/// How samples beyond the frame edges are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Samples before the frame start are zero.
    #[default]
    Linear,
    /// Indices wrap modulo `MN`.
    FrameCyclic,
    /// Indices wrap inside each `M`-sample symbol block, as if every symbol
    /// carried an ideal cyclic prefix.
    BlockCyclic,
}

/// Time origin of the Doppler phase of a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseReference {
    /// Phase follows the delayed input sample, `exp(j2 pi nu (q - l) Ts)`.
    #[default]
    DelayedSample,
    /// Phase follows the output sample, `exp(j2 pi nu q Ts)`.
    OutputSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelTap {
    pub gain: C64,
    pub delay_ns: f64,
    pub delay_samples: usize,
    pub doppler_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub taps: Vec<ChannelTap>,
    pub mode: EdgeMode,
    pub phase_ref: PhaseReference,
    pub profile: String,
    pub nu_max: f64,
}

/// Maximum Doppler shift for a speed in km/h at carrier `f_c`.
pub fn max_doppler(velocity_kmh: f64, f_c: f64) -> f64 {
    velocity_kmh / 3.6 * f_c / SPEED_OF_LIGHT
}

/// Draws one block-fading realization: Rayleigh tap gains with the profile's
/// powers and per-path Doppler uniform on `[0, nu_max)`.
pub fn sample_realization<R: Rng + ?Sized>(
    profile: &DelayProfile,
    velocity_kmh: f64,
    geometry: &FrameGeometry,
    rng: &mut R,
) -> Result<ChannelRealization, ChannelError> {
    if !(velocity_kmh.is_finite() && velocity_kmh >= 0.0) {
        return Err(ChannelError::Velocity(velocity_kmh));
    }
    if profile.powers().is_empty() {
        return Err(ChannelError::EmptyProfile(profile.name().to_string()));
    }
    let nu_max = max_doppler(velocity_kmh, geometry.f_c());
    let fs = geometry.sample_rate();
    let taps = profile
        .delays_ns()
        .iter()
        .zip(profile.powers())
        .map(|(&delay_ns, &power)| {
            let scale = (power / 2.0).sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let doppler_hz = if nu_max > 0.0 { rng.gen_range(0.0..nu_max) } else { 0.0 };
            ChannelTap {
                gain: C64::new(re, im) * scale,
                delay_ns,
                delay_samples: (delay_ns * 1e-9 * fs).round() as usize,
                doppler_hz,
            }
        })
        .collect();
    Ok(ChannelRealization {
        taps,
        mode: EdgeMode::Linear,
        phase_ref: PhaseReference::DelayedSample,
        profile: profile.name().to_string(),
        nu_max,
    })
}

impl ChannelRealization {
    /// Static single-path channel.
    pub fn single_tap(gain: C64, delay_samples: usize, doppler_hz: f64, geometry: &FrameGeometry) -> Self {
        ChannelRealization {
            taps: vec![ChannelTap {
                gain,
                delay_ns: delay_samples as f64 * geometry.sample_period() * 1e9,
                delay_samples,
                doppler_hz,
            }],
            mode: EdgeMode::Linear,
            phase_ref: PhaseReference::DelayedSample,
            profile: "custom".into(),
            nu_max: doppler_hz.abs(),
        }
    }

    pub fn identity(geometry: &FrameGeometry) -> Self {
        ChannelRealization::single_tap(C64::new(1.0, 0.0), 0, 0.0, geometry)
    }

    pub fn with_mode(mut self, mode: EdgeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_phase_ref(mut self, phase_ref: PhaseReference) -> Self {
        self.phase_ref = phase_ref;
        self
    }

    /// Rounds each Doppler shift to the nearest multiple of `resolution_hz`
    /// (the delay-Doppler grid spacing `delta_f / N` gives on-grid channels).
    pub fn quantize_doppler(mut self, resolution_hz: f64) -> Self {
        for t in &mut self.taps {
            t.doppler_hz = (t.doppler_hz / resolution_hz).round() * resolution_hz;
        }
        self
    }

    pub fn max_delay(&self) -> usize {
        self.taps.iter().map(|t| t.delay_samples).max().unwrap_or(0)
    }

    /// Rejects realizations whose delay spread exceeds the OFDM cyclic prefix.
    pub fn check_cp(&self, geometry: &FrameGeometry) -> Result<(), ChannelError> {
        let max_delay = self.max_delay();
        if max_delay > geometry.l_cp() {
            return Err(ChannelError::CpTooShort {
                l_cp: geometry.l_cp(),
                max_delay,
            });
        }
        Ok(())
    }

    fn check_frame(&self, frame_len: usize) -> Result<(), ChannelError> {
        match self.taps.iter().find(|t| t.delay_samples >= frame_len) {
            Some(t) => Err(ChannelError::DelayTooLong {
                delay: t.delay_samples,
                frame_len,
            }),
            None => Ok(()),
        }
    }

    /// Source sample index feeding output `q` through a path of delay `l`.
    fn source(&self, q: usize, l: usize, m: usize, frame_len: usize) -> Option<usize> {
        match self.mode {
            EdgeMode::Linear => q.checked_sub(l),
            EdgeMode::FrameCyclic => Some((q + frame_len - l) % frame_len),
            EdgeMode::BlockCyclic => {
                let base = q - q % m;
                Some(base + (q % m + m - l % m) % m)
            }
        }
    }

    /// Coefficient of `H_t[q, src]` contributed by `tap`.
    fn coefficient(&self, tap: &ChannelTap, q: usize, src: usize, ts: f64) -> C64 {
        let t = match self.phase_ref {
            PhaseReference::DelayedSample => src,
            PhaseReference::OutputSample => q,
        } as f64;
        tap.gain * C64::from_polar(1.0, 2.0 * PI * tap.doppler_hz * t * ts)
    }
}

/// Direct per-sample evaluation of `r[q] = sum_i h_i(q) s[q - l_i]` (no noise).
pub fn apply_channel(
    frame: &TimeFrame,
    ch: &ChannelRealization,
    geometry: &FrameGeometry,
) -> Result<TimeFrame, ChannelError> {
    let len = geometry.frame_len();
    if frame.len() != len {
        return Err(ChannelError::FrameLength {
            expected: len,
            got: frame.len(),
        });
    }
    ch.check_frame(len)?;
    let (m, ts) = (geometry.m(), geometry.sample_period());
    let s = frame.samples();
    let mut out = vec![C64::default(); len];
    for tap in &ch.taps {
        for (q, o) in out.iter_mut().enumerate() {
            if let Some(src) = ch.source(q, tap.delay_samples, m, len) {
                *o += ch.coefficient(tap, q, src, ts) * s[src];
            }
        }
    }
    Ok(TimeFrame::new(out))
}

/// Sparse time-domain channel matrix `H_t` with at most one entry per path per row.
pub fn build_ht(ch: &ChannelRealization, geometry: &FrameGeometry) -> Result<CsrMatrix, ChannelError> {
    let len = geometry.frame_len();
    ch.check_frame(len)?;
    let (m, ts) = (geometry.m(), geometry.sample_period());
    let mut triplets = Vec::with_capacity(len * ch.taps.len());
    for q in 0..len {
        for tap in &ch.taps {
            if let Some(src) = ch.source(q, tap.delay_samples, m, len) {
                triplets.push((q, src, ch.coefficient(tap, q, src, ts)));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(len, len, triplets))
}

/// Per-bin multiplicative approximation `H_tf[m, n]`, with each path's
/// Doppler phase taken at the start of symbol `n`.
pub fn build_htf(ch: &ChannelRealization, geometry: &FrameGeometry) -> Grid {
    let (m, n) = (geometry.m(), geometry.n());
    let ts = geometry.sample_period();
    Grid::from_fn(m, n, |row, col| {
        ch.taps
            .iter()
            .map(|tap| {
                let doppler = 2.0 * PI * tap.doppler_hz * (col * m) as f64 * ts;
                let delay = -2.0 * PI * (row * tap.delay_samples) as f64 / m as f64;
                tap.gain * C64::from_polar(1.0, doppler + delay)
            })
            .sum()
    })
}

/// Where inside an OFDM symbol the single-tap response samples the Doppler phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OfdmPhaseReference {
    /// First sample after the CP.
    #[default]
    SymbolStart,
    /// Centre of the post-CP window, following each path's delayed input:
    /// the time-average of the path phase over the samples the receiver keeps.
    MidSymbol,
}

/// Frequency response seen by the `M - L_cp` point OFDM receiver in time column `n`.
pub fn ofdm_freq_response(
    ch: &ChannelRealization,
    n: usize,
    geometry: &FrameGeometry,
    reference: OfdmPhaseReference,
) -> Result<Vec<C64>, ChannelError> {
    if n >= geometry.n() {
        return Err(ChannelError::SymbolIndex {
            index: n,
            n: geometry.n(),
        });
    }
    let (m, l_cp, k) = (geometry.m(), geometry.l_cp(), geometry.ofdm_len());
    let ts = geometry.sample_period();
    let start = (n * m + l_cp) as f64;
    let phases: Vec<(C64, usize)> = ch
        .taps
        .iter()
        .map(|tap| {
            let t = match reference {
                OfdmPhaseReference::SymbolStart => start,
                OfdmPhaseReference::MidSymbol => start + (k as f64 - 1.0) / 2.0 - tap.delay_samples as f64,
            };
            (
                tap.gain * C64::from_polar(1.0, 2.0 * PI * tap.doppler_hz * t * ts),
                tap.delay_samples,
            )
        })
        .collect();
    Ok((0..k)
        .map(|bin| {
            phases
                .iter()
                .map(|(g, l)| g * C64::from_polar(1.0, -2.0 * PI * (bin * l) as f64 / k as f64))
                .sum()
        })
        .collect())
}

/// Per-sample complex noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self, ChannelError> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(ChannelError::NoiseVariance(sigma2));
        }
        Ok(NoiseModel { sigma2 })
    }

    /// `sigma^2 = 10^(-snr/10)` for a unit-power transmit frame.
    pub fn from_snr_db(snr_db: f64) -> Self {
        NoiseModel::new(10f64.powf(-snr_db / 10.0)).expect("finite SNR")
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// Adds circularly-symmetric complex Gaussian noise of variance `sigma^2` per sample.
pub fn add_awgn<R: Rng + ?Sized>(frame: &TimeFrame, noise: &NoiseModel, rng: &mut R) -> TimeFrame {
    let scale = (noise.sigma2 / 2.0).sqrt();
    TimeFrame::new(
        frame
            .samples()
            .iter()
            .map(|s| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                s + C64::new(re, im) * scale
            })
            .collect(),
    )
}
