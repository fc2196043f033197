//! One transmit, channel and receive pass.

use super::config::{CodingMode, CsiMode, DetectorKind, ReceiverKind, SimConfig};
use super::HarnessError;
use crate::blind_ic::{blind_cancel, BlindContext};
use crate::channel::{
    add_awgn, apply_channel, build_ht, build_htf, estimate_dd_channel, sample_realization, ChannelRealization,
    DelayProfile, NoiseModel, PilotSpec,
};
use crate::coding::{CodeSpec, RateMatcher};
use crate::error::RxError;
use crate::geometry::FrameGeometry;
use crate::grid::TimeFrame;
use crate::rx_ofdm::{decision_grid, detect_ofdm_columns, OfdmSymbolEstimate};
use crate::rx_otfs::{detect_otfs_lmmse, detect_otfs_mrc_dfe, tdic_cancel, tfds_detect, DdEstimate, EffectiveChannel};
use crate::tx::{build_frame, FrameKind, FrameLayout, HybridFrame};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ops::AddAssign;

/// Independent random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Role {
    Payload = 0,
    Channel = 1,
    Noise = 2,
    PilotNoise = 3,
}

/// Generator for `(seed, frame, role)`: ChaCha stream `frame`, with each role
/// starting 2^48 words apart.
pub fn trial_rng(seed: u64, frame: u64, role: Role) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame);
    rng.set_word_pos((role as u128) << 48);
    rng
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCount {
    pub errors: u64,
    pub bits: u64,
}

impl ErrorCount {
    pub fn compare(decided: &[u8], truth: &[u8]) -> Self {
        debug_assert_eq!(decided.len(), truth.len());
        ErrorCount {
            errors: decided.iter().zip(truth).filter(|(a, b)| a != b).count() as u64,
            bits: truth.len() as u64,
        }
    }

    pub fn ber(&self) -> Option<f64> {
        (self.bits > 0).then(|| self.errors as f64 / self.bits as f64)
    }
}

impl AddAssign for ErrorCount {
    fn add_assign(&mut self, o: Self) {
        self.errors += o.errors;
        self.bits += o.bits;
    }
}

/// Error counts of one or more frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialCounts {
    pub otfs_raw: ErrorCount,
    pub ofdm_raw: ErrorCount,
    pub otfs_coded: ErrorCount,
    pub ofdm_coded: ErrorCount,
    pub frames: u64,
}

impl AddAssign for TrialCounts {
    fn add_assign(&mut self, o: Self) {
        self.otfs_raw += o.otfs_raw;
        self.ofdm_raw += o.ofdm_raw;
        self.otfs_coded += o.otfs_coded;
        self.ofdm_coded += o.ofdm_coded;
        self.frames += o.frames;
    }
}

/// Bits and codes of one component.
#[derive(Debug, Clone)]
struct Component {
    coded_bits: usize,
    matcher: Option<RateMatcher>,
}

impl Component {
    fn new(coded_bits: usize, code: Option<&CodeSpec>) -> Result<Self, HarnessError> {
        let matcher = match code {
            Some(c) if coded_bits > 0 => Some(RateMatcher::new(c, coded_bits).map_err(RxError::from)?),
            _ => None,
        };
        Ok(Component { coded_bits, matcher })
    }

    /// (message, transmitted bits)
    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<(Vec<u8>, Vec<u8>), RxError> {
        match &self.matcher {
            Some(m) => {
                let msg: Vec<u8> = (0..m.message_len()).map(|_| rng.gen_range(0..2)).collect();
                let coded = m.encode(&msg)?;
                Ok((msg, coded))
            }
            None => {
                let bits: Vec<u8> = (0..self.coded_bits).map(|_| rng.gen_range(0..2)).collect();
                Ok((Vec::new(), bits))
            }
        }
    }

    fn score(
        &self,
        hard: &[u8],
        llr: impl FnOnce() -> Result<Vec<f64>, RxError>,
        msg: &[u8],
        sent: &[u8],
        max_iters: usize,
    ) -> Result<(ErrorCount, ErrorCount), RxError> {
        let raw = ErrorCount::compare(hard, sent);
        let coded = match &self.matcher {
            Some(m) => {
                let dec = m.decode(&llr()?, max_iters)?;
                ErrorCount::compare(&dec.message, msg)
            }
            None => ErrorCount::default(),
        };
        Ok((raw, coded))
    }
}

/// Everything derived from a config that does not change between trials.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    profile: Option<DelayProfile>,
    layout: FrameLayout,
    otfs_geometry: FrameGeometry,
    otfs: Component,
    ofdm: Component,
}

/// Everything one trial produced, for inspection beyond error counts.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub counts: TrialCounts,
    pub frame: HybridFrame,
    pub true_channel: ChannelRealization,
    pub rx_channel: ChannelRealization,
    pub ofdm: Vec<OfdmSymbolEstimate>,
    pub otfs: Option<DdEstimate>,
    /// Pool index picked by the blind receiver.
    pub blind_choice: Option<usize>,
}

impl Simulator {
    pub fn new(config: &SimConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let g = &config.geometry;
        let layout = match (&config.ofdm_slots, config.frame_kind) {
            (Some(slots), FrameKind::Hybrid) => FrameLayout::hybrid_slots(g, slots),
            (_, kind) => FrameLayout::standalone(kind, g),
        };
        let otfs_geometry = match config.frame_kind {
            FrameKind::StandaloneOtfs => g.standalone_otfs(),
            _ => g.clone(),
        };
        let code = match config.coding {
            CodingMode::Ldpc => Some(CodeSpec::shipped()),
            CodingMode::None => None,
        };
        let otfs_bits = layout.otfs_symbols(g) * config.otfs_modulation.bits_per_symbol();
        let ofdm_bits = layout.ofdm_symbols(g) * config.ofdm_modulation.bits_per_symbol();
        Ok(Simulator {
            profile: config.profile()?,
            otfs: Component::new(otfs_bits, code)?,
            ofdm: Component::new(ofdm_bits, code)?,
            config: config.clone(),
            layout,
            otfs_geometry,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn layout(&self) -> &FrameLayout {
        &self.layout
    }

    /// Raw bits per frame of the (OTFS, OFDM) components.
    pub fn raw_bits(&self) -> (usize, usize) {
        (self.otfs.coded_bits, self.ofdm.coded_bits)
    }

    /// Error counts of frame `frame` at one sweep point.
    pub fn run_trial(&self, snr_db: f64, velocity_kmh: f64, frame: u64) -> Result<TrialCounts, HarnessError> {
        Ok(self.run_trial_detailed(snr_db, velocity_kmh, frame)?.counts)
    }

    pub fn run_trial_detailed(&self, snr_db: f64, velocity_kmh: f64, frame: u64) -> Result<TrialOutput, HarnessError> {
        self.trial(snr_db, velocity_kmh, frame)
            .map_err(|source| HarnessError::Trial {
                frame,
                snr_db,
                velocity_kmh,
                source,
            })
    }

    fn channel(&self, velocity_kmh: f64, rng: &mut ChaCha8Rng) -> Result<ChannelRealization, RxError> {
        let cfg = &self.config;
        let g = &cfg.geometry;
        let ch = match &self.profile {
            Some(p) => sample_realization(p, velocity_kmh, g, rng)?,
            None => ChannelRealization::identity(g),
        };
        let ch = ch
            .with_mode(cfg.channel.edge_mode)
            .with_phase_ref(cfg.channel.phase_reference);
        Ok(if cfg.channel.on_grid || cfg.csi == CsiMode::Estimated {
            ch.quantize_doppler(g.delta_f() / g.n() as f64)
        } else {
            ch
        })
    }

    fn trial(&self, snr_db: f64, velocity_kmh: f64, frame: u64) -> Result<TrialOutput, RxError> {
        let cfg = &self.config;
        let g = &cfg.geometry;
        let seed = cfg.seed;
        let params = &cfg.detector_params;

        let mut payload_rng = trial_rng(seed, frame, Role::Payload);
        let (otfs_msg, otfs_sent) = self.otfs.draw(&mut payload_rng)?;
        let (ofdm_msg, ofdm_sent) = self.ofdm.draw(&mut payload_rng)?;
        let tx = build_frame(&otfs_sent, &ofdm_sent, &self.layout, g, &cfg.tx_config())?;

        let true_channel = self.channel(velocity_kmh, &mut trial_rng(seed, frame, Role::Channel))?;
        let noise = NoiseModel::from_snr_db(snr_db);
        let rx = add_awgn(
            &apply_channel(&tx.samples, &true_channel, g)?,
            &noise,
            &mut trial_rng(seed, frame, Role::Noise),
        );
        let rx_channel = match cfg.csi {
            CsiMode::Perfect => true_channel.clone(),
            CsiMode::Estimated => {
                let pilot = PilotSpec::full_frame(g);
                let received = add_awgn(
                    &apply_channel(&pilot.build_frame(g), &true_channel, g)?,
                    &noise,
                    &mut trial_rng(seed, frame, Role::PilotNoise),
                );
                estimate_dd_channel(&received, g, &pilot, &noise, params.kappa)?
                    .with_mode(true_channel.mode)
                    .with_phase_ref(true_channel.phase_ref)
            }
        };

        let mut counts = TrialCounts {
            frames: 1,
            ..TrialCounts::default()
        };
        let mut ofdm = Vec::new();
        if !self.layout.ofdm_columns.is_empty() {
            ofdm = detect_ofdm_columns(
                &rx,
                &rx_channel,
                g,
                &self.layout.ofdm_columns,
                &noise,
                cfg.channel.ofdm_phase_reference,
            )?;
            let m = cfg.ofdm_modulation;
            let hard: Vec<u8> = ofdm.iter().flat_map(|e| e.hard_bits(m)).collect();
            let llr = || -> Result<Vec<f64>, RxError> {
                let mut out = Vec::with_capacity(hard.len());
                for e in &ofdm {
                    out.extend(e.llr(m)?);
                }
                Ok(out)
            };
            (counts.ofdm_raw, counts.ofdm_coded) =
                self.ofdm
                    .score(&hard, llr, &ofdm_msg, &ofdm_sent, params.ldpc_max_iters)?;
        }

        let mut blind_choice = None;
        let otfs = if self.layout.otfs_columns.is_empty() {
            None
        } else {
            let og = &self.otfs_geometry;
            let gains = match cfg.normalization {
                crate::tx::Normalization::PerColumn => Some(tx.column_gains.as_slice()),
                crate::tx::Normalization::Statistical => None,
            };
            let est = if cfg.receiver == ReceiverKind::Tfds {
                tfds_detect(&rx, &build_htf(&rx_channel, og), og, &noise, gains)?
            } else {
                let ht = build_ht(&rx_channel, g)?;
                let cleaned = if self.layout.ofdm_columns.is_empty() {
                    rx.clone()
                } else {
                    match cfg.receiver {
                        ReceiverKind::Tdic => {
                            let decided = decision_grid(&ofdm, cfg.ofdm_modulation);
                            tdic_cancel(&rx, &ht, &decided, &self.layout, g, cfg.normalization)?
                        }
                        ReceiverKind::GenieTdic => {
                            tdic_cancel(&rx, &ht, &tx.s_tf_raw, &self.layout, g, cfg.normalization)?
                        }
                        ReceiverKind::BlindTdic => {
                            let ctx = BlindContext {
                                channel: &rx_channel,
                                ht: &ht,
                                geometry: g,
                                noise: &noise,
                                normalization: cfg.normalization,
                                reference: cfg.channel.ofdm_phase_reference,
                            };
                            let out = blind_cancel(&rx, &ctx, &cfg.pool)?;
                            blind_choice = Some(out.chosen);
                            out.cleaned
                        }
                        ReceiverKind::Tfds => unreachable!("handled above"),
                    }
                };
                self.detect_dd(&cleaned, &ht, rx_channel.max_delay(), og, &noise, gains)?
            };
            let m = cfg.otfs_modulation;
            let hard = est.hard_bits(m);
            (counts.otfs_raw, counts.otfs_coded) =
                self.otfs
                    .score(&hard, || Ok(est.llr(m)?), &otfs_msg, &otfs_sent, params.ldpc_max_iters)?;
            Some(est)
        };

        Ok(TrialOutput {
            counts,
            frame: tx,
            true_channel,
            rx_channel,
            ofdm,
            otfs,
            blind_choice,
        })
    }

    fn detect_dd(
        &self,
        cleaned: &TimeFrame,
        ht: &crate::sparse::CsrMatrix,
        max_delay: usize,
        og: &FrameGeometry,
        noise: &NoiseModel,
        gains: Option<&[f64]>,
    ) -> Result<DdEstimate, RxError> {
        let params = &self.config.detector_params;
        let eff = EffectiveChannel::new(ht, og, gains, params.tail.unwrap_or(max_delay));
        let m = self.config.otfs_modulation;
        match self.config.detector {
            DetectorKind::Lmmse => detect_otfs_lmmse(cleaned, &eff, noise, m, &params.lmmse()),
            DetectorKind::MrcDfe => detect_otfs_mrc_dfe(cleaned, &eff, noise, m, &params.mrc_dfe()),
        }
    }
}

/// Convenience wrapper: builds a simulator and runs one trial.
pub fn run_trial(config: &SimConfig, snr_db: f64, velocity_kmh: f64, frame: u64) -> Result<TrialCounts, HarnessError> {
    Simulator::new(config)?.run_trial(snr_db, velocity_kmh, frame)
}
