//! Simulation configuration, loaded from TOML.

use super::HarnessError;
use crate::blind_ic::Hypothesis;
use crate::channel::{DelayProfile, EdgeMode, OfdmPhaseReference, PhaseReference};
use crate::coding::Modulation;
use crate::geometry::{FrameGeometry, RawGeometry};
use crate::rx_otfs::{LmmseConfig, MrcDfeConfig};
use crate::tx::{FrameKind, Normalization, TxConfig};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// The shipped default configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../../../../configs/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverKind {
    Tfds,
    #[default]
    Tdic,
    BlindTdic,
    /// TDIC fed with the transmitted OFDM symbols instead of decisions.
    GenieTdic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    #[default]
    Lmmse,
    MrcDfe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    #[default]
    Perfect,
    /// Delay-Doppler pilot frame per trial, threshold estimator.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodingMode {
    #[default]
    None,
    Ldpc,
}

macro_rules! snake_display {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = serde_json::to_value(self).map_err(|_| fmt::Error)?;
                f.write_str(s.as_str().unwrap_or_default())
            }
        }
    )*};
}
snake_display!(ReceiverKind, DetectorKind, CsiMode, CodingMode);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// Built-in profile name (`EPA`, `EVA`, `ETU`, `flat`, `identity`) or a CSV path.
    pub profile: String,
    pub velocities_kmh: Vec<f64>,
    #[serde(default)]
    pub edge_mode: EdgeMode,
    #[serde(default)]
    pub phase_reference: PhaseReference,
    #[serde(default)]
    pub ofdm_phase_reference: OfdmPhaseReference,
    /// Round path Doppler shifts to the pilot grid. Always on with estimated CSI.
    #[serde(default)]
    pub on_grid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    pub max_frames: u64,
    #[serde(default = "one")]
    pub min_frames: u64,
    /// Stop once every transmitted component has this many raw bit errors.
    #[serde(default)]
    pub target_errors: Option<u64>,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// Extra samples observed after each OTFS column; the channel's maximum
    /// delay when absent. Zero restricts detection to OTFS sample positions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<usize>,
    pub lmmse_tolerance: f64,
    pub lmmse_max_iters: usize,
    pub mrc_tolerance: f64,
    pub mrc_max_iters: usize,
    pub mrc_sweeps: usize,
    pub ldpc_max_iters: usize,
    /// Pilot detection threshold in noise standard deviations.
    pub kappa: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        let (l, d) = (LmmseConfig::default(), MrcDfeConfig::default());
        DetectorParams {
            tail: None,
            lmmse_tolerance: l.tolerance,
            lmmse_max_iters: l.max_iters,
            mrc_tolerance: d.tolerance,
            mrc_max_iters: d.max_iters,
            mrc_sweeps: d.sweeps,
            ldpc_max_iters: crate::coding::ldpc::DEFAULT_MAX_ITERS,
            kappa: 4.0,
        }
    }
}

impl DetectorParams {
    pub fn lmmse(&self) -> LmmseConfig {
        LmmseConfig {
            tolerance: self.lmmse_tolerance,
            max_iters: self.lmmse_max_iters,
        }
    }

    pub fn mrc_dfe(&self) -> MrcDfeConfig {
        MrcDfeConfig {
            tolerance: self.mrc_tolerance,
            max_iters: self.mrc_max_iters,
            sweeps: self.mrc_sweeps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub receiver: ReceiverKind,
    #[serde(default)]
    pub detector: DetectorKind,
    #[serde(default)]
    pub csi: CsiMode,
    #[serde(default)]
    pub coding: CodingMode,
    #[serde(default)]
    pub frame_kind: FrameKind,
    pub otfs_modulation: Modulation,
    pub ofdm_modulation: Modulation,
    #[serde(default)]
    pub normalization: Normalization,
    /// Occupied OFDM slots; every slot when absent.
    #[serde(default)]
    pub ofdm_slots: Option<Vec<usize>>,
    #[serde(default)]
    pub workers: Option<usize>,
    pub geometry: FrameGeometry,
    pub channel: ChannelConfig,
    pub stop: StopConfig,
    #[serde(default)]
    pub detector_params: DetectorParams,
    /// Hypotheses tried by the blind receiver.
    #[serde(default)]
    pub pool: Vec<Hypothesis>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::from_toml_str(DEFAULT_CONFIG).expect("shipped config is valid")
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        SimConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Baseline frame with the given CP length.
    pub fn with_cp(mut self, l_cp: usize) -> Result<Self, HarnessError> {
        let raw = RawGeometry {
            l_cp,
            ..self.geometry.to_raw()
        };
        self.geometry = FrameGeometry::validate(&raw).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.snr_db.is_empty() {
            return bad("snr_db must not be empty".into());
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return bad(format!("snr_db entry {s} is not finite"));
        }
        if self.channel.velocities_kmh.is_empty() {
            return bad("channel.velocities_kmh must not be empty".into());
        }
        if let Some(v) = self
            .channel
            .velocities_kmh
            .iter()
            .find(|v| !(v.is_finite() && **v >= 0.0))
        {
            return bad(format!("velocity {v} km/h is invalid"));
        }
        if self.stop.max_frames == 0 {
            return bad("stop.max_frames must be at least 1".into());
        }
        if self.stop.min_frames > self.stop.max_frames {
            return bad("stop.min_frames exceeds stop.max_frames".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if self.receiver == ReceiverKind::BlindTdic && self.pool.is_empty() {
            return bad("blind_tdic needs a non-empty pool".into());
        }
        if let Some(slots) = &self.ofdm_slots {
            if let Some(s) = slots.iter().find(|&&s| s >= self.geometry.n_dd()) {
                return bad(format!("ofdm slot {s} is outside 0..{}", self.geometry.n_dd()));
            }
            if self.frame_kind != FrameKind::Hybrid {
                return bad("ofdm_slots applies to hybrid frames only".into());
            }
        }
        self.profile()?;
        Ok(())
    }

    /// The delay profile; `None` for the noiseless-path `identity` override.
    pub fn profile(&self) -> Result<Option<DelayProfile>, HarnessError> {
        if self.channel.profile.eq_ignore_ascii_case("identity") {
            return Ok(None);
        }
        DelayProfile::resolve(&self.channel.profile)
            .map(Some)
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn tx_config(&self) -> TxConfig {
        TxConfig {
            otfs_modulation: self.otfs_modulation,
            ofdm_modulation: self.ofdm_modulation,
            normalization: self.normalization,
        }
    }
}

/// Parses a snake_case option name (`"blind_tdic"`, `"mrc_dfe"`, ...) into
/// any of the config enums.
pub fn parse_choice<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, HarnessError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| HarnessError::Config(format!("unknown option {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_defaults_are_baseline() {
        let cfg = SimConfig::default();
        let g = &cfg.geometry;
        assert_eq!((g.m(), g.n(), g.n_dd(), g.n_tf(), g.r()), (512, 16, 8, 8, 2));
        assert_eq!((g.delta_f(), g.f_c()), (60e3, 28e9));
        assert_eq!(cfg.otfs_modulation, Modulation::Qam16);
        assert_eq!(cfg.ofdm_modulation, Modulation::Qam16);
        assert_eq!(cfg.channel.profile, "EVA");
        assert_eq!(cfg.stop.target_errors, Some(500));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = SimConfig::default();
        let back = SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_invalid() {
        let base = SimConfig::default().to_toml_string();
        let empty = base.replacen("snr_db = [", "snr_db = [] \nold_snr = [", 1);
        assert!(SimConfig::from_toml_str(&empty).is_err());
        let mut cfg = SimConfig::default();
        cfg.stop.max_frames = 0;
        assert!(cfg.validate().is_err());
        let cfg = SimConfig {
            receiver: ReceiverKind::BlindTdic,
            pool: Vec::new(),
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::default();
        cfg.channel.profile = "nope".into();
        assert!(cfg.validate().is_err());
        let bad_geom = base.replace("n_tf = 8", "n_tf = 7");
        let err = SimConfig::from_toml_str(&bad_geom).unwrap_err().to_string();
        assert!(err.contains("N_dd + N_tf"), "{err}");
    }

    #[test]
    fn display_is_snake_case() {
        assert_eq!(ReceiverKind::BlindTdic.to_string(), "blind_tdic");
        assert_eq!(DetectorKind::MrcDfe.to_string(), "mrc_dfe");
        assert_eq!(
            parse_choice::<ReceiverKind>("genie_tdic").unwrap(),
            ReceiverKind::GenieTdic
        );
        assert!(parse_choice::<CsiMode>("psychic").is_err());
    }
}
