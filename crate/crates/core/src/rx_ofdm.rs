//! Symbol-by-symbol OFDM detection: CP removal, DFT, single-tap MMSE.

use crate::channel::{ofdm_freq_response, ChannelRealization, NoiseModel, OfdmPhaseReference};
use crate::coding::{qam_hard_demap, qam_llr, qam_slice, CodingError, Modulation};
use crate::error::RxError;
use crate::geometry::FrameGeometry;
use crate::grid::{Grid, TimeFrame, C64};
use crate::transforms::{dft_chunks, CpPrecoder, Direction};

/// Smallest bias treated as observable when unbiasing.
const MIN_BIAS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmSymbolEstimate {
    pub symbol_index: usize,
    /// MMSE outputs `x_hat = h* Y / (|h|^2 + sigma^2)`.
    pub soft_symbols: Vec<C64>,
    /// Noise variance of each MMSE output, `sigma^2 |h|^2 / (|h|^2 + sigma^2)^2`.
    pub post_eq_noise_var: Vec<f64>,
    /// MMSE shrinkage `|h|^2 / (|h|^2 + sigma^2)` of each bin.
    pub bias: Vec<f64>,
}

impl OfdmSymbolEstimate {
    /// Bias-removed symbols and their noise variances (`sigma^2 / |h|^2`).
    pub fn unbiased(&self) -> (Vec<C64>, Vec<f64>) {
        self.soft_symbols
            .iter()
            .zip(&self.bias)
            .map(|(x, &mu)| {
                let mu = mu.max(MIN_BIAS);
                (x / mu, (1.0 - mu).max(MIN_BIAS) / mu)
            })
            .unzip()
    }

    pub fn decisions(&self, modulation: Modulation) -> Vec<C64> {
        qam_slice(&self.unbiased().0, modulation)
    }

    pub fn hard_bits(&self, modulation: Modulation) -> Vec<u8> {
        qam_hard_demap(&self.unbiased().0, modulation)
    }

    pub fn llr(&self, modulation: Modulation) -> Result<Vec<f64>, CodingError> {
        let (x, var) = self.unbiased();
        qam_llr(&x, &var, modulation)
    }
}

/// Equalizes one received `M`-sample OFDM column with response `h_n`.
pub fn detect_ofdm_symbol(
    r_n: &[C64],
    h_n: &[C64],
    precoder: &CpPrecoder,
    noise: &NoiseModel,
    symbol_index: usize,
) -> Result<OfdmSymbolEstimate, RxError> {
    let k = precoder.payload_len();
    if h_n.len() != k {
        return Err(RxError::Length {
            what: "OFDM frequency response",
            expected: k,
            got: h_n.len(),
        });
    }
    let mut y = precoder.remove_cp(r_n)?;
    dft_chunks(&mut y, k, Direction::Forward);
    let s2 = noise.sigma2();
    let mut est = OfdmSymbolEstimate {
        symbol_index,
        soft_symbols: Vec::with_capacity(k),
        post_eq_noise_var: Vec::with_capacity(k),
        bias: Vec::with_capacity(k),
    };
    for (yk, hk) in y.iter().zip(h_n) {
        let p = hk.norm_sqr();
        let d = p + s2;
        est.soft_symbols.push(hk.conj() * yk / d);
        est.post_eq_noise_var.push((s2 * p / (d * d)).max(f64::MIN_POSITIVE));
        est.bias.push(p / d);
    }
    Ok(est)
}

/// Detects the listed OFDM columns of a received frame.
pub fn detect_ofdm_columns(
    r: &TimeFrame,
    ch: &ChannelRealization,
    geometry: &FrameGeometry,
    columns: &[usize],
    noise: &NoiseModel,
    reference: OfdmPhaseReference,
) -> Result<Vec<OfdmSymbolEstimate>, RxError> {
    if r.len() != geometry.frame_len() {
        return Err(RxError::Length {
            what: "received frame",
            expected: geometry.frame_len(),
            got: r.len(),
        });
    }
    ch.check_cp(geometry)?;
    let precoder = CpPrecoder::for_geometry(geometry);
    columns
        .iter()
        .map(|&col| {
            let h = ofdm_freq_response(ch, col, geometry, reference)?;
            detect_ofdm_symbol(r.block(geometry.m(), col), &h, &precoder, noise, col)
        })
        .collect()
}

/// Detects every OFDM column of the geometry's occupancy mask.
pub fn detect_ofdm_frame(
    r: &TimeFrame,
    ch: &ChannelRealization,
    geometry: &FrameGeometry,
    noise: &NoiseModel,
) -> Result<Vec<OfdmSymbolEstimate>, RxError> {
    detect_ofdm_columns(
        r,
        ch,
        geometry,
        geometry.mask().ofdm_columns(),
        noise,
        OfdmPhaseReference::default(),
    )
}

/// Hard-decided symbols of all estimates as a `(M - L_cp) x columns` grid.
pub fn decision_grid(estimates: &[OfdmSymbolEstimate], modulation: Modulation) -> Grid {
    let rows = estimates.first().map_or(0, |e| e.soft_symbols.len());
    let data = estimates.iter().flat_map(|e| e.decisions(modulation)).collect();
    Grid::from_vec(rows, estimates.len(), data)
}
