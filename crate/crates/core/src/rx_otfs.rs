//! OTFS reception in hybrid frames.
//!
//! Two front ends separate the OTFS component from the OFDM one:
//!
//! * TFDS equalizes every time-frequency bin with the per-bin channel
//!   approximation and then simply drops the OFDM columns.
//! * TDIC rebuilds the decided OFDM signal, passes it through `H_t` and
//!   subtracts it in the time domain.
//!
//! After TDIC the delay-Doppler symbols are detected on an explicit operator
//! from the `M x N_dd` grid to the received OTFS samples, either by LMMSE
//! (conjugate gradients) or by an iterative rake MRC with decision feedback.

use crate::channel::NoiseModel;
use crate::coding::{qam_llr, qam_slice, CodingError, Modulation};
use crate::error::RxError;
use crate::geometry::FrameGeometry;
use crate::grid::{dot, norm_sqr, Grid, TimeFrame, C64};
use crate::sparse::CsrMatrix;
use crate::transforms::{dft_columns, dft_rows, wigner, Direction};
use crate::tx::{ofdm_component, otfs_time_columns, FrameLayout, Normalization};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdMethod {
    Tfds,
    Lmmse,
    MrcDfe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdEstimate {
    /// `M x N_dd` soft delay-Doppler symbols as produced by the detector.
    pub y_dd: Grid,
    /// Mean gain of the detector on the wanted symbol, `E[y | x] = bias x`.
    pub bias: f64,
    /// Noise variance per symbol of `y_dd / bias`.
    pub noise_var: f64,
    pub method: DdMethod,
    pub iterations: usize,
    pub converged: bool,
}

impl DdEstimate {
    /// Bias-removed symbols.
    pub fn unbiased(&self) -> Vec<C64> {
        self.y_dd.as_slice().iter().map(|v| v / self.bias).collect()
    }

    pub fn hard_bits(&self, modulation: Modulation) -> Vec<u8> {
        crate::coding::qam_hard_demap(&self.unbiased(), modulation)
    }

    pub fn llr(&self, modulation: Modulation) -> Result<Vec<f64>, CodingError> {
        let x = self.unbiased();
        qam_llr(&x, &vec![self.noise_var; x.len()], modulation)
    }
}

/// Decision-directed estimate of a common real gain on unit-energy symbols:
/// normalize to unit power, slice, and project the soft values on the decisions.
pub fn decision_directed_bias(x: &[C64], modulation: Modulation) -> f64 {
    let power = norm_sqr(x) / x.len().max(1) as f64;
    if power == 0.0 {
        return 1.0;
    }
    let scale = power.sqrt();
    let scaled: Vec<C64> = x.iter().map(|v| v / scale).collect();
    let decided = qam_slice(&scaled, modulation);
    let mu = dot(&decided, x).re / norm_sqr(&decided);
    mu.clamp(1e-6, 1.0)
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), RxError> {
    if expected != got {
        return Err(RxError::Length { what, expected, got });
    }
    Ok(())
}

/// Element-wise MMSE on the time-frequency grid:
/// `Y = conj(H_tf) (F_M R) / (|H_tf|^2 + sigma^2)`.
pub fn tfds_equalize(r: &TimeFrame, h_tf: &Grid, noise: &NoiseModel) -> Result<Grid, RxError> {
    let (m, n) = h_tf.shape();
    check_len("received frame", m * n, r.len())?;
    let mut y = wigner(r, m)?;
    let s2 = noise.sigma2();
    for (v, h) in y.as_mut_slice().iter_mut().zip(h_tf.as_slice()) {
        *v = h.conj() * *v / (h.norm_sqr() + s2);
    }
    Ok(y)
}

/// Keeps the OTFS columns of an equalized grid and returns to delay-Doppler.
///
/// Equivalent to zeroing the OFDM columns, applying `F_M^H (.) F_N` and
/// keeping Doppler bins `[0, N_dd)` scaled by `sqrt(r)`; computed here as an
/// inverse DFT over delay and a size-`N_dd` DFT over the OTFS columns.
/// `column_gains` (indexed by time column) undoes per-column transmit scaling.
pub fn tfds_extract_dd(y_hat: &Grid, geometry: &FrameGeometry, column_gains: Option<&[f64]>) -> Grid {
    let cols = geometry.mask().otfs_columns();
    let mut t = Grid::from_fn(geometry.m(), cols.len(), |row, k| {
        let g = column_gains.map_or(1.0, |g| g[cols[k]]);
        y_hat[(row, cols[k])] / g
    });
    dft_columns(&mut t, Direction::Inverse);
    dft_rows(&mut t, Direction::Forward);
    t
}

/// Full TFDS receiver for the OTFS component. The bias is the mean MMSE
/// shrinkage over the OTFS bins.
pub fn tfds_detect(
    r: &TimeFrame,
    h_tf: &Grid,
    geometry: &FrameGeometry,
    noise: &NoiseModel,
    column_gains: Option<&[f64]>,
) -> Result<DdEstimate, RxError> {
    let y = tfds_equalize(r, h_tf, noise)?;
    let y_dd = tfds_extract_dd(&y, geometry, column_gains);
    let s2 = noise.sigma2();
    let cols = geometry.mask().otfs_columns();
    let mu = cols
        .iter()
        .flat_map(|&c| h_tf.col(c).iter().map(move |h| h.norm_sqr() / (h.norm_sqr() + s2)))
        .sum::<f64>()
        / (cols.len() * geometry.m()) as f64;
    let mu = mu.max(1e-12);
    Ok(DdEstimate {
        y_dd,
        bias: mu,
        noise_var: ((1.0 - mu) / mu).max(1e-12),
        method: DdMethod::Tfds,
        iterations: 0,
        converged: true,
    })
}

/// Reconstructs the received OFDM interference `H_t vec(OFDM component)`
/// from decided OFDM symbols, using the transmitter's own column builder.
pub fn tdic_reconstruct(
    ht: &CsrMatrix,
    s_tf_hat: &Grid,
    layout: &FrameLayout,
    geometry: &FrameGeometry,
    normalization: Normalization,
) -> Result<TimeFrame, RxError> {
    check_len("decided OFDM columns", layout.ofdm_columns.len(), s_tf_hat.cols())?;
    let (ofdm, _) = ofdm_component(s_tf_hat, layout, geometry, normalization)?;
    Ok(TimeFrame::new(ht.mul_vec(ofdm.samples())))
}

/// `r - H_t vec(OFDM component)`.
pub fn tdic_cancel(
    r: &TimeFrame,
    ht: &CsrMatrix,
    s_tf_hat: &Grid,
    layout: &FrameLayout,
    geometry: &FrameGeometry,
    normalization: Normalization,
) -> Result<TimeFrame, RxError> {
    check_len("received frame", geometry.frame_len(), r.len())?;
    let delta = tdic_reconstruct(ht, s_tf_hat, layout, geometry, normalization)?;
    Ok(r - &delta)
}

/// Linear map from the `M x N_dd` delay-Doppler grid to received OTFS samples.
///
/// `A = P_rows H_t P_cols^T diag(gains) T`, where `T` is the transmit chain
/// (inverse DFT along Doppler into the OTFS time columns) and `P` selects
/// frame samples. Rows are the OTFS sample positions, optionally extended by
/// `tail` samples after each OTFS column to collect delayed energy that
/// spills past the column edge.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    m: usize,
    n_dd: usize,
    h: CsrMatrix,
    gains: Vec<f64>,
    rows: Vec<usize>,
}

impl EffectiveChannel {
    pub fn new(ht: &CsrMatrix, geometry: &FrameGeometry, gains: Option<&[f64]>, tail: usize) -> Self {
        let m = geometry.m();
        let cols = geometry.mask().otfs_columns();
        let positions = geometry.mask().otfs_sample_positions();
        let frame_len = geometry.frame_len();
        let mut rows: Vec<usize> = cols
            .iter()
            .flat_map(|&c| c * m..((c + 1) * m + tail.min(m)).min(frame_len))
            .collect();
        rows.sort_unstable();
        rows.dedup();
        EffectiveChannel {
            m,
            n_dd: cols.len(),
            h: ht.select(&rows, &positions),
            gains: match gains {
                Some(g) => cols.iter().map(|&c| g[c]).collect(),
                None => vec![1.0; cols.len()],
            },
            rows,
        }
    }

    pub fn input_len(&self) -> usize {
        self.m * self.n_dd
    }

    pub fn output_len(&self) -> usize {
        self.rows.len()
    }

    /// Frame sample indices the operator observes.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Received samples at [`rows`](Self::rows).
    pub fn observe(&self, r: &TimeFrame) -> Vec<C64> {
        self.rows.iter().map(|&q| r.samples()[q]).collect()
    }

    fn to_time(&self, x_dd: &Grid) -> Vec<C64> {
        let mut t = otfs_time_columns(x_dd);
        for (k, g) in self.gains.iter().enumerate() {
            t.col_mut(k).iter_mut().for_each(|v| *v *= g);
        }
        t.into_vec()
    }

    fn dd_from_time(&self, t: Vec<C64>) -> Grid {
        let mut g = Grid::from_vec(self.m, self.n_dd, t);
        for (k, gain) in self.gains.iter().enumerate() {
            g.col_mut(k).iter_mut().for_each(|v| *v *= gain);
        }
        dft_rows(&mut g, Direction::Forward);
        g
    }

    /// Inverse of the transmit chain: undoes the gains, then a forward DFT along Doppler.
    fn dd_from_time_unscaled(&self, s: &[C64]) -> Grid {
        let mut g = Grid::from_vec(self.m, self.n_dd, s.to_vec());
        for (k, gain) in self.gains.iter().enumerate() {
            if *gain != 0.0 {
                g.col_mut(k).iter_mut().for_each(|v| *v /= gain);
            }
        }
        dft_rows(&mut g, Direction::Forward);
        g
    }

    pub fn apply(&self, x_dd: &Grid) -> Vec<C64> {
        self.h.mul_vec(&self.to_time(x_dd))
    }

    pub fn adjoint(&self, y: &[C64]) -> Grid {
        self.dd_from_time(self.h.adjoint_mul_vec(y))
    }

    /// Row-major dense copy, for small-instance checks.
    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let n_in = self.input_len();
        let mut dense = vec![vec![C64::default(); n_in]; self.output_len()];
        for j in 0..n_in {
            let mut e = Grid::zeros(self.m, self.n_dd);
            e.as_mut_slice()[j] = C64::new(1.0, 0.0);
            for (row, v) in dense.iter_mut().zip(self.apply(&e)) {
                row[j] = v;
            }
        }
        dense
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmmseConfig {
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for LmmseConfig {
    fn default() -> Self {
        LmmseConfig {
            tolerance: 1e-6,
            max_iters: 200,
        }
    }
}

/// Raw regularized least-squares solution of `(A^H A + sigma^2 I) x = A^H y`
/// by conjugate gradients. Returns the best iterate with iteration count and
/// convergence flag.
pub fn lmmse_solve(
    y: &[C64],
    eff: &EffectiveChannel,
    sigma2: f64,
    config: &LmmseConfig,
) -> Result<(Grid, usize, bool), RxError> {
    check_len("LMMSE observation", eff.output_len(), y.len())?;
    let normal = |p: &Grid| -> Grid {
        let mut out = eff.adjoint(&eff.apply(p));
        out.as_mut_slice()
            .iter_mut()
            .zip(p.as_slice())
            .for_each(|(o, v)| *o += v * sigma2);
        out
    };
    let b = eff.adjoint(y);
    let b_norm = norm_sqr(b.as_slice()).sqrt();
    let mut x = Grid::zeros(eff.m, eff.n_dd);
    if b_norm == 0.0 {
        return Ok((x, 0, true));
    }
    let mut res = b.clone();
    let mut p = res.clone();
    let mut rr = norm_sqr(res.as_slice());
    for iter in 1..=config.max_iters {
        let ap = normal(&p);
        let alpha = rr / dot(p.as_slice(), ap.as_slice()).re;
        for ((xv, pv), (rv, apv)) in x
            .as_mut_slice()
            .iter_mut()
            .zip(p.as_slice())
            .zip(res.as_mut_slice().iter_mut().zip(ap.as_slice()))
        {
            *xv += pv * alpha;
            *rv -= apv * alpha;
        }
        let rr_new = norm_sqr(res.as_slice());
        if rr_new.sqrt() <= config.tolerance * b_norm {
            return Ok((x, iter, true));
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pv, rv) in p.as_mut_slice().iter_mut().zip(res.as_slice()) {
            *pv = rv + *pv * beta;
        }
    }
    Ok((x, config.max_iters, false))
}

/// LMMSE delay-Doppler detection. The LMMSE shrinkage `mu` is estimated by
/// decision direction; the unbiased output has noise variance `(1 - mu) / mu`.
pub fn detect_otfs_lmmse(
    r_clean: &TimeFrame,
    eff: &EffectiveChannel,
    noise: &NoiseModel,
    modulation: Modulation,
    config: &LmmseConfig,
) -> Result<DdEstimate, RxError> {
    let (x, iterations, converged) = lmmse_solve(&eff.observe(r_clean), eff, noise.sigma2(), config)?;
    let mu = decision_directed_bias(x.as_slice(), modulation);
    Ok(DdEstimate {
        y_dd: x,
        bias: mu,
        noise_var: ((1.0 - mu) / mu).max(1e-12),
        method: DdMethod::Lmmse,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrcDfeConfig {
    pub max_iters: usize,
    pub tolerance: f64,
    /// Rake sweeps between consecutive decisions.
    pub sweeps: usize,
}

impl Default for MrcDfeConfig {
    fn default() -> Self {
        MrcDfeConfig {
            max_iters: 15,
            tolerance: 1e-4,
            sweeps: 3,
        }
    }
}

/// Iterative rake receiver with decision feedback.
///
/// Each iteration sweeps the transmitted time samples in order, `sweeps`
/// times; for every sample the rake fingers (its nonzeros in the operator's
/// column) are maximum-ratio combined against the current residual and the
/// residual is updated in place. The swept samples are then taken to delay-Doppler,
/// sliced, and the hard decisions restart the next sweep. Stops when the soft
/// estimate changes by less than `tolerance` (relative), when the residual
/// after feedback falls below `tolerance ||y||`, or after `max_iters`.
pub fn detect_otfs_mrc_dfe(
    r_clean: &TimeFrame,
    eff: &EffectiveChannel,
    noise: &NoiseModel,
    modulation: Modulation,
    config: &MrcDfeConfig,
) -> Result<DdEstimate, RxError> {
    let y = eff.observe(r_clean);
    let n_in = eff.input_len();
    // column view of the sparse operator: fingers of each transmitted sample
    let mut fingers: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n_in];
    for q in 0..eff.output_len() {
        for (src, v) in eff.h.row(q) {
            fingers[src].push((q, v));
        }
    }
    let energy: Vec<f64> = fingers
        .iter()
        .map(|f| f.iter().map(|(_, v)| v.norm_sqr()).sum())
        .collect();
    let y_norm = norm_sqr(&y).sqrt();

    let mut s = vec![C64::default(); n_in];
    let mut residual = y.clone();
    let mut prev: Option<Grid> = None;
    let mut soft = Grid::zeros(eff.m, eff.n_dd);
    for iter in 1..=config.max_iters {
        for _ in 0..config.sweeps {
            for (q, f) in fingers.iter().enumerate() {
                if energy[q] == 0.0 {
                    continue;
                }
                let combined: C64 = f.iter().map(|&(row, v)| v.conj() * residual[row]).sum();
                let delta = combined / energy[q];
                s[q] += delta;
                for &(row, v) in f {
                    residual[row] -= v * delta;
                }
            }
        }
        soft = eff.dd_from_time_unscaled(&s);
        let change = prev.as_ref().map_or(f64::INFINITY, |p| relative_change(p, &soft));
        let hard = Grid::from_vec(eff.m, eff.n_dd, qam_slice(soft.as_slice(), modulation));
        s = eff.to_time(&hard);
        let fed_back = eff.h.mul_vec(&s);
        residual = y.iter().zip(&fed_back).map(|(a, b)| a - b).collect();
        let settled = norm_sqr(&residual).sqrt() <= config.tolerance * y_norm;
        if change < config.tolerance || settled {
            return Ok(mrc_estimate(soft, noise, modulation, &energy, iter, true));
        }
        prev = Some(soft.clone());
    }
    Ok(mrc_estimate(soft, noise, modulation, &energy, config.max_iters, false))
}

fn relative_change(prev: &Grid, next: &Grid) -> f64 {
    let diff: f64 = prev
        .as_slice()
        .iter()
        .zip(next.as_slice())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    (diff / norm_sqr(next.as_slice()).max(f64::MIN_POSITIVE)).sqrt()
}

/// Noise variance is the larger of the MRC noise floor and the measured
/// slicing error.
fn mrc_estimate(
    soft: Grid,
    noise: &NoiseModel,
    modulation: Modulation,
    energy: &[f64],
    iterations: usize,
    converged: bool,
) -> DdEstimate {
    let active: Vec<f64> = energy.iter().copied().filter(|&e| e > 0.0).collect();
    let floor = noise.sigma2() * active.iter().map(|e| 1.0 / e).sum::<f64>() / active.len().max(1) as f64;
    let sliced = qam_slice(soft.as_slice(), modulation);
    let spread = soft
        .as_slice()
        .iter()
        .zip(&sliced)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / sliced.len().max(1) as f64;
    DdEstimate {
        y_dd: soft,
        bias: 1.0,
        noise_var: floor.max(spread).max(1e-12),
        method: DdMethod::MrcDfe,
        iterations,
        converged,
    }
}
