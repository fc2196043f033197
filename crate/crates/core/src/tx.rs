//! Frame assembly: QAM payloads to time-domain samples.
//!
//! The OTFS payload is an `M x N_dd` delay-Doppler grid. Replication,
//! ISFFT and the Heisenberg transform collapse to one inverse DFT along
//! Doppler: time column `otfs_columns[k]` is column `k` of the row-wise
//! unitary IDFT of `S_dd`. OFDM columns carry CP-precoded symbols of
//! `M - L_cp` subcarriers each.

use crate::coding::{qam_map, CodingError, Modulation};
use crate::geometry::FrameGeometry;
use crate::grid::{Grid, TfGrid, TimeFrame, C64};
use crate::transforms::{dft_columns, dft_rows, CpPrecoder, Direction};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TxError {
    #[error("bit-count mismatch for {component}: expected {expected}, got {got}")]
    BitCount {
        component: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error("OFDM column {0} is not available in this layout")]
    Column(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    #[default]
    Hybrid,
    StandaloneOtfs,
    StandaloneOfdm,
}

/// How column power is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Fixed scaling giving unit mean sample power in expectation over the
    /// payload. Unit-energy QAM needs no scaling in either component.
    #[default]
    Statistical,
    /// Every occupied column scaled to exactly unit mean sample power; the
    /// gains travel with the frame.
    PerColumn,
}

/// Assignment of time columns to the two waveforms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLayout {
    pub kind: FrameKind,
    pub otfs_columns: Vec<usize>,
    /// Occupied OFDM columns (possibly a subset of the available ones).
    pub ofdm_columns: Vec<usize>,
}

impl FrameLayout {
    pub fn hybrid(geometry: &FrameGeometry) -> Self {
        FrameLayout {
            kind: FrameKind::Hybrid,
            otfs_columns: geometry.mask().otfs_columns().to_vec(),
            ofdm_columns: geometry.mask().ofdm_columns().to_vec(),
        }
    }

    pub fn standalone(kind: FrameKind, geometry: &FrameGeometry) -> Self {
        let all: Vec<usize> = (0..geometry.n()).collect();
        match kind {
            FrameKind::Hybrid => FrameLayout::hybrid(geometry),
            FrameKind::StandaloneOtfs => FrameLayout {
                kind,
                otfs_columns: all,
                ofdm_columns: Vec::new(),
            },
            FrameKind::StandaloneOfdm => FrameLayout {
                kind,
                otfs_columns: Vec::new(),
                ofdm_columns: all,
            },
        }
    }

    /// Hybrid layout with OFDM only in the listed slots; slot `i` is the
    /// `N_s` columns following OTFS column `i r`.
    pub fn hybrid_slots(geometry: &FrameGeometry, slots: &[usize]) -> Self {
        let r = geometry.r();
        let mut ofdm_columns: Vec<usize> = slots
            .iter()
            .flat_map(|&s| (s * r + 1..(s + 1) * r).filter(|&c| c < geometry.n()))
            .collect();
        ofdm_columns.sort_unstable();
        ofdm_columns.dedup();
        FrameLayout {
            ofdm_columns,
            ..FrameLayout::hybrid(geometry)
        }
    }

    pub fn otfs_symbols(&self, geometry: &FrameGeometry) -> usize {
        geometry.m() * self.otfs_columns.len()
    }

    pub fn ofdm_symbols(&self, geometry: &FrameGeometry) -> usize {
        geometry.ofdm_len() * self.ofdm_columns.len()
    }

    /// Frame sample indices of the OTFS columns, in column order.
    pub fn otfs_sample_positions(&self, geometry: &FrameGeometry) -> Vec<usize> {
        let m = geometry.m();
        self.otfs_columns.iter().flat_map(|&c| c * m..(c + 1) * m).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxConfig {
    pub otfs_modulation: Modulation,
    pub ofdm_modulation: Modulation,
    pub normalization: Normalization,
}

impl Default for TxConfig {
    fn default() -> Self {
        TxConfig {
            otfs_modulation: Modulation::Qam16,
            ofdm_modulation: Modulation::Qam16,
            normalization: Normalization::Statistical,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridFrame {
    pub layout: FrameLayout,
    pub config: TxConfig,
    /// `M x |otfs_columns|` delay-Doppler symbols.
    pub s_dd: Grid,
    /// `(M - L_cp) x |ofdm_columns|` OFDM symbols before precoding.
    pub s_tf_raw: Grid,
    /// Combined time-frequency grid; `samples = heisenberg(x)`.
    pub x: TfGrid,
    pub samples: TimeFrame,
    /// Gain applied to each time column (zero for idle columns).
    pub column_gains: Vec<f64>,
    pub otfs_bits: Vec<u8>,
    pub ofdm_bits: Vec<u8>,
}

fn column_gain(column: &[C64], normalization: Normalization) -> f64 {
    match normalization {
        Normalization::Statistical => 1.0,
        Normalization::PerColumn => {
            let energy: f64 = column.iter().map(|v| v.norm_sqr()).sum();
            if energy > 0.0 {
                (column.len() as f64 / energy).sqrt()
            } else {
                1.0
            }
        }
    }
}

/// Time-domain OTFS columns (`M x N_dd`), before normalization.
pub fn otfs_time_columns(s_dd: &Grid) -> Grid {
    let mut t = s_dd.clone();
    dft_rows(&mut t, Direction::Inverse);
    t
}

/// One normalized OFDM column: CP-precoded time samples and the applied gain.
/// Transmitter and interference reconstruction both go through here.
pub fn ofdm_time_column(
    s_bar: &[C64],
    precoder: &CpPrecoder,
    normalization: Normalization,
) -> Result<(Vec<C64>, f64), TxError> {
    let mut t = precoder.time_symbol(s_bar).map_err(|_| TxError::BitCount {
        component: "OFDM column",
        expected: precoder.payload_len(),
        got: s_bar.len(),
    })?;
    let gain = column_gain(&t, normalization);
    t.iter_mut().for_each(|v| *v *= gain);
    Ok((t, gain))
}

/// Time-domain contribution of the OFDM columns alone.
pub fn ofdm_component(
    s_tf_raw: &Grid,
    layout: &FrameLayout,
    geometry: &FrameGeometry,
    normalization: Normalization,
) -> Result<(TimeFrame, Vec<f64>), TxError> {
    let m = geometry.m();
    let precoder = CpPrecoder::for_geometry(geometry);
    let mut samples = vec![C64::default(); geometry.frame_len()];
    let mut gains = vec![0.0; geometry.n()];
    for (k, &col) in layout.ofdm_columns.iter().enumerate() {
        let (t, g) = ofdm_time_column(s_tf_raw.col(k), &precoder, normalization)?;
        samples[col * m..(col + 1) * m].copy_from_slice(&t);
        gains[col] = g;
    }
    Ok((TimeFrame::new(samples), gains))
}

fn expect_bits(component: &'static str, bits: &[u8], symbols: usize, modulation: Modulation) -> Result<(), TxError> {
    let expected = symbols * modulation.bits_per_symbol();
    if bits.len() != expected {
        return Err(TxError::BitCount {
            component,
            expected,
            got: bits.len(),
        });
    }
    Ok(())
}

/// Builds a frame for any layout.
pub fn build_frame(
    otfs_bits: &[u8],
    ofdm_bits: &[u8],
    layout: &FrameLayout,
    geometry: &FrameGeometry,
    config: &TxConfig,
) -> Result<HybridFrame, TxError> {
    let (m, k) = (geometry.m(), geometry.ofdm_len());
    if let Some(&bad) = layout.ofdm_columns.iter().find(|&&c| c >= geometry.n()) {
        return Err(TxError::Column(bad));
    }
    expect_bits("OTFS", otfs_bits, layout.otfs_symbols(geometry), config.otfs_modulation)?;
    expect_bits("OFDM", ofdm_bits, layout.ofdm_symbols(geometry), config.ofdm_modulation)?;
    if otfs_bits.is_empty() && ofdm_bits.is_empty() {
        return Err(TxError::BitCount {
            component: "frame",
            expected: layout.otfs_symbols(geometry) * config.otfs_modulation.bits_per_symbol()
                + layout.ofdm_symbols(geometry) * config.ofdm_modulation.bits_per_symbol(),
            got: 0,
        });
    }
    let s_dd = Grid::from_vec(
        m,
        layout.otfs_columns.len(),
        qam_map(otfs_bits, config.otfs_modulation)?,
    );
    let s_tf_raw = Grid::from_vec(
        k,
        layout.ofdm_columns.len(),
        qam_map(ofdm_bits, config.ofdm_modulation)?,
    );

    let (ofdm, mut column_gains) = ofdm_component(&s_tf_raw, layout, geometry, config.normalization)?;
    let mut samples = ofdm.into_samples();
    let otfs = otfs_time_columns(&s_dd);
    for (j, &col) in layout.otfs_columns.iter().enumerate() {
        let gain = column_gain(otfs.col(j), config.normalization);
        column_gains[col] = gain;
        for (dst, src) in samples[col * m..(col + 1) * m].iter_mut().zip(otfs.col(j)) {
            *dst = src * gain;
        }
    }
    let mut x = Grid::from_vec(m, geometry.n(), samples.clone());
    dft_columns(&mut x, Direction::Forward);
    Ok(HybridFrame {
        layout: layout.clone(),
        config: *config,
        s_dd,
        s_tf_raw,
        x,
        samples: TimeFrame::new(samples),
        column_gains,
        otfs_bits: otfs_bits.to_vec(),
        ofdm_bits: ofdm_bits.to_vec(),
    })
}

pub fn build_hybrid_frame(
    otfs_bits: &[u8],
    ofdm_bits: &[u8],
    geometry: &FrameGeometry,
    config: &TxConfig,
) -> Result<HybridFrame, TxError> {
    build_frame(otfs_bits, ofdm_bits, &FrameLayout::hybrid(geometry), geometry, config)
}

/// Single-waveform baseline filling all `N` columns.
pub fn build_standalone(
    kind: FrameKind,
    bits: &[u8],
    geometry: &FrameGeometry,
    config: &TxConfig,
) -> Result<HybridFrame, TxError> {
    let layout = FrameLayout::standalone(kind, geometry);
    match kind {
        FrameKind::StandaloneOfdm => build_frame(&[], bits, &layout, geometry, config),
        _ => build_frame(bits, &[], &layout, geometry, config),
    }
}

impl HybridFrame {
    /// Time-domain OTFS contribution alone.
    pub fn otfs_samples(&self, geometry: &FrameGeometry) -> TimeFrame {
        self.masked(geometry, &self.layout.otfs_columns)
    }

    /// Time-domain OFDM contribution alone.
    pub fn ofdm_samples(&self, geometry: &FrameGeometry) -> TimeFrame {
        self.masked(geometry, &self.layout.ofdm_columns)
    }

    fn masked(&self, geometry: &FrameGeometry, columns: &[usize]) -> TimeFrame {
        let m = geometry.m();
        let mut out = vec![C64::default(); self.samples.len()];
        for &c in columns {
            out[c * m..(c + 1) * m].copy_from_slice(&self.samples.samples()[c * m..(c + 1) * m]);
        }
        TimeFrame::new(out)
    }

    /// Gains of the OTFS columns, in column order.
    pub fn otfs_gains(&self) -> Vec<f64> {
        self.layout.otfs_columns.iter().map(|&c| self.column_gains[c]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::qam_hard_demap;
    use crate::geometry::RawGeometry;
    use crate::transforms::{heisenberg, isfft, replicate_doppler, wigner, IsfftDirection};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom(m: usize, n: usize, n_dd: usize, l_cp: usize) -> FrameGeometry {
        FrameGeometry::validate(&RawGeometry {
            m,
            n,
            n_dd,
            n_tf: n - n_dd,
            n_s: None,
            l_cp,
            delta_f: 60e3,
            f_c: 28e9,
        })
        .unwrap()
    }

    fn bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.gen_range(0..2)).collect()
    }

    fn random_frame(g: &FrameGeometry, cfg: &TxConfig, rng: &mut ChaCha8Rng) -> HybridFrame {
        let l = FrameLayout::hybrid(g);
        let a = bits(rng, l.otfs_symbols(g) * cfg.otfs_modulation.bits_per_symbol());
        let b = bits(rng, l.ofdm_symbols(g) * cfg.ofdm_modulation.bits_per_symbol());
        build_hybrid_frame(&a, &b, g, cfg).unwrap()
    }

    #[test]
    fn fast_otfs_path_matches_transform_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (n, n_dd) in [(8, 2), (8, 4), (6, 2), (4, 4)] {
            let g = geom(16, n, n_dd, 4);
            let f = random_frame(&g, &TxConfig::default(), &mut rng);
            let chain = heisenberg(&isfft(&replicate_doppler(&f.s_dd, &g).unwrap(), IsfftDirection::DdToTf));
            assert!(chain.max_abs_diff(&f.otfs_samples(&g)) < 1e-12);
            assert!(heisenberg(&f.x).max_abs_diff(&f.samples) < 1e-12);
        }
    }

    #[test]
    fn baseline_sizes() {
        let g = geom(512, 16, 8, 64);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_frame(&g, &TxConfig::default(), &mut rng);
        assert_eq!(f.s_dd.shape(), (512, 8));
        assert_eq!(f.s_tf_raw.shape(), (448, 8));
        assert_eq!(f.otfs_bits.len() + f.ofdm_bits.len(), 16384 + 14336);
    }

    #[test]
    fn column_supports() {
        let g = geom(8, 8, 4, 2);
        let cfg = TxConfig::default();
        let f = build_hybrid_frame(&[0; 8 * 4 * 4], &[0; 6 * 4 * 4], &g, &cfg).unwrap();
        let (otfs, ofdm) = (f.otfs_samples(&g), f.ofdm_samples(&g));
        for c in 0..8 {
            let (a, b) = (otfs.block(8, c), ofdm.block(8, c));
            if c % 2 == 0 {
                assert!(b.iter().all(|v| v.norm() == 0.0));
            } else {
                assert!(a.iter().all(|v| v.norm() == 0.0));
            }
        }
        // tf grid restricted to each column set carries one component only
        let x_otfs = wigner(&otfs, 8).unwrap();
        assert!(f
            .x
            .col(2)
            .iter()
            .zip(x_otfs.col(2))
            .all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn zero_tf_columns_equals_standalone_otfs() {
        let g = geom(16, 4, 4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = bits(&mut rng, 16 * 4 * 4);
        let cfg = TxConfig::default();
        let hybrid = build_hybrid_frame(&b, &[], &g, &cfg).unwrap();
        let alone = build_standalone(FrameKind::StandaloneOtfs, &b, &g, &cfg).unwrap();
        assert_eq!(hybrid.samples, alone.samples);
    }

    #[test]
    fn standalone_ofdm_columns_carry_cp() {
        let g = geom(16, 4, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = bits(&mut rng, 12 * 4 * 4);
        let f = build_standalone(FrameKind::StandaloneOfdm, &b, &g, &TxConfig::default()).unwrap();
        for c in 0..4 {
            let block = f.samples.block(16, c);
            for i in 0..4 {
                assert!((block[i] - block[12 + i]).norm() < 1e-12);
            }
        }
        assert!(matches!(
            build_standalone(FrameKind::StandaloneOfdm, &[], &g, &TxConfig::default()),
            Err(TxError::BitCount { .. })
        ));
    }

    #[test]
    fn per_column_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = geom(64, 8, 4, 16);
        for normalization in [Normalization::PerColumn, Normalization::Statistical] {
            let cfg = TxConfig {
                normalization,
                ..TxConfig::default()
            };
            let mut mean = 0.0;
            let trials = 200;
            for _ in 0..trials {
                let f = random_frame(&g, &cfg, &mut rng);
                for c in 0..8 {
                    let p = f.samples.block(64, c).iter().map(|v| v.norm_sqr()).sum::<f64>() / 64.0;
                    if normalization == Normalization::PerColumn {
                        assert!((p - 1.0).abs() < 1e-9);
                    }
                    mean += p / (8 * trials) as f64;
                }
            }
            assert!((mean - 1.0).abs() < 0.01, "{normalization:?}: {mean}");
        }
    }

    #[test]
    fn loopback_recovers_both_payloads() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = geom(32, 8, 2, 8);
        let cfg = TxConfig {
            otfs_modulation: Modulation::Qam64,
            ofdm_modulation: Modulation::Qpsk,
            normalization: Normalization::Statistical,
        };
        let f = random_frame(&g, &cfg, &mut rng);
        // OTFS: forward DFT along Doppler of the OTFS columns
        let mut t = Grid::from_fn(32, 2, |r, k| f.samples.block(32, k * 4)[r]);
        dft_rows(&mut t, Direction::Forward);
        assert_eq!(qam_hard_demap(t.as_slice(), cfg.otfs_modulation), f.otfs_bits);
        assert!(t.max_abs_diff(&f.s_dd) < 1e-10);
        let pre = CpPrecoder::for_geometry(&g);
        let mut rx = Vec::new();
        for &c in &f.layout.ofdm_columns {
            let mut u = pre.remove_cp(f.samples.block(32, c)).unwrap();
            crate::transforms::dft_chunks(&mut u, 24, Direction::Forward);
            rx.extend(u);
        }
        assert_eq!(qam_hard_demap(&rx, cfg.ofdm_modulation), f.ofdm_bits);
    }

    #[test]
    fn slot_layouts() {
        let g = geom(8, 8, 2, 2);
        let l = FrameLayout::hybrid_slots(&g, &[1]);
        assert_eq!(l.ofdm_columns, vec![5, 6, 7]);
        assert_eq!(FrameLayout::hybrid_slots(&g, &[0, 1]), FrameLayout::hybrid(&g));
    }
}
