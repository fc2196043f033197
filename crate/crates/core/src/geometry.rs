//! Frame geometry shared by every stage of the transmit and receive chains.
//!
//! A hybrid frame is an `M x N` time-frequency grid. OTFS occupies every
//! `r`-th time column starting at column 0 (`r = N / N_dd`) and OFDM fills
//! the remaining `N_tf` columns, grouped into slots of `N_s` consecutive
//! symbols.

use serde::{Deserialize, Serialize};
use std::ops::Range;
use thiserror::Error;

/// Errors raised while validating raw frame parameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("grid dimensions must be positive (M={m}, N={n})")]
    EmptyGrid { m: usize, n: usize },
    #[error("N_dd + N_tf = N violated: {n_dd} + {n_tf} != {n}")]
    ColumnSplit { n_dd: usize, n_tf: usize, n: usize },
    #[error("OTFS needs at least one time column (N_dd = 0)")]
    NoOtfsColumns,
    #[error("replication factor not integer: N / N_dd = {n} / {n_dd}")]
    ReplicationFactor { n: usize, n_dd: usize },
    #[error("N_dd * N_s = N_tf violated: {n_dd} * {n_s} != {n_tf}")]
    SlotLength { n_dd: usize, n_s: usize, n_tf: usize },
    #[error("0 < L_cp < M violated: L_cp = {l_cp}, M = {m}")]
    CpLength { l_cp: usize, m: usize },
    #[error("numerology must be positive and finite (delta_f = {delta_f}, f_c = {f_c})")]
    Numerology { delta_f: f64, f_c: f64 },
}

/// Unvalidated frame parameters, as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawGeometry {
    pub m: usize,
    pub n: usize,
    pub n_dd: usize,
    pub n_tf: usize,
    /// Consecutive OFDM symbols per slot. Derived from `N_tf / N_dd` when absent.
    #[serde(default)]
    pub n_s: Option<usize>,
    #[serde(default = "default_cp")]
    pub l_cp: usize,
    pub delta_f: f64,
    pub f_c: f64,
}

fn default_cp() -> usize {
    160
}

impl RawGeometry {
    /// Baseline parameters: 28 GHz, 60 kHz spacing, `[N, M] = [16, 512]`,
    /// `[N_dd, N_tf] = [8, 8]`, with a 160-sample CP.
    pub fn baseline() -> Self {
        RawGeometry {
            m: 512,
            n: 16,
            n_dd: 8,
            n_tf: 8,
            n_s: None,
            l_cp: default_cp(),
            delta_f: 60e3,
            f_c: 28e9,
        }
    }
}

/// Which time columns carry which waveform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyMask {
    otfs_columns: Vec<usize>,
    ofdm_columns: Vec<usize>,
    samples_per_column: usize,
}

impl OccupancyMask {
    fn from_factor(m: usize, n: usize, r: usize) -> Self {
        let (otfs_columns, ofdm_columns) = (0..n).partition(|c| c % r == 0);
        OccupancyMask {
            otfs_columns,
            ofdm_columns,
            samples_per_column: m,
        }
    }

    pub fn otfs_columns(&self) -> &[usize] {
        &self.otfs_columns
    }

    pub fn ofdm_columns(&self) -> &[usize] {
        &self.ofdm_columns
    }

    /// Sample index range of time column `col` within the length-`MN` frame.
    pub fn column_samples(&self, col: usize) -> Range<usize> {
        col * self.samples_per_column..(col + 1) * self.samples_per_column
    }

    pub fn is_otfs(&self, col: usize) -> bool {
        self.otfs_columns.binary_search(&col).is_ok()
    }

    /// Frame sample positions of all OTFS columns, in column order.
    pub fn otfs_sample_positions(&self) -> Vec<usize> {
        self.otfs_columns.iter().flat_map(|&c| self.column_samples(c)).collect()
    }
}

/// Validated frame geometry.
///
/// Construct through [`FrameGeometry::validate`]; fields are read-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct FrameGeometry {
    m: usize,
    n: usize,
    n_dd: usize,
    n_tf: usize,
    n_s: usize,
    l_cp: usize,
    delta_f: f64,
    f_c: f64,
    r: usize,
    mask: OccupancyMask,
}

impl FrameGeometry {
    pub fn validate(raw: &RawGeometry) -> Result<Self, GeometryError> {
        let RawGeometry {
            m,
            n,
            n_dd,
            n_tf,
            l_cp,
            delta_f,
            f_c,
            ..
        } = *raw;
        if m == 0 || n == 0 {
            return Err(GeometryError::EmptyGrid { m, n });
        }
        if n_dd == 0 {
            return Err(GeometryError::NoOtfsColumns);
        }
        if n_dd + n_tf != n {
            return Err(GeometryError::ColumnSplit { n_dd, n_tf, n });
        }
        if n % n_dd != 0 {
            return Err(GeometryError::ReplicationFactor { n, n_dd });
        }
        let r = n / n_dd;
        let n_s = raw.n_s.unwrap_or(n_tf / n_dd);
        if n_dd * n_s != n_tf {
            return Err(GeometryError::SlotLength { n_dd, n_s, n_tf });
        }
        if l_cp == 0 || l_cp >= m {
            return Err(GeometryError::CpLength { l_cp, m });
        }
        if !(delta_f.is_finite() && delta_f > 0.0 && f_c.is_finite() && f_c > 0.0) {
            return Err(GeometryError::Numerology { delta_f, f_c });
        }
        Ok(FrameGeometry {
            m,
            n,
            n_dd,
            n_tf,
            n_s,
            l_cp,
            delta_f,
            f_c,
            r,
            mask: OccupancyMask::from_factor(m, n, r),
        })
    }

    /// Same numerology with every column given to OTFS (`r = 1`).
    pub fn standalone_otfs(&self) -> Self {
        self.with_columns(self.n, 0)
    }

    /// Re-validates with a different column split, keeping `M`, `L_cp` and numerology.
    pub fn with_columns(&self, n_dd: usize, n_tf: usize) -> Self {
        FrameGeometry::validate(&RawGeometry {
            n: n_dd + n_tf,
            n_dd,
            n_tf,
            n_s: None,
            ..self.to_raw()
        })
        .expect("derived geometry must stay valid")
    }

    pub fn to_raw(&self) -> RawGeometry {
        RawGeometry {
            m: self.m,
            n: self.n,
            n_dd: self.n_dd,
            n_tf: self.n_tf,
            n_s: Some(self.n_s),
            l_cp: self.l_cp,
            delta_f: self.delta_f,
            f_c: self.f_c,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn n_dd(&self) -> usize {
        self.n_dd
    }
    pub fn n_tf(&self) -> usize {
        self.n_tf
    }
    pub fn n_s(&self) -> usize {
        self.n_s
    }
    pub fn l_cp(&self) -> usize {
        self.l_cp
    }
    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }
    pub fn f_c(&self) -> f64 {
        self.f_c
    }
    /// Doppler replication factor `N / N_dd`.
    pub fn r(&self) -> usize {
        self.r
    }
    /// OFDM payload length per symbol after CP precoding, `M - L_cp`.
    pub fn ofdm_len(&self) -> usize {
        self.m - self.l_cp
    }
    pub fn frame_len(&self) -> usize {
        self.m * self.n
    }
    pub fn sample_rate(&self) -> f64 {
        self.m as f64 * self.delta_f
    }
    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate()
    }
    pub fn mask(&self) -> &OccupancyMask {
        &self.mask
    }
}

impl TryFrom<RawGeometry> for FrameGeometry {
    type Error = GeometryError;

    fn try_from(raw: RawGeometry) -> Result<Self, Self::Error> {
        FrameGeometry::validate(&raw)
    }
}

impl From<FrameGeometry> for RawGeometry {
    fn from(g: FrameGeometry) -> Self {
        g.to_raw()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(m: usize, n: usize, n_dd: usize, n_tf: usize) -> RawGeometry {
        RawGeometry {
            m,
            n,
            n_dd,
            n_tf,
            n_s: None,
            l_cp: 1,
            delta_f: 60e3,
            f_c: 28e9,
        }
    }

    #[test]
    fn baseline_is_valid() {
        let g = FrameGeometry::validate(&RawGeometry::baseline()).unwrap();
        assert_eq!(g.r(), 2);
        assert_eq!(g.n_s(), 1);
        assert!((g.sample_rate() - 30.72e6).abs() < 1e-3);
        assert_eq!(g.mask().otfs_columns(), &[0, 2, 4, 6, 8, 10, 12, 14]);
        assert_eq!(g.mask().ofdm_columns(), &[1, 3, 5, 7, 9, 11, 13, 15]);
    }

    #[test]
    fn pure_otfs_degenerate_frame() {
        let g = FrameGeometry::validate(&raw(4, 4, 4, 0)).unwrap();
        assert_eq!(g.r(), 1);
        assert_eq!(g.mask().otfs_columns().len(), 4);
        assert!(g.mask().ofdm_columns().is_empty());
    }

    #[test]
    fn non_integer_replication_rejected() {
        let err = FrameGeometry::validate(&RawGeometry {
            n_dd: 5,
            n_tf: 11,
            ..RawGeometry::baseline()
        })
        .unwrap_err();
        assert!(matches!(err, GeometryError::ReplicationFactor { .. }));
        assert!(err.to_string().contains("replication factor not integer"));
    }

    #[test]
    fn column_split_and_cp_rejected() {
        let e = FrameGeometry::validate(&raw(8, 4, 2, 1)).unwrap_err();
        assert!(e.to_string().contains("N_dd + N_tf = N"));
        let e = FrameGeometry::validate(&RawGeometry {
            l_cp: 512,
            ..RawGeometry::baseline()
        })
        .unwrap_err();
        assert!(e.to_string().contains("L_cp < M"));
    }

    #[test]
    fn slot_identity_enforced() {
        // r = 4 with N_s = 3 as in the four-fold replication figure.
        let g = FrameGeometry::validate(&raw(16, 16, 4, 12)).unwrap();
        assert_eq!((g.r(), g.n_s()), (4, 3));
        let e = FrameGeometry::validate(&RawGeometry {
            n_s: Some(2),
            ..raw(16, 16, 4, 12)
        })
        .unwrap_err();
        assert!(matches!(e, GeometryError::SlotLength { .. }));
    }

    #[test]
    fn idempotent_and_mask_from_factor() {
        for (n, n_dd) in [(16, 8), (16, 4), (16, 16), (12, 3), (8, 1)] {
            let g = FrameGeometry::validate(&raw(8, n, n_dd, n - n_dd)).unwrap();
            let again = FrameGeometry::validate(&g.to_raw()).unwrap();
            assert_eq!(g, again);
            let expected: Vec<usize> = (0..n_dd).map(|k| k * g.r()).collect();
            assert_eq!(g.mask().otfs_columns(), expected.as_slice());
            let mut all: Vec<usize> = g
                .mask()
                .otfs_columns()
                .iter()
                .chain(g.mask().ofdm_columns())
                .copied()
                .collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn serde_goes_through_validation() {
        let text = toml::to_string(&FrameGeometry::validate(&RawGeometry::baseline()).unwrap()).unwrap();
        let back: FrameGeometry = toml::from_str(&text).unwrap();
        assert_eq!(back.r(), 2);
        let bad = text.replace("n_dd = 8", "n_dd = 5");
        assert!(toml::from_str::<FrameGeometry>(&bad).is_err());
    }
}
