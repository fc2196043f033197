//! Deterministic linear maps between the delay-Doppler, time-frequency and
//! time domains.
//!
//! Every DFT here is unitary (scaled by `1/sqrt(K)` in both directions), so
//! each forward/inverse pair is an exact inverse and Parseval holds without
//! bookkeeping.

use crate::geometry::FrameGeometry;
use crate::grid::{DdGrid, Grid, TfGrid, TimeFrame, C64};
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("transform length must be at least 1")]
    Empty,
    #[error("{what}: expected {expected:?}, got {got:?}")]
    Shape {
        what: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("{what}: expected length {expected}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            Direction::Forward => p.plan_fft_forward(len),
            Direction::Inverse => p.plan_fft_inverse(len),
        }
    })
}

/// In-place unitary DFT of every consecutive `len`-chunk of `buf`.
pub(crate) fn dft_chunks(buf: &mut [C64], len: usize, dir: Direction) {
    if buf.is_empty() {
        return;
    }
    let fft = plan(len, dir);
    fft.process(buf);
    let scale = 1.0 / (len as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
}

/// Unitary DFT of a single sequence.
pub fn unitary_dft(x: &[C64], dir: Direction) -> Result<Vec<C64>, TransformError> {
    if x.is_empty() {
        return Err(TransformError::Empty);
    }
    let mut out = x.to_vec();
    dft_chunks(&mut out, x.len(), dir);
    Ok(out)
}

/// Unitary DFT down every column (the `F_M` / `F_M^H` factor).
pub(crate) fn dft_columns(g: &mut Grid, dir: Direction) {
    let rows = g.rows();
    dft_chunks(g.as_mut_slice(), rows, dir);
}

/// Unitary DFT along every row (right-multiplication by `F_N^T` or `F_N^H`;
/// the DFT matrix is symmetric so `G F_N` is the forward row transform).
pub(crate) fn dft_rows(g: &mut Grid, dir: Direction) {
    let (rows, cols) = g.shape();
    let mut scratch = vec![C64::new(0.0, 0.0); rows * cols];
    // transpose so rows become contiguous
    for c in 0..cols {
        for r in 0..rows {
            scratch[r * cols + c] = g[(r, c)];
        }
    }
    dft_chunks(&mut scratch, cols, dir);
    for c in 0..cols {
        for r in 0..rows {
            g[(r, c)] = scratch[r * cols + c];
        }
    }
}

fn check_shape(what: &'static str, g: &Grid, expected: (usize, usize)) -> Result<(), TransformError> {
    if g.shape() != expected {
        return Err(TransformError::Shape {
            what,
            expected,
            got: g.shape(),
        });
    }
    Ok(())
}

/// Tiles the `M x N_dd` delay-Doppler grid `r` times along Doppler, scaled by
/// `1/sqrt(r)` so the replicated grid keeps the energy of `s_dd`.
pub fn replicate_doppler(s_dd: &DdGrid, geometry: &FrameGeometry) -> Result<Grid, TransformError> {
    let (m, n, n_dd) = (geometry.m(), geometry.n(), geometry.n_dd());
    check_shape("replicate_doppler input", s_dd, (m, n_dd))?;
    let scale = 1.0 / (geometry.r() as f64).sqrt();
    let mut out = Grid::zeros(m, n);
    for j in 0..n {
        out.col_mut(j)
            .iter_mut()
            .zip(s_dd.col(j % n_dd))
            .for_each(|(o, s)| *o = s * scale);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsfftDirection {
    /// `F_M X F_N^H`
    DdToTf,
    /// `F_M^H X F_N`
    TfToDd,
}

/// Symplectic finite Fourier transform pair on an arbitrary `rows x cols` grid.
pub fn isfft(grid: &Grid, dir: IsfftDirection) -> Grid {
    let mut out = grid.clone();
    match dir {
        IsfftDirection::DdToTf => {
            dft_columns(&mut out, Direction::Forward);
            dft_rows(&mut out, Direction::Inverse);
        }
        IsfftDirection::TfToDd => {
            dft_columns(&mut out, Direction::Inverse);
            dft_rows(&mut out, Direction::Forward);
        }
    }
    out
}

/// Heisenberg transform with a rectangular pulse: inverse size-`M` DFT of
/// each column, columns concatenated in time.
pub fn heisenberg(x_tf: &TfGrid) -> TimeFrame {
    let mut g = x_tf.clone();
    dft_columns(&mut g, Direction::Inverse);
    TimeFrame::new(g.into_vec())
}

/// Wigner transform: the exact inverse of [`heisenberg`].
pub fn wigner(frame: &TimeFrame, m: usize) -> Result<TfGrid, TransformError> {
    if m == 0 || !frame.len().is_multiple_of(m) {
        return Err(TransformError::Length {
            what: "wigner frame",
            expected: m * (frame.len() / m.max(1)),
            got: frame.len(),
        });
    }
    let mut g = Grid::from_vec(m, frame.len() / m, frame.samples().to_vec());
    dft_columns(&mut g, Direction::Forward);
    Ok(g)
}

/// Places the `M x N_tf` OFDM grid into the OFDM columns of an `M x N` grid,
/// leaving the OTFS columns zero.
pub fn interpolate_time_zeros(s_tf: &Grid, geometry: &FrameGeometry) -> Result<Grid, TransformError> {
    let (m, n) = (geometry.m(), geometry.n());
    check_shape("interpolate_time_zeros input", s_tf, (m, geometry.n_tf()))?;
    let mut out = Grid::zeros(m, n);
    for (k, &col) in geometry.mask().ofdm_columns().iter().enumerate() {
        out.col_mut(col).copy_from_slice(s_tf.col(k));
    }
    Ok(out)
}

/// CP-embedding precoder `F_M B_cp F_{M-L}^H`, which keeps a CP-protected
/// OFDM symbol exactly `M` samples long.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CpPrecoder {
    m: usize,
    l_cp: usize,
}

impl CpPrecoder {
    pub fn new(m: usize, l_cp: usize) -> Self {
        assert!(l_cp < m, "CP must be shorter than the symbol");
        CpPrecoder { m, l_cp }
    }

    pub fn for_geometry(geometry: &FrameGeometry) -> Self {
        CpPrecoder::new(geometry.m(), geometry.l_cp())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l_cp(&self) -> usize {
        self.l_cp
    }

    /// Payload length `M - L_cp`.
    pub fn payload_len(&self) -> usize {
        self.m - self.l_cp
    }

    /// `B_cp`: prepends the last `L_cp` samples (cyclically, so any `L_cp < M` works).
    pub fn append_cp(&self, u: &[C64]) -> Vec<C64> {
        let k = self.payload_len();
        (0..self.m).map(|j| u[(j + k - self.l_cp % k) % k]).collect()
    }

    /// Length-`M` frequency-domain symbol whose inverse size-`M` DFT is the
    /// CP-prefixed inverse size-`(M - L_cp)` DFT of `s_bar`.
    pub fn precode(&self, s_bar: &[C64]) -> Result<Vec<C64>, TransformError> {
        self.time_symbol(s_bar).map(|mut t| {
            dft_chunks(&mut t, self.m, Direction::Forward);
            t
        })
    }

    /// Time-domain form of [`precode`](Self::precode): `B_cp F_{M-L}^H s_bar`.
    pub fn time_symbol(&self, s_bar: &[C64]) -> Result<Vec<C64>, TransformError> {
        if s_bar.len() != self.payload_len() {
            return Err(TransformError::Length {
                what: "cp_precode input",
                expected: self.payload_len(),
                got: s_bar.len(),
            });
        }
        let mut u = s_bar.to_vec();
        dft_chunks(&mut u, self.payload_len(), Direction::Inverse);
        Ok(self.append_cp(&u))
    }

    /// Discards the first `L_cp` samples of an `M`-sample block.
    pub fn remove_cp(&self, block: &[C64]) -> Result<Vec<C64>, TransformError> {
        if block.len() != self.m {
            return Err(TransformError::Length {
                what: "cp_remove input",
                expected: self.m,
                got: block.len(),
            });
        }
        Ok(block[self.l_cp..].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RawGeometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn rand_grid(rng: &mut impl Rng, r: usize, c: usize) -> Grid {
        Grid::from_vec(r, c, rand_vec(rng, r * c))
    }

    fn naive_idft(x: &[C64]) -> Vec<C64> {
        let k = x.len() as f64;
        (0..x.len())
            .map(|t| {
                x.iter()
                    .enumerate()
                    .map(|(f, v)| v * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (f * t) as f64 / k))
                    .sum::<C64>()
                    / k.sqrt()
            })
            .collect()
    }

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

    #[test]
    fn dft_impulse_and_round_trip() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let out = unitary_dft(&[one, zero, zero, zero], Direction::Forward).unwrap();
        for v in out {
            assert!((v - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_vec(&mut rng, 8);
        let back = unitary_dft(&unitary_dft(&x, Direction::Forward).unwrap(), Direction::Inverse).unwrap();
        assert!(crate::grid::max_abs_diff(&x, &back) < 1e-12);
        let y = rand_vec(&mut rng, 16);
        let fy = unitary_dft(&y, Direction::Forward).unwrap();
        let (ey, efy) = (crate::grid::norm_sqr(&y), crate::grid::norm_sqr(&fy));
        assert!((ey - efy).abs() < 1e-12);
        assert_eq!(unitary_dft(&[], Direction::Forward), Err(TransformError::Empty));
    }

    #[test]
    fn inverse_dft_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_vec(&mut rng, 12);
        let fast = unitary_dft(&x, Direction::Inverse).unwrap();
        assert!(crate::grid::max_abs_diff(&fast, &naive_idft(&x)) < 1e-12);
    }

    #[test]
    fn zero_interpolation_tiles_inverse_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (l, i) in [(4, 2), (5, 3), (8, 4), (3, 1)] {
            let s = rand_vec(&mut rng, l);
            let mut spread = vec![C64::new(0.0, 0.0); l * i];
            for (k, v) in s.iter().enumerate() {
                spread[k * i] = *v;
            }
            let lhs = unitary_dft(&spread, Direction::Inverse).unwrap();
            let base = naive_idft(&s);
            let scale = (1.0 / i as f64).sqrt();
            let rhs: Vec<C64> = (0..l * i).map(|t| base[t % l] * scale).collect();
            assert!(crate::grid::max_abs_diff(&lhs, &rhs) < 1e-10);
        }
    }

    #[test]
    fn replicate_scales_and_tiles() {
        let g = geom(2, 4, 2, 1);
        let (a, b) = (C64::new(1.0, 2.0), C64::new(-3.0, 0.5));
        let s = Grid::from_fn(2, 2, |r, c| if r == 0 { [a, b][c] } else { C64::new(0.0, 0.0) });
        let out = replicate_doppler(&s, &g).unwrap();
        let k = 1.0 / 2f64.sqrt();
        assert_eq!(out.row(0), vec![a * k, b * k, a * k, b * k]);
        let zero = replicate_doppler(&Grid::zeros(2, 2), &g).unwrap();
        assert_eq!(zero.norm_sqr(), 0.0);
        assert!(replicate_doppler(&Grid::zeros(2, 3), &g).is_err());
    }

    #[test]
    fn replicated_rows_have_odd_inverse_bins_zero() {
        let g = geom(4, 4, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = replicate_doppler(&rand_grid(&mut rng, 4, 2), &g).unwrap();
        for r in 0..4 {
            let t = unitary_dft(&out.row(r), Direction::Inverse).unwrap();
            assert!(t[1].norm() < 1e-12 && t[3].norm() < 1e-12);
            assert!(t[0].norm() > 1e-6 || t[2].norm() > 1e-6);
        }
    }

    #[test]
    fn isfft_round_trip_and_impulse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_grid(&mut rng, 8, 4);
        let back = isfft(&isfft(&x, IsfftDirection::DdToTf), IsfftDirection::TfToDd);
        assert!(back.max_abs_diff(&x) < 1e-12);
        let mut imp = Grid::zeros(8, 4);
        imp[(0, 0)] = C64::new(1.0, 0.0);
        let tf = isfft(&imp, IsfftDirection::DdToTf);
        for v in tf.as_slice() {
            assert!((v.norm() - 1.0 / 32f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn heisenberg_round_trip_and_locality() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = rand_grid(&mut rng, 8, 4);
        let back = wigner(&heisenberg(&x), 8).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-12);
        let mut one_col = Grid::zeros(8, 4);
        one_col.col_mut(2).copy_from_slice(&rand_vec(&mut rng, 8));
        let t = heisenberg(&one_col);
        for (q, v) in t.samples().iter().enumerate() {
            if !(16..24).contains(&q) {
                assert_eq!(v.norm(), 0.0);
            }
        }
        assert!(wigner(&TimeFrame::zeros(10), 8).is_err());
    }

    #[test]
    fn otfs_chain_leaves_ofdm_columns_silent() {
        let g = geom(8, 8, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = rand_grid(&mut rng, 8, 4);
        let tf = isfft(&replicate_doppler(&s, &g).unwrap(), IsfftDirection::DdToTf);
        let t = heisenberg(&tf);
        for &c in g.mask().ofdm_columns() {
            assert!(t.block(8, c).iter().all(|v| v.norm() < 1e-12));
        }
        // OTFS column k*r is the row-wise inverse DFT over N_dd of s_dd
        for r in 0..8 {
            let direct = unitary_dft(&s.row(r), Direction::Inverse).unwrap();
            for (k, &c) in g.mask().otfs_columns().iter().enumerate() {
                assert!((t.block(8, c)[r] - direct[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolation_places_columns() {
        let g = geom(3, 4, 2, 1);
        let c0 = [C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0)];
        let c1 = [C64::new(0.0, 1.0), C64::new(0.0, 2.0), C64::new(0.0, 3.0)];
        let s = Grid::from_vec(3, 2, c0.iter().chain(&c1).copied().collect());
        let out = interpolate_time_zeros(&s, &g).unwrap();
        assert!(out.col(0).iter().all(|v| v.norm() == 0.0));
        assert_eq!(out.col(1), &c0);
        assert!(out.col(2).iter().all(|v| v.norm() == 0.0));
        assert_eq!(out.col(3), &c1);
        assert!(interpolate_time_zeros(&Grid::zeros(3, 3), &g).is_err());
    }

    #[test]
    fn cp_precode_impulse_traces_to_prefixed_impulse() {
        let p = CpPrecoder::new(8, 2);
        let mut imp = vec![C64::new(0.0, 0.0); 6];
        imp[0] = C64::new(1.0, 0.0);
        let s_bar = unitary_dft(&imp, Direction::Forward).unwrap();
        let t = unitary_dft(&p.precode(&s_bar).unwrap(), Direction::Inverse).unwrap();
        let expected = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (v, e) in t.iter().zip(expected) {
            assert!((v - C64::new(e, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn cp_identity_and_removal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (m, l) in [(8, 2), (16, 5), (32, 3), (6, 4)] {
            let p = CpPrecoder::new(m, l);
            let s_bar = rand_vec(&mut rng, m - l);
            let t = unitary_dft(&p.precode(&s_bar).unwrap(), Direction::Inverse).unwrap();
            for j in 0..l {
                assert!((t[j] - t[m - l + j]).norm() < 1e-12);
            }
            let stripped = p.remove_cp(&t).unwrap();
            let expected = unitary_dft(&s_bar, Direction::Inverse).unwrap();
            assert!(crate::grid::max_abs_diff(&stripped, &expected) < 1e-12);
        }
        let p = CpPrecoder::new(6, 2);
        let abc: Vec<C64> = (0..6).map(|i| C64::new(i as f64, 0.0)).collect();
        assert_eq!(p.remove_cp(&abc).unwrap(), abc[2..].to_vec());
        assert!(p.remove_cp(&abc[..5]).is_err());
        assert!(p.precode(&abc).is_err());
    }

    #[test]
    fn cp_precoder_energy_gain_is_m_over_payload_on_average() {
        // Frobenius norm of B_cp: averaging the gain over an orthonormal input
        // basis gives exactly M / (M - L).
        for (m, l) in [(8, 2), (64, 16), (512, 160)] {
            let p = CpPrecoder::new(m, l);
            let k = m - l;
            let mut total = 0.0;
            for i in 0..k {
                let mut e = vec![C64::new(0.0, 0.0); k];
                e[i] = C64::new(1.0, 0.0);
                total += crate::grid::norm_sqr(&p.precode(&e).unwrap());
            }
            assert!((total / k as f64 - m as f64 / k as f64).abs() < 1e-12);
        }
    }
}
