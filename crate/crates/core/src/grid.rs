//! Column-major complex matrices and time-domain frames.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

pub type C64 = Complex64;

/// Dense complex matrix stored column by column, so `data` is `vec(G)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// Delay-Doppler grid: rows are delay bins, columns Doppler bins.
pub type DdGrid = Grid;
/// Time-frequency grid: rows are subcarriers, columns OFDM symbols.
pub type TfGrid = Grid;

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Wraps column-major data. Panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "grid data length");
        Grid { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Grid { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn col(&self, c: usize) -> &[C64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn col_mut(&mut self, c: usize) -> &mut [C64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn row(&self, r: usize) -> Vec<C64> {
        (0..self.cols).map(|c| self[(r, c)]).collect()
    }

    pub fn set_row(&mut self, r: usize, values: &[C64]) {
        assert_eq!(values.len(), self.cols);
        for (c, v) in values.iter().enumerate() {
            self[(r, c)] = *v;
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Grid) -> f64 {
        assert_eq!(self.shape(), other.shape());
        max_abs_diff(&self.data, &other.data)
    }
}

impl Index<(usize, usize)> for Grid {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[c * self.rows + r]
    }
}

impl IndexMut<(usize, usize)> for Grid {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[c * self.rows + r]
    }
}

/// Length-`MN` sample sequence: per-symbol `M`-sample blocks concatenated in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeFrame {
    samples: Vec<C64>,
}

impl TimeFrame {
    pub fn new(samples: Vec<C64>) -> Self {
        TimeFrame { samples }
    }

    pub fn zeros(len: usize) -> Self {
        TimeFrame {
            samples: vec![C64::new(0.0, 0.0); len],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [C64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    /// The `M`-sample block of time column `col`.
    pub fn block(&self, m: usize, col: usize) -> &[C64] {
        &self.samples[col * m..(col + 1) * m]
    }

    pub fn energy(&self) -> f64 {
        norm_sqr(&self.samples)
    }

    pub fn max_abs_diff(&self, other: &TimeFrame) -> f64 {
        max_abs_diff(&self.samples, &other.samples)
    }
}

impl std::ops::Sub<&TimeFrame> for &TimeFrame {
    type Output = TimeFrame;

    fn sub(self, rhs: &TimeFrame) -> TimeFrame {
        assert_eq!(self.len(), rhs.len());
        TimeFrame::new(self.samples.iter().zip(&rhs.samples).map(|(a, b)| a - b).collect())
    }
}

impl std::ops::Add<&TimeFrame> for &TimeFrame {
    type Output = TimeFrame;

    fn add(self, rhs: &TimeFrame) -> TimeFrame {
        assert_eq!(self.len(), rhs.len());
        TimeFrame::new(self.samples.iter().zip(&rhs.samples).map(|(a, b)| a + b).collect())
    }
}

pub fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `sum(conj(a) * b)`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
