//! Gray-mapped square QAM with max-log soft demapping.
//!
//! The first half of each symbol's bits selects the in-phase level and the
//! second half the quadrature level. On each axis the levels are Gray coded
//! with bit 0 on the positive side, so QPSK maps `00, 01, 11, 10` to
//! `(1+j), (1-j), (-1-j), (-1+j)` over `sqrt(2)`.

use super::CodingError;
use crate::grid::C64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum Modulation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn from_order(order: usize) -> Result<Self, CodingError> {
        match order {
            4 => Ok(Modulation::Qpsk),
            16 => Ok(Modulation::Qam16),
            64 => Ok(Modulation::Qam64),
            _ => Err(CodingError::UnsupportedOrder(order)),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Modulation::Qpsk => 4,
            Modulation::Qam16 => 16,
            Modulation::Qam64 => 64,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        self.order().trailing_zeros() as usize
    }

    fn bits_per_axis(self) -> usize {
        self.bits_per_symbol() / 2
    }

    fn levels_per_axis(self) -> usize {
        1 << self.bits_per_axis()
    }

    fn scale(self) -> f64 {
        (2.0 * (self.order() as f64 - 1.0) / 3.0).sqrt()
    }

    /// Normalized amplitude of each axis label, indexed by the label value
    /// (MSB first).
    fn axis_table(self) -> Vec<f64> {
        let levels = self.levels_per_axis();
        let mut table = vec![0.0; levels];
        for i in 0..levels {
            let gray = i ^ (i >> 1);
            table[gray] = ((levels - 1) as f64 - 2.0 * i as f64) / self.scale();
        }
        table
    }

    /// All constellation points indexed by their bit label (MSB first).
    pub fn constellation(self) -> Vec<C64> {
        let table = self.axis_table();
        let half = self.bits_per_axis();
        (0..self.order())
            .map(|label| C64::new(table[label >> half], table[label & ((1 << half) - 1)]))
            .collect()
    }
}

impl TryFrom<usize> for Modulation {
    type Error = CodingError;

    fn try_from(order: usize) -> Result<Self, CodingError> {
        Modulation::from_order(order)
    }
}

impl From<Modulation> for usize {
    fn from(m: Modulation) -> usize {
        m.order()
    }
}

impl std::fmt::Display for Modulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Modulation::Qpsk => f.write_str("QPSK"),
            other => write!(f, "{}QAM", other.order()),
        }
    }
}

fn check_bits(bits: &[u8], modulation: Modulation) -> Result<(), CodingError> {
    let b = modulation.bits_per_symbol();
    if !bits.len().is_multiple_of(b) {
        return Err(CodingError::BitCount {
            expected: bits.len().div_ceil(b) * b,
            got: bits.len(),
        });
    }
    Ok(())
}

pub fn qam_map(bits: &[u8], modulation: Modulation) -> Result<Vec<C64>, CodingError> {
    check_bits(bits, modulation)?;
    let points = modulation.constellation();
    Ok(bits
        .chunks(modulation.bits_per_symbol())
        .map(|chunk| points[chunk.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)])
        .collect())
}

fn nearest_level(y: f64, table: &[f64]) -> usize {
    (0..table.len())
        .min_by(|&a, &b| (y - table[a]).abs().total_cmp(&(y - table[b]).abs()))
        .unwrap()
}

/// Minimum-distance decisions, returned as bits.
pub fn qam_hard_demap(symbols: &[C64], modulation: Modulation) -> Vec<u8> {
    let table = modulation.axis_table();
    let half = modulation.bits_per_axis();
    let mut bits = Vec::with_capacity(symbols.len() * modulation.bits_per_symbol());
    for s in symbols {
        for label in [nearest_level(s.re, &table), nearest_level(s.im, &table)] {
            bits.extend((0..half).rev().map(|j| ((label >> j) & 1) as u8));
        }
    }
    bits
}

/// Snaps every symbol to its nearest constellation point.
pub fn qam_slice(symbols: &[C64], modulation: Modulation) -> Vec<C64> {
    let table = modulation.axis_table();
    symbols
        .iter()
        .map(|s| C64::new(table[nearest_level(s.re, &table)], table[nearest_level(s.im, &table)]))
        .collect()
}

/// Max-log bit LLRs, `ln P(b=0) - ln P(b=1)`, given the complex noise
/// variance of each symbol.
pub fn qam_llr(symbols: &[C64], noise_var: &[f64], modulation: Modulation) -> Result<Vec<f64>, CodingError> {
    if symbols.len() != noise_var.len() {
        return Err(CodingError::Length {
            what: "noise variances",
            expected: symbols.len(),
            got: noise_var.len(),
        });
    }
    if let Some(&bad) = noise_var.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(CodingError::NoiseVariance(bad));
    }
    let table = modulation.axis_table();
    let half = modulation.bits_per_axis();
    let mut llr = Vec::with_capacity(symbols.len() * modulation.bits_per_symbol());
    for (s, &var) in symbols.iter().zip(noise_var) {
        for y in [s.re, s.im] {
            for j in (0..half).rev() {
                let (mut d0, mut d1) = (f64::INFINITY, f64::INFINITY);
                for (label, a) in table.iter().enumerate() {
                    let d = (y - a) * (y - a);
                    if (label >> j) & 1 == 0 {
                        d0 = d0.min(d);
                    } else {
                        d1 = d1.min(d);
                    }
                }
                llr.push((d1 - d0) / var);
            }
        }
    }
    Ok(llr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALL: [Modulation; 3] = [Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64];

    fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.gen_range(0..2)).collect()
    }

    #[test]
    fn qpsk_points() {
        let s = qam_map(&[0, 0, 0, 1, 1, 1, 1, 0], Modulation::Qpsk).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [C64::new(h, h), C64::new(h, -h), C64::new(-h, -h), C64::new(-h, h)];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        for m in ALL {
            let points = m.constellation();
            let d_min = 2.0 / m.scale();
            for (a, pa) in points.iter().enumerate() {
                for (b, pb) in points.iter().enumerate() {
                    if ((pa - pb).norm() - d_min).abs() < 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1, "{m} labels {a} {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn unit_average_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in ALL {
            let exact: f64 = m.constellation().iter().map(|p| p.norm_sqr()).sum::<f64>() / m.order() as f64;
            assert!((exact - 1.0).abs() < 1e-12);
        }
        let s = qam_map(&random_bits(&mut rng, 4 * 100_000), Modulation::Qam16).unwrap();
        let mean = s.iter().map(|p| p.norm_sqr()).sum::<f64>() / s.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn map_demap_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in ALL {
            let bits = random_bits(&mut rng, m.bits_per_symbol() * 500);
            let s = qam_map(&bits, m).unwrap();
            assert_eq!(qam_hard_demap(&s, m), bits);
            assert_eq!(qam_slice(&s, m), s);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            Modulation::from_order(8),
            Err(CodingError::UnsupportedOrder(8))
        ));
        assert!(matches!(
            qam_map(&[0, 1, 0], Modulation::Qam16),
            Err(CodingError::BitCount { .. })
        ));
        assert!(qam_llr(&[C64::default()], &[0.0], Modulation::Qpsk).is_err());
    }

    #[test]
    fn llr_signs_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in ALL {
            let bits = random_bits(&mut rng, m.bits_per_symbol() * 64);
            let s = qam_map(&bits, m).unwrap();
            let llr = qam_llr(&s, &vec![1e-4; s.len()], m).unwrap();
            for (l, b) in llr.iter().zip(&bits) {
                assert!(l.abs() > 100.0);
                assert_eq!(*l < 0.0, *b == 1);
            }
        }
        // halfway between 00 and 01 only the second bit is uncertain
        let p = Modulation::Qpsk.constellation();
        let mid = (p[0] + p[1]) / 2.0;
        let llr = qam_llr(&[mid], &[0.5], Modulation::Qpsk).unwrap();
        assert!(llr[0] > 1.0 && llr[1].abs() < 1e-9);
    }

    #[test]
    fn llr_decisions_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in ALL {
            let points = m.constellation();
            let b = m.bits_per_symbol();
            for _ in 0..10_000 / 3 {
                let y = C64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
                let best = (0..points.len())
                    .min_by(|&a, &c| (y - points[a]).norm().total_cmp(&(y - points[c]).norm()))
                    .unwrap();
                let llr = qam_llr(&[y], &[0.1], m).unwrap();
                for (j, l) in llr.iter().enumerate() {
                    let bit = (best >> (b - 1 - j)) & 1;
                    assert_eq!(*l < 0.0, bit == 1, "{m} y={y} bit {j}");
                }
            }
        }
    }
}
