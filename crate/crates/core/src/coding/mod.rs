//! Bit/symbol chain: Gray QAM and the rate-1/2 LDPC code.

pub mod ldpc;
pub mod qam;
pub mod rate_match;

pub use ldpc::{CodeSpec, DecodeResult};
pub use qam::{qam_hard_demap, qam_llr, qam_map, qam_slice, Modulation};
pub use rate_match::RateMatcher;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodingError {
    #[error("unsupported modulation order {0} (expected 4, 16 or 64)")]
    UnsupportedOrder(usize),
    #[error("bit-count mismatch: expected {expected} bits, got {got}")]
    BitCount { expected: usize, got: usize },
    #[error("{what}: expected length {expected}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("noise variance must be positive, got {0}")]
    NoiseVariance(f64),
    #[error("parity structure is not encodable: {0}")]
    NonEncodable(String),
    #[error("malformed alist: {0}")]
    Alist(String),
}
