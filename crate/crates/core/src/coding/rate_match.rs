//! Fits rate-1/2 codewords to an arbitrary coded-bit budget.
//!
//! A budget of `P` bits is split into `ceil(P / n)` codewords of even length
//! `E`. Each carries `E / 2` message bits: the remaining `k - E/2` message
//! positions are shortened (known zeros, not sent) and as many parity bits
//! are punctured, so every codeword keeps rate 1/2. The concatenated coded
//! bits pass through a fixed pseudo-random interleaver.

use super::ldpc::{CodeSpec, DecodeResult};
use super::CodingError;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// LLR given to shortened (known-zero) bits.
pub const SHORTENED_LLR: f64 = 1e9;

const INTERLEAVER_SEED: u64 = 0x1d5e_a7e5;

#[derive(Debug, Clone, PartialEq)]
struct Segment {
    /// Codeword positions actually transmitted, in order.
    sent: Vec<usize>,
    /// Message positions carrying payload bits, in order.
    info: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateMatcher {
    code: CodeSpec,
    segments: Vec<Segment>,
    /// Coded bit `i` (segment order) goes to channel position `perm[i]`.
    perm: Vec<usize>,
}

/// `count` distinct, evenly spread indices in `0..total`.
fn spread(count: usize, total: usize) -> Vec<usize> {
    (0..count).map(|i| i * total / count).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedDecode {
    pub message: Vec<u8>,
    pub converged: usize,
    pub codewords: usize,
}

impl RateMatcher {
    pub fn new(code: &CodeSpec, coded_bits: usize) -> Result<Self, CodingError> {
        let (n, k) = (code.n(), code.k());
        if n != 2 * k {
            return Err(CodingError::NonEncodable(format!(
                "rate matching needs a rate-1/2 code, got {k}/{n}"
            )));
        }
        if coded_bits == 0 || !coded_bits.is_multiple_of(2) {
            return Err(CodingError::BitCount {
                expected: coded_bits.max(2).div_ceil(2) * 2,
                got: coded_bits,
            });
        }
        let count = coded_bits.div_ceil(n);
        let pairs = coded_bits / 2;
        let segments = (0..count)
            .map(|i| {
                let half = pairs / count + usize::from(i < pairs % count);
                let cut = k - half;
                let shortened = spread(cut, k);
                let punctured: Vec<usize> = spread(cut, n - k).into_iter().map(|p| k + p).collect();
                let mut skip = vec![false; n];
                shortened.iter().chain(&punctured).for_each(|&p| skip[p] = true);
                Segment {
                    sent: (0..n).filter(|&p| !skip[p]).collect(),
                    info: (0..k).filter(|&p| !skip[p]).collect(),
                }
            })
            .collect();
        let mut perm: Vec<usize> = (0..coded_bits).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(INTERLEAVER_SEED ^ coded_bits as u64));
        Ok(RateMatcher {
            code: code.clone(),
            segments,
            perm,
        })
    }

    pub fn coded_len(&self) -> usize {
        self.perm.len()
    }

    pub fn message_len(&self) -> usize {
        self.segments.iter().map(|s| s.info.len()).sum()
    }

    pub fn codewords(&self) -> usize {
        self.segments.len()
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>, CodingError> {
        if message.len() != self.message_len() {
            return Err(CodingError::Length {
                what: "rate-matched message",
                expected: self.message_len(),
                got: message.len(),
            });
        }
        let mut coded = Vec::with_capacity(self.coded_len());
        let mut rest = message;
        for seg in &self.segments {
            let (chunk, tail) = rest.split_at(seg.info.len());
            rest = tail;
            let mut msg = vec![0u8; self.code.k()];
            seg.info.iter().zip(chunk).for_each(|(&p, &b)| msg[p] = b);
            let cw = self.code.encode(&msg)?;
            coded.extend(seg.sent.iter().map(|&p| cw[p]));
        }
        let mut out = vec![0u8; coded.len()];
        for (i, b) in coded.into_iter().enumerate() {
            out[self.perm[i]] = b;
        }
        Ok(out)
    }

    pub fn decode(&self, llr: &[f64], max_iters: usize) -> Result<MatchedDecode, CodingError> {
        if llr.len() != self.coded_len() {
            return Err(CodingError::Length {
                what: "rate-matched LLRs",
                expected: self.coded_len(),
                got: llr.len(),
            });
        }
        let ordered: Vec<f64> = self.perm.iter().map(|&p| llr[p]).collect();
        let mut message = Vec::with_capacity(self.message_len());
        let mut converged = 0;
        let mut offset = 0;
        for seg in &self.segments {
            let mut full = vec![0.0; self.code.n()];
            (0..self.code.k()).for_each(|p| full[p] = SHORTENED_LLR);
            seg.info.iter().for_each(|&p| full[p] = 0.0);
            for (&p, &l) in seg.sent.iter().zip(&ordered[offset..offset + seg.sent.len()]) {
                full[p] = l;
            }
            offset += seg.sent.len();
            let DecodeResult {
                codeword,
                converged: ok,
                ..
            } = self.code.decode(&full, max_iters)?;
            converged += usize::from(ok);
            message.extend(seg.info.iter().map(|&p| codeword[p]));
        }
        Ok(MatchedDecode {
            message,
            converged,
            codewords: self.segments.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::ldpc::DEFAULT_MAX_ITERS;
    use rand::Rng;

    fn code() -> CodeSpec {
        CodeSpec::qc_ira(32, 16, 16, 3).unwrap()
    }

    #[test]
    fn budgets_split_into_rate_half_segments() {
        let c = code();
        for budget in [c.n(), 700, 1600, 2 * c.n() + 2] {
            let rm = RateMatcher::new(&c, budget).unwrap();
            assert_eq!(rm.message_len() * 2, budget);
            assert_eq!(rm.codewords(), budget.div_ceil(c.n()));
            assert!(rm.segments.iter().all(|s| s.sent.len() == 2 * s.info.len()));
        }
        assert!(RateMatcher::new(&c, 7).is_err());
    }

    #[test]
    fn noiseless_round_trip() {
        let c = code();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for budget in [c.n(), 700, 2 * c.n() + 2] {
            let rm = RateMatcher::new(&c, budget).unwrap();
            let msg: Vec<u8> = (0..rm.message_len()).map(|_| rng.gen_range(0..2)).collect();
            let coded = rm.encode(&msg).unwrap();
            let llr: Vec<f64> = coded.iter().map(|&b| if b == 0 { 8.0 } else { -8.0 }).collect();
            let out = rm.decode(&llr, DEFAULT_MAX_ITERS).unwrap();
            assert_eq!(out.message, msg);
            assert_eq!(out.converged, out.codewords);
        }
    }
}
