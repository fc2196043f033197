//! Binary LDPC codes: alist I/O, systematic encoding and normalized min-sum decoding.
//!
//! Codeword layout is `[message | parity]`. Encoding needs the parity part of
//! `H` (columns `k..n`) to be lower triangular with a unit diagonal, which
//! holds for the accumulator (staircase) parity of IRA codes.

use super::CodingError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::fmt::Write as _;
use std::sync::OnceLock;

/// Min-sum normalization factor.
pub const MIN_SUM_SCALE: f64 = 0.75;
pub const DEFAULT_MAX_ITERS: usize = 50;

const SHIPPED_ALIST: &str = include_str!("../../data/ldpc/qc_ira_n16384_k8192.alist");

/// Parity-check description of a binary code.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSpec {
    n: usize,
    k: usize,
    /// Variable indices of each check.
    checks: Vec<Vec<usize>>,
    /// Check indices of each variable.
    vars: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Hard decisions on all `n` codeword bits.
    pub codeword: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
}

impl DecodeResult {
    pub fn message(&self, k: usize) -> &[u8] {
        &self.codeword[..k]
    }
}

impl CodeSpec {
    /// Builds from per-check variable lists; `k = n - checks.len()`.
    pub fn from_checks(n: usize, checks: Vec<Vec<usize>>) -> Result<Self, CodingError> {
        if checks.len() >= n {
            return Err(CodingError::Alist(format!("{} checks for {n} variables", checks.len())));
        }
        let mut vars = vec![Vec::new(); n];
        for (c, row) in checks.iter().enumerate() {
            for &v in row {
                if v >= n {
                    return Err(CodingError::Alist(format!("check {c} references variable {v} >= {n}")));
                }
                if vars[v].last() == Some(&c) {
                    return Err(CodingError::Alist(format!("duplicate entry ({c}, {v})")));
                }
                vars[v].push(c);
            }
        }
        Ok(CodeSpec {
            n,
            k: n - checks.len(),
            checks,
            vars,
        })
    }

    /// Parses the MacKay alist format (1-based indices, zero padding allowed).
    pub fn from_alist(text: &str) -> Result<Self, CodingError> {
        let mut tokens = text.split_whitespace().map(|t| {
            t.parse::<usize>()
                .map_err(|e| CodingError::Alist(format!("bad token `{t}`: {e}")))
        });
        let mut next = move || {
            tokens
                .next()
                .unwrap_or_else(|| Err(CodingError::Alist("unexpected end of file".into())))
        };
        let (n, m) = (next()?, next()?);
        let (max_col, max_row) = (next()?, next()?);
        let col_weights = (0..n).map(|_| next()).collect::<Result<Vec<_>, _>>()?;
        let row_weights = (0..m).map(|_| next()).collect::<Result<Vec<_>, _>>()?;
        let mut read_lists = |count: usize, width: usize, weights: &[usize]| -> Result<Vec<Vec<usize>>, CodingError> {
            (0..count)
                .map(|i| {
                    let entries = (0..width)
                        .map(|_| next())
                        .collect::<Result<Vec<_>, _>>()?
                        .into_iter()
                        .filter(|&e| e != 0)
                        .map(|e| e - 1)
                        .collect::<Vec<_>>();
                    if entries.len() != weights[i] {
                        return Err(CodingError::Alist(format!(
                            "list {i} has {} entries, header says {}",
                            entries.len(),
                            weights[i]
                        )));
                    }
                    Ok(entries)
                })
                .collect()
        };
        let cols = read_lists(n, max_col, &col_weights)?;
        let rows = read_lists(m, max_row, &row_weights)?;
        let code = CodeSpec::from_checks(n, rows)?;
        let mut from_cols: Vec<Vec<usize>> = cols;
        from_cols.iter_mut().for_each(|c| c.sort_unstable());
        if from_cols != code.vars {
            return Err(CodingError::Alist("column and row lists disagree".into()));
        }
        Ok(code)
    }

    pub fn to_alist(&self) -> String {
        let max_col = self.vars.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.checks.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = String::new();
        let join = |xs: &mut dyn Iterator<Item = usize>| xs.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(out, "{} {}", self.n, self.checks.len()).unwrap();
        writeln!(out, "{max_col} {max_row}").unwrap();
        writeln!(out, "{}", join(&mut self.vars.iter().map(Vec::len))).unwrap();
        writeln!(out, "{}", join(&mut self.checks.iter().map(Vec::len))).unwrap();
        for (lists, width) in [(&self.vars, max_col), (&self.checks, max_row)] {
            for list in lists {
                let padded = list.iter().map(|&i| i + 1).chain(std::iter::repeat(0)).take(width);
                writeln!(out, "{}", join(&mut padded.into_iter())).unwrap();
            }
        }
        out
    }

    /// Quasi-cyclic irregular repeat-accumulate code with lifting size `z`.
    ///
    /// The message part has `base_cols` block columns, each holding three
    /// `z x z` circulants in block rows `{c, c+5, c+11} mod base_rows`; the
    /// parity part is a bit-level staircase. Circulant shifts are drawn from
    /// `seed` and redrawn until the Tanner graph has no 4-cycles.
    pub fn qc_ira(z: usize, base_cols: usize, base_rows: usize, seed: u64) -> Result<Self, CodingError> {
        const OFFSETS: [usize; 3] = [0, 5, 11];
        if base_rows <= OFFSETS[2] || z < 2 {
            return Err(CodingError::NonEncodable(format!(
                "qc_ira needs more than {} block rows and z >= 2",
                OFFSETS[2]
            )));
        }
        let (k, m) = (base_cols * z, base_rows * z);
        let mut checks: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut pairs: HashSet<(usize, usize)> = HashSet::new();
        for j in 1..m {
            pairs.insert((j - 1, j));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in 0..base_cols {
            let block_rows = OFFSETS.map(|o| (c + o) % base_rows);
            let mut found = None;
            for _ in 0..10_000 {
                let shifts: [usize; 3] = std::array::from_fn(|_| rng.gen_range(0..z));
                let mut candidate = Vec::with_capacity(3 * z);
                let mut clean = true;
                'bits: for x in 0..z {
                    let mut rows: Vec<usize> = (0..3).map(|i| block_rows[i] * z + (x + shifts[i]) % z).collect();
                    rows.sort_unstable();
                    for a in 0..3 {
                        for b in a + 1..3 {
                            if pairs.contains(&(rows[a], rows[b])) {
                                clean = false;
                                break 'bits;
                            }
                            candidate.push((rows[a], rows[b]));
                        }
                    }
                }
                if clean {
                    found = Some((shifts, candidate));
                    break;
                }
            }
            let (shifts, candidate) = found
                .ok_or_else(|| CodingError::NonEncodable(format!("no 4-cycle-free shifts for block column {c}")))?;
            pairs.extend(candidate);
            for x in 0..z {
                for i in 0..3 {
                    checks[block_rows[i] * z + (x + shifts[i]) % z].push(c * z + x);
                }
            }
        }
        for (j, row) in checks.iter_mut().enumerate() {
            row.sort_unstable();
            if j > 0 {
                row.push(k + j - 1);
            }
            row.push(k + j);
        }
        CodeSpec::from_checks(k + m, checks)
    }

    /// The rate-1/2 code shipped with the crate (`n = 16384`, `k = 8192`).
    pub fn shipped() -> &'static CodeSpec {
        static CODE: OnceLock<CodeSpec> = OnceLock::new();
        CODE.get_or_init(|| CodeSpec::from_alist(SHIPPED_ALIST).expect("shipped alist is valid"))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    pub fn syndrome_ok(&self, codeword: &[u8]) -> bool {
        self.checks
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &v| acc ^ codeword[v]) == 0)
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>, CodingError> {
        if message.len() != self.k {
            return Err(CodingError::Length {
                what: "LDPC message",
                expected: self.k,
                got: message.len(),
            });
        }
        let mut c = message.to_vec();
        c.resize(self.n, 0);
        for (i, row) in self.checks.iter().enumerate() {
            let pivot = self.k + i;
            let mut parity = 0u8;
            let mut has_pivot = false;
            for &v in row {
                if v == pivot {
                    has_pivot = true;
                } else if v > pivot && v >= self.k {
                    return Err(CodingError::NonEncodable(format!(
                        "check {i} references later parity bit {v}"
                    )));
                } else {
                    parity ^= c[v];
                }
            }
            if !has_pivot {
                return Err(CodingError::NonEncodable(format!(
                    "check {i} lacks its diagonal parity bit"
                )));
            }
            c[pivot] = parity;
        }
        Ok(c)
    }

    /// Flooding normalized min-sum; positive LLR favours bit 0.
    pub fn decode(&self, llr: &[f64], max_iters: usize) -> Result<DecodeResult, CodingError> {
        if llr.len() != self.n {
            return Err(CodingError::Length {
                what: "LDPC LLRs",
                expected: self.n,
                got: llr.len(),
            });
        }
        // edge e belongs to check `check_of` in CSR order; var_edges maps back
        let mut row_ptr = Vec::with_capacity(self.checks.len() + 1);
        let mut edge_var = Vec::new();
        row_ptr.push(0);
        for row in &self.checks {
            edge_var.extend_from_slice(row);
            row_ptr.push(edge_var.len());
        }
        let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for (e, &v) in edge_var.iter().enumerate() {
            var_edges[v].push(e);
        }
        let mut v2c: Vec<f64> = edge_var.iter().map(|&v| llr[v]).collect();
        let mut c2v = vec![0.0; edge_var.len()];
        let mut codeword: Vec<u8> = llr.iter().map(|&l| (l < 0.0) as u8).collect();
        for iter in 1..=max_iters {
            for c in 0..self.checks.len() {
                let span = row_ptr[c]..row_ptr[c + 1];
                let (mut min1, mut min2, mut arg, mut sign) = (f64::INFINITY, f64::INFINITY, usize::MAX, 1.0);
                for e in span.clone() {
                    let m = v2c[e];
                    if m < 0.0 {
                        sign = -sign;
                    }
                    let a = m.abs();
                    if a < min1 {
                        min2 = min1;
                        min1 = a;
                        arg = e;
                    } else if a < min2 {
                        min2 = a;
                    }
                }
                for e in span {
                    let mag = if e == arg { min2 } else { min1 };
                    let s = if v2c[e] < 0.0 { -sign } else { sign };
                    c2v[e] = MIN_SUM_SCALE * s * mag;
                }
            }
            for v in 0..self.n {
                let total = llr[v] + var_edges[v].iter().map(|&e| c2v[e]).sum::<f64>();
                for &e in &var_edges[v] {
                    v2c[e] = total - c2v[e];
                }
                codeword[v] = (total < 0.0) as u8;
            }
            if self.syndrome_ok(&codeword) {
                return Ok(DecodeResult {
                    codeword,
                    converged: true,
                    iterations: iter,
                });
            }
        }
        Ok(DecodeResult {
            codeword,
            converged: false,
            iterations: max_iters,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CodeSpec {
        CodeSpec::qc_ira(32, 16, 16, 7).unwrap()
    }

    fn bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.gen_range(0..2)).collect()
    }

    fn clean_llr(c: &[u8], mag: f64) -> Vec<f64> {
        c.iter().map(|&b| if b == 0 { mag } else { -mag }).collect()
    }

    #[test]
    fn shipped_code_matches_generator() {
        let shipped = CodeSpec::shipped();
        assert_eq!((shipped.n(), shipped.k()), (16384, 8192));
        assert_eq!(shipped, &CodeSpec::qc_ira(512, 16, 16, 2024).unwrap());
    }

    #[test]
    fn girth_at_least_six() {
        let code = small();
        let mut seen = HashSet::new();
        for vars in &code.vars {
            for a in 0..vars.len() {
                for b in a + 1..vars.len() {
                    assert!(
                        seen.insert((vars[a], vars[b])),
                        "4-cycle through checks {} {}",
                        vars[a],
                        vars[b]
                    );
                }
            }
        }
    }

    #[test]
    fn alist_round_trip() {
        let code = small();
        let text = code.to_alist();
        assert_eq!(CodeSpec::from_alist(&text).unwrap(), code);
        assert!(CodeSpec::from_alist("4 2\n1 1\n").is_err());
    }

    #[test]
    fn encode_zero_linear_and_valid() {
        let code = small();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(code.encode(&vec![0; code.k()]).unwrap().iter().all(|&b| b == 0));
        let (m1, m2) = (bits(&mut rng, code.k()), bits(&mut rng, code.k()));
        let (c1, c2) = (code.encode(&m1).unwrap(), code.encode(&m2).unwrap());
        assert!(code.syndrome_ok(&c1) && code.syndrome_ok(&c2));
        assert_eq!(&c1[..code.k()], &m1[..]);
        let sum: Vec<u8> = m1.iter().zip(&m2).map(|(a, b)| a ^ b).collect();
        let c_sum: Vec<u8> = c1.iter().zip(&c2).map(|(a, b)| a ^ b).collect();
        assert_eq!(code.encode(&sum).unwrap(), c_sum);
        assert!(matches!(code.encode(&[0; 3]), Err(CodingError::Length { .. })));
    }

    #[test]
    fn non_encodable_structure_rejected() {
        // parity bit 3 sits above the diagonal of check 0
        let code = CodeSpec::from_checks(4, vec![vec![0, 2, 3], vec![1, 3]]).unwrap();
        assert!(matches!(code.encode(&[1, 0]), Err(CodingError::NonEncodable(_))));
    }

    #[test]
    fn noiseless_round_trip() {
        let code = CodeSpec::shipped();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let msg = bits(&mut rng, code.k());
            let c = code.encode(&msg).unwrap();
            let out = code.decode(&clean_llr(&c, 10.0), DEFAULT_MAX_ITERS).unwrap();
            assert!(out.converged);
            assert_eq!(out.iterations, 1);
            assert_eq!(out.message(code.k()), &msg[..]);
        }
    }

    #[test]
    fn corrects_weak_flipped_bit() {
        let code = small();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = code.encode(&bits(&mut rng, code.k())).unwrap();
        let mut llr = clean_llr(&c, 4.0);
        llr[17] = -llr[17] * 0.1;
        let out = code.decode(&llr, DEFAULT_MAX_ITERS).unwrap();
        assert!(out.converged);
        assert_eq!(out.codeword, c);
    }

    #[test]
    fn pure_noise_does_not_converge() {
        let code = small();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let llr: Vec<f64> = (0..code.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = code.decode(&llr, DEFAULT_MAX_ITERS).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, DEFAULT_MAX_ITERS);
    }
}
