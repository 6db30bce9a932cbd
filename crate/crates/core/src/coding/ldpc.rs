//! Quasi-cyclic LDPC code at rate 1/3 with a dual-diagonal parity part, so
//! encoding is a linear-time back substitution, and a normalized min-sum
//! decoder.
//!
//! The base matrix has 10 rows and 15 columns: 5 information columns and 10
//! parity columns. Each base entry is either absent or a `Z x Z` cyclic shift
//! of the identity, with `Z = K / 5`. Circulant shifts are drawn from a fixed
//! seed and re-drawn until the expanded graph has no 4-cycles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const BASE_ROWS: usize = 10;
const INFO_COLS: usize = 5;
const BASE_COLS: usize = BASE_ROWS + INFO_COLS;
/// Column weights of the information part of the base matrix.
const INFO_DEGREES: [usize; INFO_COLS] = [6, 5, 4, 4, 3];
/// Row of the middle entry in the weight-3 parity column.
const PARITY_MID_ROW: usize = BASE_ROWS / 2;
/// Shift used at the two ends of the weight-3 parity column.
const PARITY_END_SHIFT: usize = 1;
const SHIFT_SEED: u64 = 0x5eed_1d9c;
pub const MIN_SUM_SCALE: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct LdpcCode {
    pub info_bits: usize,
    pub lifting: usize,
    pub max_iterations: usize,
    /// `(row, col, shift)` for every nonzero base entry.
    pub base: Vec<(usize, usize, usize)>,
    /// Variable index of each edge, grouped by check node.
    edge_var: Vec<u32>,
    /// Start offset of each check's edges in `edge_var` (length checks + 1).
    check_start: Vec<u32>,
}

impl LdpcCode {
    pub fn new(info_bits: usize, max_iterations: usize) -> Result<Self> {
        if info_bits == 0 || info_bits % INFO_COLS != 0 {
            return Err(Error::config(
                "codec.info_block_bits",
                format!("LDPC block size must be a positive multiple of {INFO_COLS}"),
            ));
        }
        if max_iterations == 0 {
            return Err(Error::config("codec.decoder_iterations", "must be >= 1"));
        }
        let z = info_bits / INFO_COLS;
        let base = build_base(z);
        let mut per_check: Vec<Vec<u32>> = vec![Vec::new(); BASE_ROWS * z];
        for &(r, c, s) in &base {
            for i in 0..z {
                // row i of P^s has its one in column (i + s) mod z
                per_check[r * z + i].push((c * z + (i + s) % z) as u32);
            }
        }
        let mut edge_var = Vec::new();
        let mut check_start = vec![0u32];
        for vars in per_check {
            edge_var.extend(vars);
            check_start.push(edge_var.len() as u32);
        }
        Ok(Self {
            info_bits,
            lifting: z,
            max_iterations,
            base,
            edge_var,
            check_start,
        })
    }

    pub fn coded_len(&self) -> usize {
        BASE_COLS * self.lifting
    }

    pub fn n_checks(&self) -> usize {
        BASE_ROWS * self.lifting
    }

    /// Systematic encoding: codeword = info bits followed by parity blocks.
    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        let z = self.lifting;
        // lambda_r = sum over info entries of P^s applied to info block c
        let mut lambda = vec![vec![0u8; z]; BASE_ROWS];
        for &(r, c, s) in self.base.iter().filter(|e| e.1 < INFO_COLS) {
            for i in 0..z {
                lambda[r][i] ^= info[c * z + (i + s) % z];
            }
        }
        let mut parity = vec![vec![0u8; z]; BASE_ROWS];
        // summing all rows cancels the dual diagonal and the shifted ends
        for row in &lambda {
            for i in 0..z {
                parity[0][i] ^= row[i];
            }
        }
        let p0 = parity[0].clone();
        let shifted: Vec<u8> = (0..z).map(|i| p0[(i + PARITY_END_SHIFT) % z]).collect();
        for i in 0..z {
            parity[1][i] = lambda[0][i] ^ shifted[i];
        }
        for r in 1..BASE_ROWS - 1 {
            for i in 0..z {
                let mid = if r == PARITY_MID_ROW { p0[i] } else { 0 };
                parity[r + 1][i] = lambda[r][i] ^ parity[r][i] ^ mid;
            }
        }
        let mut out = Vec::with_capacity(self.coded_len());
        out.extend_from_slice(info);
        for p in parity {
            out.extend(p);
        }
        out
    }

    /// True when every parity check is satisfied.
    pub fn syndrome_ok(&self, word: &[u8]) -> bool {
        (0..self.n_checks()).all(|c| {
            let (a, b) = (self.check_start[c] as usize, self.check_start[c + 1] as usize);
            self.edge_var[a..b].iter().fold(0u8, |acc, &v| acc ^ word[v as usize]) == 0
        })
    }

    /// Normalized min-sum decoding with flooding schedule; stops early once
    /// the hard decisions satisfy every check.
    pub fn decode(&self, llrs: &[f64]) -> Result<Vec<u8>> {
        let n = self.coded_len();
        if llrs.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: llrs.len(),
            });
        }
        let n_edges = self.edge_var.len();
        let mut c2v = vec![0.0f64; n_edges];
        let mut total = llrs.to_vec();
        let mut hard: Vec<u8> = total.iter().map(|&l| u8::from(l < 0.0)).collect();
        if self.syndrome_ok(&hard) {
            return Ok(hard[..self.info_bits].to_vec());
        }
        let mut v2c = vec![0.0f64; n_edges];
        for _ in 0..self.max_iterations {
            for (e, &v) in self.edge_var.iter().enumerate() {
                v2c[e] = total[v as usize] - c2v[e];
            }
            for c in 0..self.n_checks() {
                let (a, b) = (self.check_start[c] as usize, self.check_start[c + 1] as usize);
                let (mut min1, mut min2, mut arg) = (f64::INFINITY, f64::INFINITY, a);
                let mut sign = false;
                for (e, &m) in v2c.iter().enumerate().take(b).skip(a) {
                    let mag = m.abs();
                    sign ^= m < 0.0;
                    if mag < min1 {
                        min2 = min1;
                        min1 = mag;
                        arg = e;
                    } else if mag < min2 {
                        min2 = mag;
                    }
                }
                for e in a..b {
                    let mag = if e == arg { min2 } else { min1 };
                    let s = sign ^ (v2c[e] < 0.0);
                    c2v[e] = if s { -MIN_SUM_SCALE * mag } else { MIN_SUM_SCALE * mag };
                }
            }
            total.copy_from_slice(llrs);
            for (e, &v) in self.edge_var.iter().enumerate() {
                total[v as usize] += c2v[e];
            }
            for (h, &t) in hard.iter_mut().zip(&total) {
                *h = u8::from(t < 0.0);
            }
            if self.syndrome_ok(&hard) {
                break;
            }
        }
        Ok(hard[..self.info_bits].to_vec())
    }
}

/// Base matrix entries with 4-cycle-free circulant shifts for lifting `z`.
fn build_base(z: usize) -> Vec<(usize, usize, usize)> {
    // information part: spread each column's ones evenly over the rows
    let mut pattern = vec![vec![false; BASE_COLS]; BASE_ROWS];
    let mut next_row = 0;
    for (c, &deg) in INFO_DEGREES.iter().enumerate() {
        for _ in 0..deg {
            while pattern[next_row % BASE_ROWS][c] {
                next_row += 1;
            }
            pattern[next_row % BASE_ROWS][c] = true;
            next_row += 3;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SHIFT_SEED);
    let parity_entries = {
        let mut v = vec![(0, INFO_COLS, PARITY_END_SHIFT % z)];
        v.push((PARITY_MID_ROW, INFO_COLS, 0));
        v.push((BASE_ROWS - 1, INFO_COLS, PARITY_END_SHIFT % z));
        for j in 1..BASE_ROWS {
            v.push((j - 1, INFO_COLS + j, 0));
            v.push((j, INFO_COLS + j, 0));
        }
        v
    };
    let info_cells: Vec<(usize, usize)> = (0..BASE_ROWS)
        .flat_map(|r| (0..INFO_COLS).map(move |c| (r, c)))
        .filter(|&(r, c)| pattern[r][c])
        .collect();
    let mut entries = parity_entries.clone();
    // greedy: place each info entry with the first random shift that keeps
    // the lifted graph free of 4-cycles
    for &(r, c) in &info_cells {
        let mut chosen = None;
        for _ in 0..1000 {
            let s = rng.random_range(0..z);
            if !creates_four_cycle(&entries, (r, c, s), z) {
                chosen = Some(s);
                break;
            }
        }
        let s = chosen.unwrap_or_else(|| rng.random_range(0..z));
        entries.push((r, c, s));
    }
    entries.sort_unstable();
    entries
}

fn creates_four_cycle(entries: &[(usize, usize, usize)], new: (usize, usize, usize), z: usize) -> bool {
    let (r1, c1, s11) = new;
    for &(r, c2, s12) in entries.iter().filter(|e| e.0 == r1 && e.1 != c1) {
        debug_assert_eq!(r, r1);
        for &(r2, _, s22) in entries.iter().filter(|e| e.1 == c2 && e.0 != r1) {
            if let Some(&(_, _, s21)) = entries.iter().find(|e| e.0 == r2 && e.1 == c1) {
                let d = (s11 + s22 + 2 * z - s12 - s21) % z;
                if d == 0 {
                    return true;
                }
            }
        }
    }
    false
}
