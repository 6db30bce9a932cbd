//! Feedforward convolutional codes, zero-tail terminated, with a soft-input
//! Viterbi decoder and a periodic puncturer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate-1/n feedforward code. Generators are octal-style integers whose most
/// significant of the `constraint_length` bits taps the current input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvCode {
    pub constraint_length: usize,
    pub generators: Vec<u32>,
}

impl ConvCode {
    /// K = 7, generators 133, 171, 165 (octal).
    pub fn k7_rate_third() -> Self {
        Self {
            constraint_length: 7,
            generators: vec![0o133, 0o171, 0o165],
        }
    }

    /// K = 4, generators 13, 15, 17 (octal); free distance 10.
    pub fn k4_rate_third() -> Self {
        Self {
            constraint_length: 4,
            generators: vec![0o13, 0o15, 0o17],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.constraint_length;
        if !(2..=16).contains(&k) || self.generators.is_empty() {
            return Err(Error::config("codec.generators", "constraint length must be in 2..=16"));
        }
        if self.generators.iter().any(|&g| g == 0 || g >> k != 0) {
            return Err(Error::config("codec.generators", "generator does not fit the constraint length"));
        }
        Ok(())
    }

    pub fn n_out(&self) -> usize {
        self.generators.len()
    }

    pub fn memory(&self) -> usize {
        self.constraint_length - 1
    }

    pub fn n_states(&self) -> usize {
        1 << self.memory()
    }

    /// Coded length for `info_bits` including the zero tail.
    pub fn coded_len(&self, info_bits: usize) -> usize {
        (info_bits + self.memory()) * self.n_out()
    }

    /// Output bits of one trellis step from `state` with `input`.
    fn outputs(&self, state: usize, input: usize) -> u32 {
        let reg = ((input << self.memory()) | state) as u32;
        self.generators
            .iter()
            .fold(0, |acc, &g| (acc << 1) | ((g & reg).count_ones() & 1))
    }

    fn next_state(&self, state: usize, input: usize) -> usize {
        (input << (self.memory() - 1)) | (state >> 1)
    }

    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        let n = self.n_out();
        let mut out = Vec::with_capacity(self.coded_len(info.len()));
        let mut state = 0usize;
        for &b in info.iter().chain(std::iter::repeat_n(&0u8, self.memory())) {
            let o = self.outputs(state, b as usize);
            for j in (0..n).rev() {
                out.push(((o >> j) & 1) as u8);
            }
            state = self.next_state(state, b as usize);
        }
        out
    }

    /// Maximum-likelihood sequence decision for a terminated block. `llrs`
    /// holds one value per coded bit, positive meaning 0.
    pub fn viterbi(&self, llrs: &[f64], info_bits: usize) -> Result<Vec<u8>> {
        let expected = self.coded_len(info_bits);
        if llrs.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: llrs.len(),
            });
        }
        let n = self.n_out();
        let ns = self.n_states();
        let steps = info_bits + self.memory();
        // branch outputs per (state, input), as correlation sign patterns
        let table: Vec<u32> = (0..ns * 2).map(|i| self.outputs(i >> 1, i & 1)).collect();
        let mut metric = vec![f64::NEG_INFINITY; ns];
        metric[0] = 0.0;
        let mut next = vec![f64::NEG_INFINITY; ns];
        // survivor: the input bit and predecessor are recoverable from the
        // state's low bit choice, stored per step per state
        let words = ns.div_ceil(64);
        let mut decisions = vec![0u64; steps * words];
        let mut branch = vec![0.0; 1 << n];
        for t in 0..steps {
            let l = &llrs[t * n..(t + 1) * n];
            for (pattern, v) in branch.iter_mut().enumerate() {
                *v = (0..n)
                    .map(|j| if (pattern >> (n - 1 - j)) & 1 == 0 { l[j] } else { -l[j] })
                    .sum::<f64>()
                    * 0.5;
            }
            next.fill(f64::NEG_INFINITY);
            let tail = t >= info_bits;
            for s in 0..ns {
                let m = metric[s];
                if m == f64::NEG_INFINITY {
                    continue;
                }
                for input in 0..=usize::from(!tail) {
                    let to = self.next_state(s, input);
                    let cand = m + branch[table[s * 2 + input] as usize];
                    if cand > next[to] {
                        next[to] = cand;
                        // predecessors of `to` differ only in their lowest bit
                        let bit = (s & 1) as u64;
                        let w = &mut decisions[t * words + to / 64];
                        *w = (*w & !(1 << (to % 64))) | (bit << (to % 64));
                    }
                }
            }
            std::mem::swap(&mut metric, &mut next);
        }
        let mut state = 0usize;
        let mut out = vec![0u8; steps];
        for t in (0..steps).rev() {
            let input = state >> (self.memory() - 1);
            out[t] = input as u8;
            let low = (decisions[t * words + state / 64] >> (state % 64)) & 1;
            state = ((state << 1) & (ns - 1)) | low as usize;
        }
        out.truncate(info_bits);
        Ok(out)
    }
}

/// Periodic puncturing pattern: `pattern[j][p]` keeps output stream `j` at
/// trellis step `p mod period` when true.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Puncturer {
    pub pattern: Vec<Vec<bool>>,
}

impl Puncturer {
    pub fn identity(n_out: usize) -> Self {
        Self {
            pattern: vec![vec![true]; n_out],
        }
    }

    pub fn validate(&self, n_out: usize) -> Result<()> {
        let period = self.pattern.first().map_or(0, Vec::len);
        if self.pattern.len() != n_out || period == 0 || self.pattern.iter().any(|r| r.len() != period) {
            return Err(Error::config("codec.puncture_pattern", "must be n_out rows of equal, nonzero length"));
        }
        if (0..period).all(|p| self.pattern.iter().all(|r| !r[p])) {
            return Err(Error::config("codec.puncture_pattern", "a column may not delete every bit"));
        }
        Ok(())
    }

    fn period(&self) -> usize {
        self.pattern[0].len()
    }

    fn keep(&self, index: usize) -> bool {
        let n = self.pattern.len();
        self.pattern[index % n][(index / n) % self.period()]
    }

    /// Kept bits per `period` trellis steps over mother-code bits per period.
    pub fn kept_fraction(&self) -> f64 {
        let kept: usize = self.pattern.iter().flatten().filter(|&&b| b).count();
        kept as f64 / (self.pattern.len() * self.period()) as f64
    }

    pub fn punctured_len(&self, mother_len: usize) -> usize {
        (0..mother_len).filter(|&i| self.keep(i)).count()
    }

    pub fn puncture<T: Copy>(&self, mother: &[T]) -> Vec<T> {
        mother
            .iter()
            .enumerate()
            .filter(|(i, _)| self.keep(*i))
            .map(|(_, &v)| v)
            .collect()
    }

    /// Re-inserts erased positions as zero LLRs.
    pub fn depuncture(&self, llrs: &[f64], mother_len: usize) -> Result<Vec<f64>> {
        let expected = self.punctured_len(mother_len);
        if llrs.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: llrs.len(),
            });
        }
        let mut it = llrs.iter();
        Ok((0..mother_len)
            .map(|i| if self.keep(i) { *it.next().expect("counted") } else { 0.0 })
            .collect())
    }
}
