//! Parallel concatenated code: two 8-state recursive systematic encoders
//! (feedback 13, feedforward 15 octal) joined by a quadratic permutation
//! polynomial interleaver, decoded with iterative max-log-MAP.
//!
//! Codeword layout: `K` systematic bits, `K` parity bits of the first
//! encoder, `K` parity bits of the second, then 6 tail bits per encoder
//! (systematic and parity pairs for 3 flushing steps).

use crate::error::{Error, Result};

const STATES: usize = 8;
const TAIL_STEPS: usize = 3;
/// Total termination overhead in bits.
pub const TAIL_BITS: usize = 4 * TAIL_STEPS;
/// Damping applied to extrinsic information exchanged between decoders.
const EXTRINSIC_SCALE: f64 = 0.7;

/// Quadratic permutation polynomial interleaver `pi(i) = (f1 i + f2 i^2) mod K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Qpp {
    pub f1: u64,
    pub f2: u64,
    pub perm: Vec<usize>,
}

impl Qpp {
    pub fn new(k: usize, f1: u64, f2: u64) -> Option<Self> {
        let kk = k as u64;
        let perm: Vec<usize> = (0..kk)
            .map(|i| ((f1 * i + f2 * ((i * i) % kk)) % kk) as usize)
            .collect();
        let mut seen = vec![false; k];
        for &p in &perm {
            if std::mem::replace(&mut seen[p], true) {
                return None;
            }
        }
        Some(Self { f1, f2, perm })
    }

    /// Deterministic search for the coefficient pair with the best short-range
    /// spread among valid permutation polynomials.
    pub fn search(k: usize) -> Self {
        let kk = k as u64;
        let radical: u64 = prime_factors(kk).iter().product();
        let window = 16.min(k.saturating_sub(1)).max(1);
        let mut best: Option<(usize, Self)> = None;
        for f2_mult in 1..=8u64 {
            let f2 = (radical * f2_mult) % kk.max(1);
            for f1 in (1..kk.min(256)).filter(|f| gcd(*f, kk) == 1) {
                let Some(q) = Qpp::new(k, f1, f2) else { continue };
                let spread = q.spread(window);
                if best.as_ref().is_none_or(|(s, _)| spread > *s) {
                    best = Some((spread, q));
                }
            }
        }
        best.map(|(_, q)| q).unwrap_or_else(|| Qpp::new(k, 1, 0).expect("identity"))
    }

    /// Smallest `|i - j| + |pi(i) - pi(j)|` over pairs closer than `window`.
    pub fn spread(&self, window: usize) -> usize {
        let k = self.perm.len();
        let mut best = usize::MAX;
        for i in 0..k {
            for d in 1..=window.min(k - 1 - i.min(k - 1)) {
                let j = i + d;
                if j >= k {
                    break;
                }
                best = best.min(d + self.perm[i].abs_diff(self.perm[j]));
            }
        }
        best
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// One trellis step of the constituent encoder: returns (next_state, parity).
/// State bits hold the last three register values, most recent highest.
fn rsc_step(state: usize, input: u8) -> (usize, u8) {
    let s1 = (state >> 2) & 1;
    let s2 = (state >> 1) & 1;
    let s3 = state & 1;
    let a = input as usize ^ s2 ^ s3;
    let parity = a ^ s1 ^ s3;
    ((a << 2) | (s1 << 1) | s2, parity as u8)
}

/// Input that drives the feedback to zero from `state`.
fn tail_input(state: usize) -> u8 {
    (((state >> 1) ^ state) & 1) as u8
}

fn rsc_encode(info: &[u8]) -> (Vec<u8>, [u8; 2 * TAIL_STEPS]) {
    let mut state = 0;
    let mut parity = Vec::with_capacity(info.len());
    for &u in info {
        let (next, p) = rsc_step(state, u);
        parity.push(p);
        state = next;
    }
    let mut tail = [0u8; 2 * TAIL_STEPS];
    for t in 0..TAIL_STEPS {
        let u = tail_input(state);
        let (next, p) = rsc_step(state, u);
        tail[2 * t] = u;
        tail[2 * t + 1] = p;
        state = next;
    }
    debug_assert_eq!(state, 0);
    (parity, tail)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurboCode {
    pub info_bits: usize,
    pub iterations: usize,
    pub interleaver: Qpp,
    /// `inverse[i]` is the interleaved position carrying info bit `i`.
    inverse: Vec<usize>,
}

impl TurboCode {
    pub fn new(info_bits: usize, iterations: usize) -> Result<Self> {
        if info_bits < 8 {
            return Err(Error::config("codec.info_block_bits", "turbo blocks need at least 8 bits"));
        }
        if iterations == 0 {
            return Err(Error::config("codec.decoder_iterations", "must be >= 1"));
        }
        let interleaver = Qpp::search(info_bits);
        let mut inverse = vec![0; info_bits];
        for (j, &p) in interleaver.perm.iter().enumerate() {
            inverse[p] = j;
        }
        Ok(Self {
            info_bits,
            iterations,
            interleaver,
            inverse,
        })
    }

    pub fn coded_len(&self) -> usize {
        3 * self.info_bits + TAIL_BITS
    }

    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        let permuted: Vec<u8> = self.interleaver.perm.iter().map(|&p| info[p]).collect();
        let (p1, t1) = rsc_encode(info);
        let (p2, t2) = rsc_encode(&permuted);
        let mut out = Vec::with_capacity(self.coded_len());
        out.extend_from_slice(info);
        out.extend_from_slice(&p1);
        out.extend_from_slice(&p2);
        out.extend_from_slice(&t1);
        out.extend_from_slice(&t2);
        out
    }

    pub fn decode(&self, llrs: &[f64]) -> Result<Vec<u8>> {
        let k = self.info_bits;
        if llrs.len() != self.coded_len() {
            return Err(Error::LengthMismatch {
                expected: self.coded_len(),
                actual: llrs.len(),
            });
        }
        let sys = &llrs[..k];
        let par1 = &llrs[k..2 * k];
        let par2 = &llrs[2 * k..3 * k];
        let tail1 = &llrs[3 * k..3 * k + 2 * TAIL_STEPS];
        let tail2 = &llrs[3 * k + 2 * TAIL_STEPS..];
        let perm = &self.interleaver.perm;
        let sys_i: Vec<f64> = perm.iter().map(|&p| sys[p]).collect();

        let mut apriori1 = vec![0.0; k];
        let mut apriori2 = vec![0.0; k];
        let mut app1 = vec![0.0; k];
        let mut app2 = vec![0.0; k];
        let mut decision = vec![0u8; k];
        let mut trellis = Trellis::new(k);
        for it in 0..self.iterations {
            trellis.max_log_map(sys, par1, tail1, &apriori1, &mut app1);
            for i in 0..k {
                apriori2[self.inverse[i]] = EXTRINSIC_SCALE * (app1[i] - sys[i] - apriori1[i]);
            }
            trellis.max_log_map(&sys_i, par2, tail2, &apriori2, &mut app2);
            let mut changed = false;
            for (j, &i) in perm.iter().enumerate() {
                apriori1[i] = EXTRINSIC_SCALE * (app2[j] - sys_i[j] - apriori2[j]);
                let bit = u8::from(app2[j] < 0.0);
                if decision[i] != bit {
                    decision[i] = bit;
                    changed = true;
                }
            }
            if it > 0 && !changed {
                break;
            }
        }
        Ok(decision)
    }
}

/// Scratch buffers for the constituent max-log-MAP decoder.
struct Trellis {
    alpha: Vec<[f64; STATES]>,
}

impl Trellis {
    fn new(k: usize) -> Self {
        Self {
            alpha: vec![[0.0; STATES]; k + TAIL_STEPS + 1],
        }
    }

    /// Writes the a-posteriori LLR of each info bit into `app`.
    fn max_log_map(&mut self, sys: &[f64], par: &[f64], tail: &[f64], apriori: &[f64], app: &mut [f64]) {
        let k = sys.len();
        let neg = f64::NEG_INFINITY;
        // branch metric: half the correlation of the LLRs with the bit signs
        let gamma = |ls: f64, lp: f64, u: u8, p: u8| -> f64 {
            0.5 * (if u == 0 { ls } else { -ls } + if p == 0 { lp } else { -lp })
        };
        let alpha = &mut self.alpha;
        alpha[0] = [neg; STATES];
        alpha[0][0] = 0.0;
        for t in 0..k + TAIL_STEPS {
            let mut next = [neg; STATES];
            for s in 0..STATES {
                let a = alpha[t][s];
                if a == neg {
                    continue;
                }
                if t < k {
                    for u in 0..2u8 {
                        let (ns, p) = rsc_step(s, u);
                        let v = a + gamma(sys[t] + apriori[t], par[t], u, p);
                        next[ns] = next[ns].max(v);
                    }
                } else {
                    let u = tail_input(s);
                    let (ns, p) = rsc_step(s, u);
                    let j = 2 * (t - k);
                    let v = a + gamma(tail[j], tail[j + 1], u, p);
                    next[ns] = next[ns].max(v);
                }
            }
            let norm = next.iter().cloned().fold(neg, f64::max);
            for v in next.iter_mut() {
                *v -= norm;
            }
            alpha[t + 1] = next;
        }
        let mut beta = [neg; STATES];
        beta[0] = 0.0;
        for t in (0..k + TAIL_STEPS).rev() {
            let mut prev = [neg; STATES];
            if t >= k {
                let j = 2 * (t - k);
                for (s, slot) in prev.iter_mut().enumerate() {
                    let u = tail_input(s);
                    let (ns, p) = rsc_step(s, u);
                    *slot = beta[ns] + gamma(tail[j], tail[j + 1], u, p);
                }
            } else {
                let (mut best0, mut best1) = (neg, neg);
                for (s, slot) in prev.iter_mut().enumerate() {
                    for u in 0..2u8 {
                        let (ns, p) = rsc_step(s, u);
                        let g = gamma(sys[t] + apriori[t], par[t], u, p);
                        let b = beta[ns] + g;
                        *slot = slot.max(b);
                        let full = alpha[t][s] + b;
                        if u == 0 {
                            best0 = best0.max(full);
                        } else {
                            best1 = best1.max(full);
                        }
                    }
                }
                app[t] = best0 - best1;
            }
            let norm = prev.iter().cloned().fold(neg, f64::max);
            for v in prev.iter_mut() {
                *v -= norm;
            }
            beta = prev;
        }
    }
}
