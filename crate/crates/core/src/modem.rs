//! Symbol mappers and soft demappers.
//!
//! Everything runs at one complex sample per symbol dimension with a
//! flat per-symbol channel gain. GMSK is carried as MSK (a differentially
//! encoded ±π/2 phase trajectory) plus an SNR penalty for the Gaussian
//! filter's ISI; π/4-DQPSK is differentially encoded on an 8-phase lattice.
//! Both are detected coherently with a forward-backward pass over the phase
//! state, which gives exact bit APPs. 4FSK uses a 4-dimensional orthogonal
//! signal space, so one 4FSK symbol occupies four consecutive samples.
//!
//! LLRs follow the crate convention: positive means bit 0 is more likely.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::techprofiles::ModulationScheme;

/// Modulation parameters for one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSpec {
    pub scheme: ModulationScheme,
    /// Gaussian filter bandwidth-time product; metadata only at symbol level.
    pub gmsk_bt: f64,
    /// Root-raised-cosine roll-off; metadata only at symbol level.
    pub dqpsk_rolloff: f64,
    /// SNR penalty in dB applied by the link engine.
    pub implementation_loss_db: f64,
}

impl ModulationSpec {
    pub fn new(scheme: ModulationScheme) -> Self {
        Self {
            scheme,
            gmsk_bt: 0.3,
            dqpsk_rolloff: 0.35,
            implementation_loss_db: default_implementation_loss_db(scheme),
        }
    }

    pub fn bits_per_symbol(&self) -> usize {
        bits_per_symbol(self.scheme)
    }

    /// Complex samples carried by one symbol.
    pub fn dims(&self) -> usize {
        match self.scheme {
            ModulationScheme::Fsk4 => 4,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.implementation_loss_db >= 0.0) {
            return Err(Error::config("modulation.implementation_loss_db", "must be >= 0"));
        }
        if !(self.gmsk_bt > 0.0) || !(0.0..=1.0).contains(&self.dqpsk_rolloff) {
            return Err(Error::config("modulation", "gmsk_bt must be > 0 and dqpsk_rolloff in [0, 1]"));
        }
        Ok(())
    }
}

pub fn bits_per_symbol(scheme: ModulationScheme) -> usize {
    match scheme {
        ModulationScheme::Gmsk => 1,
        ModulationScheme::Pi4Dqpsk | ModulationScheme::Fsk4 | ModulationScheme::Qpsk => 2,
        ModulationScheme::Qam16 => 4,
        ModulationScheme::Qam64 => 6,
        ModulationScheme::Qam256 => 8,
    }
}

/// 0.5 dB for GMSK (BT = 0.3 ISI), zero otherwise.
pub fn default_implementation_loss_db(scheme: ModulationScheme) -> f64 {
    match scheme {
        ModulationScheme::Gmsk => 0.5,
        _ => 0.0,
    }
}

/// Raw channel bit rate at one symbol per second per hertz.
pub fn raw_bit_rate_bps(scheme: ModulationScheme, bandwidth_hz: f64) -> f64 {
    bits_per_symbol(scheme) as f64 * bandwidth_hz
}

fn check_len(bits: usize, per: usize) -> Result<()> {
    if bits % per != 0 {
        return Err(Error::Contract(format!(
            "{bits} bits is not a multiple of {per} bits per symbol"
        )));
    }
    Ok(())
}

/// Maps bits (0/1 bytes) to complex samples with unit average symbol energy.
pub fn modulate(spec: &ModulationSpec, bits: &[u8]) -> Result<Vec<Complex64>> {
    let k = spec.bits_per_symbol();
    check_len(bits.len(), k)?;
    Ok(match spec.scheme {
        ModulationScheme::Gmsk => {
            let mut lattice = 0usize;
            bits.iter()
                .map(|&b| {
                    lattice = (lattice + MSK_STEPS[b as usize]) % 4;
                    lattice_point(lattice, 4)
                })
                .collect()
        }
        ModulationScheme::Pi4Dqpsk => {
            let mut lattice = 0usize;
            bits.chunks_exact(2)
                .map(|c| {
                    lattice = (lattice + DQPSK_STEPS[dibit(c)]) % 8;
                    lattice_point(lattice, 8)
                })
                .collect()
        }
        ModulationScheme::Fsk4 => {
            let mut out = vec![Complex64::new(0.0, 0.0); bits.len() / 2 * 4];
            for (i, c) in bits.chunks_exact(2).enumerate() {
                out[4 * i + FSK4_TONE[dibit(c)]] = Complex64::new(1.0, 0.0);
            }
            out
        }
        _ => {
            let points = constellation(spec.scheme);
            bits.chunks_exact(k)
                .map(|c| points[c.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)])
                .collect()
        }
    })
}

/// Soft demapper. `csi` holds one complex gain per symbol, `noise_var` is the
/// complex noise variance per sample (N0).
pub fn demodulate_soft(
    spec: &ModulationSpec,
    received: &[Complex64],
    csi: &[Complex64],
    noise_var: f64,
) -> Result<Vec<f64>> {
    if !(noise_var > 0.0) {
        return Err(Error::Contract("noise_var must be > 0".into()));
    }
    let dims = spec.dims();
    if received.len() != csi.len() * dims {
        return Err(Error::LengthMismatch {
            expected: csi.len() * dims,
            actual: received.len(),
        });
    }
    Ok(match spec.scheme {
        ModulationScheme::Gmsk => differential_app(received, csi, noise_var, 4, &MSK_STEPS, 1),
        ModulationScheme::Pi4Dqpsk => differential_app(received, csi, noise_var, 8, &DQPSK_STEPS, 2),
        ModulationScheme::Fsk4 => fsk4_llrs(received, csi, noise_var),
        ModulationScheme::Qpsk => qpsk_llrs(received, csi, noise_var),
        _ => memoryless_llrs(&constellation(spec.scheme), spec.bits_per_symbol(), received, csi, noise_var),
    })
}

/// Hard decisions from LLRs (positive means 0).
pub fn hard_decisions(llrs: &[f64]) -> Vec<u8> {
    llrs.iter().map(|&l| u8::from(l < 0.0)).collect()
}

fn dibit(c: &[u8]) -> usize {
    ((c[0] as usize) << 1) | c[1] as usize
}

fn lattice_point(index: usize, m: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * index as f64 / m as f64)
}

/// Phase step (in lattice units of π/2) per MSK bit: 0 -> +π/2, 1 -> -π/2.
const MSK_STEPS: [usize; 2] = [1, 3];
/// Phase step (in lattice units of π/4) per dibit: 00 -> π/4, 01 -> 3π/4,
/// 10 -> -π/4, 11 -> -3π/4.
const DQPSK_STEPS: [usize; 4] = [1, 3, 7, 5];
/// Tone index (lowest frequency first) per dibit; deviations -3,-1,+1,+3
/// carry 11, 10, 00, 01 respectively.
const FSK4_TONE: [usize; 4] = [2, 3, 1, 0];

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Exact per-bit APPs for a differentially encoded PSK on an `m`-phase
/// lattice with known zero initial phase.
fn differential_app(
    y: &[Complex64],
    csi: &[Complex64],
    n0: f64,
    m: usize,
    steps: &[usize],
    k: usize,
) -> Vec<f64> {
    let n = y.len();
    let points: Vec<Complex64> = (0..m).map(|i| lattice_point(i, m)).collect();
    // branch metric for landing on lattice point p at time t
    let metric = |t: usize, p: usize| -> f64 { -(y[t] - csi[t] * points[p]).norm_sqr() / n0 };
    let neg = f64::NEG_INFINITY;
    let mut alpha = vec![neg; (n + 1) * m];
    alpha[0] = 0.0;
    for t in 0..n {
        let mut norm = neg;
        for s in 0..m {
            let a = alpha[t * m + s];
            if a == neg {
                continue;
            }
            for &step in steps {
                let next = (s + step) % m;
                let v = a + metric(t, next);
                let slot = &mut alpha[(t + 1) * m + next];
                *slot = log_sum_exp(*slot, v);
            }
        }
        for s in 0..m {
            norm = norm.max(alpha[(t + 1) * m + s]);
        }
        for s in 0..m {
            alpha[(t + 1) * m + s] -= norm;
        }
    }
    let mut beta = vec![0.0; m];
    let mut llrs = vec![0.0; n * k];
    for t in (0..n).rev() {
        let mut num = vec![neg; k];
        let mut den = vec![neg; k];
        let mut next_beta = vec![neg; m];
        for s in 0..m {
            let a = alpha[t * m + s];
            for (sym, &step) in steps.iter().enumerate() {
                let p = (s + step) % m;
                let g = metric(t, p);
                if a != neg {
                    let v = a + g + beta[p];
                    for j in 0..k {
                        let bit = (sym >> (k - 1 - j)) & 1;
                        if bit == 0 {
                            num[j] = log_sum_exp(num[j], v);
                        } else {
                            den[j] = log_sum_exp(den[j], v);
                        }
                    }
                }
                next_beta[s] = log_sum_exp(next_beta[s], g + beta[p]);
            }
        }
        for j in 0..k {
            llrs[t * k + j] = num[j] - den[j];
        }
        let norm = next_beta.iter().cloned().fold(neg, f64::max);
        beta = next_beta.into_iter().map(|b| b - norm).collect();
    }
    llrs
}

fn qpsk_llrs(y: &[Complex64], csi: &[Complex64], n0: f64) -> Vec<f64> {
    let scale = 2.0 * std::f64::consts::SQRT_2 / n0;
    let mut out = Vec::with_capacity(2 * y.len());
    for (r, h) in y.iter().zip(csi) {
        let z = h.conj() * r;
        out.push(scale * z.re);
        out.push(scale * z.im);
    }
    out
}

fn fsk4_llrs(y: &[Complex64], csi: &[Complex64], n0: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * csi.len());
    for (i, h) in csi.iter().enumerate() {
        let mut tone_metric = [0.0; 4];
        for (tone, m) in tone_metric.iter_mut().enumerate() {
            *m = 2.0 * (h.conj() * y[4 * i + tone]).re / n0;
        }
        for j in 0..2 {
            let (mut num, mut den) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for (d, &tone) in FSK4_TONE.iter().enumerate() {
                let bit = (d >> (1 - j)) & 1;
                if bit == 0 {
                    num = log_sum_exp(num, tone_metric[tone]);
                } else {
                    den = log_sum_exp(den, tone_metric[tone]);
                }
            }
            out.push(num - den);
        }
    }
    out
}

fn memoryless_llrs(points: &[Complex64], k: usize, y: &[Complex64], csi: &[Complex64], n0: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k * y.len());
    for (r, h) in y.iter().zip(csi) {
        let metrics: Vec<f64> = points.iter().map(|p| -(r - h * p).norm_sqr() / n0).collect();
        for j in 0..k {
            let (mut num, mut den) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for (label, &m) in metrics.iter().enumerate() {
                if (label >> (k - 1 - j)) & 1 == 0 {
                    num = log_sum_exp(num, m);
                } else {
                    den = log_sum_exp(den, m);
                }
            }
            out.push(num - den);
        }
    }
    out
}

/// Gray-labelled square constellation (QPSK or QAM) with unit average energy,
/// indexed by the bit label read MSB first. The first half of the label picks
/// the in-phase level, the second half the quadrature level; bit value 0 maps
/// to the positive side.
pub fn constellation(scheme: ModulationScheme) -> Vec<Complex64> {
    let k = bits_per_symbol(scheme);
    assert!(
        matches!(
            scheme,
            ModulationScheme::Qpsk | ModulationScheme::Qam16 | ModulationScheme::Qam64 | ModulationScheme::Qam256
        ),
        "{scheme:?} is not a square constellation"
    );
    let half = k / 2;
    let levels = 1usize << half;
    // mean energy of the odd-integer grid per dimension: (L^2 - 1) / 3
    let norm = (2.0 * ((levels * levels - 1) as f64) / 3.0).sqrt();
    let pam = |label: usize| -> f64 {
        // Gray label -> position, 0 at the most positive level
        let mut pos = label;
        let mut shift = label >> 1;
        while shift > 0 {
            pos ^= shift;
            shift >>= 1;
        }
        (levels as f64 - 1.0 - 2.0 * pos as f64) / norm
    };
    (0..1usize << k)
        .map(|label| {
            let i = label >> half;
            let q = label & (levels - 1);
            Complex64::new(pam(i), pam(q))
        })
        .collect()
}

/// Bit error rate of coherent orthogonal 4-ary FSK over AWGN at `es_n0`
/// (linear), by numerical integration of the exact symbol error expression.
pub fn fsk4_awgn_ber(es_n0: f64) -> f64 {
    use statrs::distribution::{Continuous, ContinuousCDF, Normal};
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let mean = (2.0 * es_n0).sqrt();
    let (lo, hi, steps) = (mean - 12.0, mean + 12.0, 20_000);
    let h = (hi - lo) / steps as f64;
    let mut pc = 0.0;
    for i in 0..=steps {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        pc += w * n.pdf(x - mean) * n.cdf(x).powi(3);
    }
    (1.0 - pc * h) * 2.0 / 3.0
}

/// QPSK symbol used by tests and the uncoded chain: Gray map with 00 -> (1+j)/√2.
pub fn qpsk_point(b0: u8, b1: u8) -> Complex64 {
    Complex64::new(1.0 - 2.0 * b0 as f64, 1.0 - 2.0 * b1 as f64) * FRAC_1_SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_cn;
    use crate::montecarlo::{q_function, split_stream};
    use proptest::prelude::*;
    use rand::Rng;

    const SIMULATED: [ModulationScheme; 4] = [
        ModulationScheme::Gmsk,
        ModulationScheme::Pi4Dqpsk,
        ModulationScheme::Fsk4,
        ModulationScheme::Qpsk,
    ];

    fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn qpsk_gray_map() {
        let s = ModulationSpec::new(ModulationScheme::Qpsk);
        let x = modulate(&s, &[0, 0, 0, 1, 1, 1, 1, 0]).unwrap();
        let r = FRAC_1_SQRT_2;
        let want = [(r, r), (r, -r), (-r, -r), (-r, r)];
        for (got, (re, im)) in x.iter().zip(want) {
            assert!((got - Complex64::new(re, im)).norm() < 1e-15);
        }
    }

    #[test]
    fn unit_average_energy() {
        let mut rng = split_stream(1, 0);
        for scheme in SIMULATED.into_iter().chain([
            ModulationScheme::Qam16,
            ModulationScheme::Qam64,
            ModulationScheme::Qam256,
        ]) {
            let s = ModulationSpec::new(scheme);
            let n_sym = 100_000;
            let bits = random_bits(&mut rng, n_sym * s.bits_per_symbol());
            let x = modulate(&s, &bits).unwrap();
            let e = x.iter().map(Complex64::norm_sqr).sum::<f64>() / n_sym as f64;
            assert!((e - 1.0).abs() < 0.01, "{scheme:?}: {e}");
        }
    }

    #[test]
    fn odd_bit_count_rejected() {
        let s = ModulationSpec::new(ModulationScheme::Qpsk);
        assert!(matches!(modulate(&s, &[0, 1, 1]), Err(Error::Contract(_))));
    }

    #[test]
    fn dqpsk_transitions_are_odd_multiples_of_quarter_pi() {
        let s = ModulationSpec::new(ModulationScheme::Pi4Dqpsk);
        // every ordered pair of dibits, from every reachable starting phase
        for prefix in 0..8u8 {
            for a in 0..4u8 {
                for b in 0..4u8 {
                    let mut bits = Vec::new();
                    for i in 0..3 {
                        bits.extend([(prefix >> (2 * i)) & 1, (prefix >> (2 * i + 1)) & 1]);
                    }
                    bits.extend([a >> 1, a & 1, b >> 1, b & 1]);
                    let x = modulate(&s, &bits).unwrap();
                    let mut prev = Complex64::new(1.0, 0.0);
                    for sym in x {
                        let d = (sym * prev.conj()).arg();
                        let q = d / (PI / 4.0);
                        let nearest = q.round();
                        assert!((q - nearest).abs() < 1e-9);
                        assert!([1.0, 3.0, -1.0, -3.0].contains(&nearest), "{d}");
                        prev = sym;
                    }
                }
            }
        }
    }

    #[test]
    fn qpsk_llr_matches_brute_force() {
        let mut rng = split_stream(2, 0);
        let points: Vec<(u8, u8, Complex64)> = (0..4u8).map(|l| (l >> 1, l & 1, qpsk_point(l >> 1, l & 1))).collect();
        for _ in 0..1000 {
            let y = sample_cn(&mut rng) * 2.0;
            let h = sample_cn(&mut rng);
            let n0 = rng.random_range(0.05..3.0);
            let llr = demodulate_soft(&ModulationSpec::new(ModulationScheme::Qpsk), &[y], &[h], n0).unwrap();
            for j in 0..2 {
                let (mut p0, mut p1) = (0.0, 0.0);
                for &(b0, b1, s) in &points {
                    let like = (-(y - h * s).norm_sqr() / n0).exp();
                    if [b0, b1][j] == 0 {
                        p0 += like;
                    } else {
                        p1 += like;
                    }
                }
                let want = (p0 / p1).ln();
                assert!((llr[j] - want).abs() < 1e-9, "{} vs {want}", llr[j]);
            }
        }
    }

    #[test]
    fn qpsk_zero_sample_gives_zero_llr() {
        let s = ModulationSpec::new(ModulationScheme::Qpsk);
        let l = demodulate_soft(&s, &[Complex64::new(0.0, 0.0)], &[Complex64::new(0.3, -1.2)], 0.7).unwrap();
        assert_eq!(l, vec![0.0, 0.0]);
    }

    #[test]
    fn qam16_llr_matches_qpsk_style_brute_force() {
        // memoryless demapper against a direct two-sum over the 16 points
        let mut rng = split_stream(3, 0);
        let pts = constellation(ModulationScheme::Qam16);
        let s = ModulationSpec::new(ModulationScheme::Qam16);
        for _ in 0..200 {
            let y = sample_cn(&mut rng);
            let h = sample_cn(&mut rng);
            let l = demodulate_soft(&s, &[y], &[h], 0.4).unwrap();
            for j in 0..4 {
                let (mut p0, mut p1) = (0.0, 0.0);
                for (lab, p) in pts.iter().enumerate() {
                    let like = (-(y - h * p).norm_sqr() / 0.4).exp();
                    if (lab >> (3 - j)) & 1 == 0 {
                        p0 += like
                    } else {
                        p1 += like
                    }
                }
                assert!((l[j] - (p0 / p1).ln()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn qam_gray_neighbours_differ_in_one_bit() {
        for scheme in [ModulationScheme::Qam16, ModulationScheme::Qam64] {
            let pts = constellation(scheme);
            let dmin = 2.0 / (2.0 * ((pts.len() - 1) as f64) / 3.0).sqrt();
            for (a, pa) in pts.iter().enumerate() {
                for (b, pb) in pts.iter().enumerate() {
                    if ((pa - pb).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1, "{scheme:?} {a} {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn exhaustive_dqpsk_app_matches_sequence_sum() {
        // three symbols: sum the likelihood of all 64 bit sequences directly
        let mut rng = split_stream(4, 0);
        let s = ModulationSpec::new(ModulationScheme::Pi4Dqpsk);
        for _ in 0..50 {
            let y: Vec<Complex64> = (0..3).map(|_| sample_cn(&mut rng)).collect();
            let h: Vec<Complex64> = (0..3).map(|_| sample_cn(&mut rng)).collect();
            let n0 = 0.8;
            let l = demodulate_soft(&s, &y, &h, n0).unwrap();
            let mut p0 = [0.0; 6];
            let mut p1 = [0.0; 6];
            for word in 0..64u32 {
                let bits: Vec<u8> = (0..6).map(|i| ((word >> (5 - i)) & 1) as u8).collect();
                let x = modulate(&s, &bits).unwrap();
                let like: f64 = (0..3).map(|t| -(y[t] - h[t] * x[t]).norm_sqr() / n0).sum::<f64>().exp();
                for i in 0..6 {
                    if bits[i] == 0 {
                        p0[i] += like
                    } else {
                        p1[i] += like
                    }
                }
            }
            for i in 0..6 {
                assert!((l[i] - (p0[i] / p1[i]).ln()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn qpsk_awgn_matches_q_function() {
        let s = ModulationSpec::new(ModulationScheme::Qpsk);
        let mut rng = split_stream(5, 0);
        for ebn0_db in [0.0f64, 4.0, 8.0] {
            let ebn0 = 10f64.powf(ebn0_db / 10.0);
            let n0 = 1.0 / (2.0 * ebn0);
            let p = q_function((2.0 * ebn0).sqrt());
            let n_bits = (400.0 / p) as usize & !1;
            let bits = random_bits(&mut rng, n_bits);
            let x = modulate(&s, &bits).unwrap();
            let one = Complex64::new(1.0, 0.0);
            let y: Vec<Complex64> = x.iter().map(|v| v + sample_cn(&mut rng) * n0.sqrt()).collect();
            let l = demodulate_soft(&s, &y, &vec![one; y.len()], n0).unwrap();
            let errs = hard_decisions(&l).iter().zip(&bits).filter(|(a, b)| a != b).count();
            let ber = errs as f64 / n_bits as f64;
            let se = (p * (1.0 - p) / n_bits as f64).sqrt();
            assert!((ber - p).abs() < 3.0 * se, "Eb/N0 {ebn0_db}: {ber} vs {p}");
        }
    }

    #[test]
    fn fsk4_awgn_matches_orthogonal_expression() {
        let s = ModulationSpec::new(ModulationScheme::Fsk4);
        let mut rng = split_stream(6, 0);
        for ebn0_db in [2.0f64, 6.0] {
            let es_n0 = 2.0 * 10f64.powf(ebn0_db / 10.0);
            let n0 = 1.0 / es_n0;
            let p = fsk4_awgn_ber(es_n0);
            let n_bits = ((600.0 / p) as usize).min(2_000_000) & !1;
            let bits = random_bits(&mut rng, n_bits);
            let x = modulate(&s, &bits).unwrap();
            let y: Vec<Complex64> = x.iter().map(|v| v + sample_cn(&mut rng) * n0.sqrt()).collect();
            let csi = vec![Complex64::new(1.0, 0.0); n_bits / 2];
            let l = demodulate_soft(&s, &y, &csi, n0).unwrap();
            let errs = hard_decisions(&l).iter().zip(&bits).filter(|(a, b)| a != b).count();
            let ber = errs as f64 / n_bits as f64;
            let se = (p * (1.0 - p) / n_bits as f64).sqrt();
            assert!((ber - p).abs() < 3.0 * se, "Eb/N0 {ebn0_db}: {ber} vs {p}");
        }
    }

    #[test]
    fn fsk4_lies_inside_union_bound() {
        // Q(sqrt(Es/N0)) <= Ps <= 3 Q(sqrt(Es/N0)), tight at high SNR
        for ebn0_db in [4.0f64, 6.0, 10.0] {
            let es_n0 = 2.0 * 10f64.powf(ebn0_db / 10.0);
            let ps = fsk4_awgn_ber(es_n0) * 1.5;
            let q = q_function(es_n0.sqrt());
            assert!(ps > q && ps < 3.0 * q, "{ps} {q}");
        }
        let es_n0 = 2.0 * 10f64.powf(1.2);
        let ps = fsk4_awgn_ber(es_n0) * 1.5;
        assert!(ps / (3.0 * q_function(es_n0.sqrt())) > 0.99);
    }

    #[test]
    fn misaligned_lengths_rejected() {
        let s = ModulationSpec::new(ModulationScheme::Fsk4);
        let r = demodulate_soft(&s, &[Complex64::new(1.0, 0.0); 7], &[Complex64::new(1.0, 0.0); 2], 1.0);
        assert!(matches!(r, Err(Error::LengthMismatch { expected: 8, actual: 7 })));
    }

    proptest! {
        #[test]
        fn noiseless_hard_decisions_invert_modulation(
            seed in any::<u64>(),
            n_sym in 1usize..64,
            which in 0usize..4,
        ) {
            let scheme = SIMULATED[which];
            let s = ModulationSpec::new(scheme);
            let mut rng = split_stream(seed, 0);
            let bits = random_bits(&mut rng, n_sym * s.bits_per_symbol());
            let x = modulate(&s, &bits).unwrap();
            let h: Vec<Complex64> = (0..n_sym).map(|_| sample_cn(&mut rng) + 0.05).collect();
            let dims = s.dims();
            let y: Vec<Complex64> = x.iter().enumerate().map(|(i, v)| h[i / dims] * v).collect();
            let l = demodulate_soft(&s, &y, &h, 1e-4).unwrap();
            prop_assert_eq!(hard_decisions(&l), bits);
        }
    }
}
