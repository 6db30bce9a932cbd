//! Conditional Monte Carlo support for deep error rates.
//!
//! Under genie CSI and block fading, one attempt whose symbols all see the
//! same post-combining SNR is statistically identical to an AWGN transmission
//! at that SNR. The chain's own block-failure probability and bit error rate
//! are therefore measured once on AWGN over an SNR grid, and deep points are
//! obtained by averaging those curves over sampled channel states instead of
//! waiting for rare decoding failures. With several fading blocks per
//! codeword the per-block SNRs are first collapsed to one effective SNR by
//! mutual-information averaging.

use serde::{Deserialize, Serialize};

use crate::modem::bits_per_symbol;
use crate::techprofiles::ModulationScheme;

/// Measured AWGN performance of one modem + codec chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwgnTable {
    pub snr_db: Vec<f64>,
    /// Block failure probability (any info bit wrong).
    pub p_fail: Vec<f64>,
    /// Info-bit error rate.
    pub ber: Vec<f64>,
    pub trials: Vec<u64>,
}

impl AwgnTable {
    /// Builds a table from raw per-point counts, enforcing monotonicity in SNR.
    pub fn from_counts(snr_db: Vec<f64>, block_errors: &[u64], bit_errors: &[u64], trials: Vec<u64>, k: usize) -> Self {
        let mut p_fail: Vec<f64> = block_errors.iter().zip(&trials).map(|(&e, &n)| e as f64 / n as f64).collect();
        let mut ber: Vec<f64> = bit_errors
            .iter()
            .zip(&trials)
            .map(|(&e, &n)| e as f64 / (n as f64 * k as f64))
            .collect();
        for v in [&mut p_fail, &mut ber] {
            for i in 1..v.len() {
                v[i] = v[i].min(v[i - 1]);
            }
        }
        Self {
            snr_db,
            p_fail,
            ber,
            trials,
        }
    }

    fn interp(&self, values: &[f64], snr_db: f64) -> f64 {
        let x = &self.snr_db;
        if snr_db <= x[0] {
            return values[0];
        }
        let last = x.len() - 1;
        if snr_db >= x[last] {
            return values[last];
        }
        let i = x.partition_point(|&v| v <= snr_db) - 1;
        let t = (snr_db - x[i]) / (x[i + 1] - x[i]);
        let (a, b) = (values[i], values[i + 1]);
        if a > 0.0 && b > 0.0 {
            (a.ln() + t * (b.ln() - a.ln())).exp()
        } else {
            a + t * (b - a)
        }
    }

    pub fn p_fail_at(&self, snr_db: f64) -> f64 {
        self.interp(&self.p_fail, snr_db)
    }

    pub fn ber_at(&self, snr_db: f64) -> f64 {
        self.interp(&self.ber, snr_db)
    }
}

/// Grid and effort used when measuring an [`AwgnTable`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableParams {
    pub snr_lo_db: f64,
    pub snr_hi_db: f64,
    pub step_db: f64,
    /// Stop a grid point after this many failed blocks.
    pub block_errors: u64,
    /// Trial cap per grid point; a point with no failures ends the scan.
    pub max_trials: u64,
}

impl Default for TableParams {
    fn default() -> Self {
        Self {
            snr_lo_db: -12.0,
            snr_hi_db: 30.0,
            step_db: 0.25,
            block_errors: 60,
            max_trials: 3000,
        }
    }
}

/// 32-point Gauss-Hermite rule for expectations over a standard normal,
/// computed once by Newton iteration on the orthonormal recurrence.
fn hermite_rule() -> &'static (Vec<f64>, Vec<f64>) {
    use std::sync::OnceLock;
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        // Newton iteration on the physicists' Hermite polynomial H_n
        let n = 32usize;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let pi_quarter = std::f64::consts::PI.powf(-0.25);
        let mut z = 0.0f64;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (pi_quarter, 0.0);
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-14 {
                    break;
                }
            }
            nodes.push(z);
            weights.push(2.0 / (pp * pp));
        }
        // expand symmetric half and convert to the standard normal weight
        let mut x = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        let norm = std::f64::consts::PI.sqrt();
        for i in 0..nodes.len() {
            x.push(nodes[i] * std::f64::consts::SQRT_2);
            w.push(weights[i] / norm);
            if n % 2 == 0 || i + 1 < nodes.len() {
                x.push(-nodes[i] * std::f64::consts::SQRT_2);
                w.push(weights[i] / norm);
            }
        }
        (x, w)
    })
}

/// Mutual information of a binary input whose LLR is consistent Gaussian
/// with variance `s2`: 1 - E[log2(1 + e^-L)], L ~ N(s2/2, s2).
pub fn j_function(s2: f64) -> f64 {
    if s2 <= 0.0 {
        return 0.0;
    }
    let (x, w) = hermite_rule();
    let s = s2.sqrt();
    let e: f64 = x
        .iter()
        .zip(w)
        .map(|(&xi, &wi)| {
            let l = s2 / 2.0 + s * xi;
            // log2(1 + e^-l) computed stably
            let v = if l > 0.0 { (-l).exp().ln_1p() } else { -l + l.exp().ln_1p() };
            wi * v / std::f64::consts::LN_2
        })
        .sum();
    (1.0 - e).clamp(0.0, 1.0)
}

/// Per-bit mutual information of a modulation at symbol SNR `snr` (linear),
/// using the Gaussian-LLR approximation for each bit.
pub fn bit_mi(scheme: ModulationScheme, snr: f64) -> f64 {
    // LLR variance per bit: 4 x (per-bit amplitude SNR)
    let per_bit = match scheme {
        ModulationScheme::Gmsk => 2.0 * snr,
        _ => 2.0 * snr / bits_per_symbol(scheme) as f64,
    };
    j_function(4.0 * per_bit)
}

/// Effective SNR (dB) of several equally weighted blocks: the AWGN SNR whose
/// per-bit mutual information equals the blocks' average.
pub fn effective_snr_db(scheme: ModulationScheme, block_snr: &[f64]) -> f64 {
    if block_snr.len() == 1 {
        return 10.0 * block_snr[0].max(1e-30).log10();
    }
    let target = block_snr.iter().map(|&s| bit_mi(scheme, s)).sum::<f64>() / block_snr.len() as f64;
    if target >= 1.0 - 1e-12 {
        return 60.0;
    }
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bit_mi(scheme, 10f64.powf(mid / 10.0)) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
