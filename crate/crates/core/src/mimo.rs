//! 2x2 Alamouti space-time block code with two-antenna receive combining.

use num_complex::Complex64;

use crate::channel::FadingMatrix;
use crate::error::{Error, Result};

/// Two symbol periods on two transmit antennas. `tx[a][t]` is the sample sent
/// by antenna `a` at time `t`; each entry already carries the 1/√2 power split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StbcBlock {
    pub tx: [[Complex64; 2]; 2],
    pub source: [Complex64; 2],
}

/// Antenna 0 sends (s1, -s2*), antenna 1 sends (s2, s1*).
pub fn alamouti_encode(s1: Complex64, s2: Complex64) -> StbcBlock {
    let k = std::f64::consts::FRAC_1_SQRT_2;
    StbcBlock {
        tx: [[s1 * k, -s2.conj() * k], [s2 * k, s1.conj() * k]],
        source: [s1, s2],
    }
}

/// Received samples `r[rx][t]` for a block through `h` (rows rx, columns tx),
/// before noise.
pub fn propagate(block: &StbcBlock, h: &FadingMatrix) -> [[Complex64; 2]; 2] {
    let mut r = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (j, row) in r.iter_mut().enumerate() {
        for (t, v) in row.iter_mut().enumerate() {
            *v = h.get(j, 0) * block.tx[0][t] + h.get(j, 1) * block.tx[1][t];
        }
    }
    r
}

/// Output of the linear combiner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combined {
    /// Unbiased estimates of (s1, s2): each equals the symbol plus noise of
    /// variance `noise_var / effective_snr_scale`.
    pub estimates: [Complex64; 2],
    /// `sum |h_ij|^2 / 2`; zero marks an erasure.
    pub effective_snr_scale: f64,
}

/// Linear Alamouti combining with genie `h`. An all-zero channel yields zero
/// estimates and scale 0.
pub fn alamouti_combine(received: &[[Complex64; 2]; 2], h: &FadingMatrix) -> Result<Combined> {
    if h.n_tx != 2 || h.n_rx != 2 {
        return Err(Error::Contract(format!(
            "Alamouti combining needs a 2x2 channel, got {}x{}",
            h.n_rx, h.n_tx
        )));
    }
    let energy = h.frobenius_sq();
    let zero = Complex64::new(0.0, 0.0);
    if energy == 0.0 {
        return Ok(Combined {
            estimates: [zero; 2],
            effective_snr_scale: 0.0,
        });
    }
    let (mut z1, mut z2) = (zero, zero);
    for (j, r) in received.iter().enumerate() {
        let (h1, h2) = (h.get(j, 0), h.get(j, 1));
        z1 += h1.conj() * r[0] + h2 * r[1].conj();
        z2 += h2.conj() * r[0] - h1 * r[1].conj();
    }
    // z = (energy / √2) s + noise; rescale to unit gain
    let g = std::f64::consts::SQRT_2 / energy;
    Ok(Combined {
        estimates: [z1 * g, z2 * g],
        effective_snr_scale: energy / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_cn, sample_fading};
    use crate::montecarlo::split_stream;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn encode_unit_impulse() {
        let b = alamouti_encode(c(1.0, 0.0), c(0.0, 0.0));
        let k = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(b.tx[0][0], c(k, 0.0));
        assert_eq!(b.tx[1][1], c(k, 0.0));
        assert_eq!(b.tx[0][1].norm(), 0.0);
        assert_eq!(b.tx[1][0].norm(), 0.0);
    }

    #[test]
    fn columns_orthogonal_and_energy_preserved() {
        let mut rng = split_stream(40, 0);
        for _ in 0..1000 {
            let (s1, s2) = (sample_cn(&mut rng), sample_cn(&mut rng));
            let b = alamouti_encode(s1, s2);
            // rows are antenna streams; the space-time matrix columns are
            // (antenna 0, antenna 1) at each time, and the rows are orthogonal
            let inner = b.tx[0][0] * b.tx[1][0].conj() + b.tx[0][1] * b.tx[1][1].conj();
            assert!(inner.norm() < 1e-12);
            let e: f64 = b.tx.iter().flatten().map(Complex64::norm_sqr).sum();
            assert!((e - (s1.norm_sqr() + s2.norm_sqr())).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_channel_scale_is_one() {
        let h = FadingMatrix::identity(2);
        let b = alamouti_encode(c(0.3, -0.2), c(-1.0, 0.5));
        let out = alamouti_combine(&propagate(&b, &h), &h).unwrap();
        assert!((out.effective_snr_scale - 1.0).abs() < 1e-15);
        assert!((out.estimates[0] - b.source[0]).norm() < 1e-12);
    }

    #[test]
    fn noiseless_random_channels_recover_symbols() {
        let mut rng = split_stream(41, 0);
        for _ in 0..1000 {
            let h = sample_fading(&mut rng, 2, 2).unwrap();
            let b = alamouti_encode(sample_cn(&mut rng), sample_cn(&mut rng));
            let out = alamouti_combine(&propagate(&b, &h), &h).unwrap();
            for i in 0..2 {
                assert!((out.estimates[i] - b.source[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_channel_is_an_erasure() {
        let h = FadingMatrix {
            n_rx: 2,
            n_tx: 2,
            coeffs: vec![c(0.0, 0.0); 4],
        };
        let out = alamouti_combine(&[[c(1.0, 1.0); 2]; 2], &h).unwrap();
        assert_eq!(out.effective_snr_scale, 0.0);
        assert_eq!(out.estimates, [c(0.0, 0.0); 2]);
        assert!(alamouti_combine(&[[c(0.0, 0.0); 2]; 2], &FadingMatrix::identity(1)).is_err());
    }

    #[test]
    fn output_snr_matches_matched_filter_bound() {
        // For a fixed channel, push unit-variance noise through the combiner and
        // compare the estimate noise variance with 1 / scale. The matched filter
        // over the 4 branches of each symbol (per-antenna amplitude 1/√2) gives
        // output SNR = sum |h|^2 / 2, so the two must agree.
        let mut rng = split_stream(42, 0);
        for _ in 0..20 {
            let h = sample_fading(&mut rng, 2, 2).unwrap();
            let mf_snr: f64 = h.coeffs.iter().map(|x| x.norm_sqr() * 0.5).sum();
            let n = 20_000;
            let mut var = 0.0;
            for _ in 0..n {
                let noise = [[sample_cn(&mut rng), sample_cn(&mut rng)], [sample_cn(&mut rng), sample_cn(&mut rng)]];
                let out = alamouti_combine(&noise, &h).unwrap();
                var += out.estimates[0].norm_sqr();
                assert!((out.effective_snr_scale - mf_snr).abs() < 1e-12);
            }
            let var = var / n as f64;
            assert!((var * mf_snr - 1.0).abs() < 0.05, "{}", var * mf_snr);
        }
    }
}
