//! Link budget and fading: path loss, thermal noise, log-normal shadowing and
//! Rayleigh small-scale fading.
//!
//! The default large-scale model is the urban-macro NLOS path loss
//! `13.54 + 39.08 log10(d) + 20 log10(fc_GHz) - 0.6 (h_UT - 1.5)` with
//! `h_UT = 1.5 m`, whose companion shadowing deviation is 7.8 dB.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distances below this are rejected instead of extrapolated.
pub const DISTANCE_FLOOR_M: f64 = 10.0;
pub const FC_MIN_HZ: f64 = 0.4e9;
pub const FC_MAX_HZ: f64 = 7.0e9;
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;
pub const UMA_NLOS_SHADOWING_DB: f64 = 7.8;
pub const UT_HEIGHT_M: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PathLossModel {
    #[default]
    #[serde(rename = "uma_nlos")]
    UmaNlos,
    #[serde(rename = "free_space")]
    FreeSpace,
}

/// Path loss in dB at `distance_m` for carrier `fc_hz`.
pub fn path_loss_db(distance_m: f64, fc_hz: f64, model: PathLossModel) -> Result<f64> {
    if !(distance_m >= DISTANCE_FLOOR_M) {
        return Err(Error::BelowValidityFloor {
            distance_m,
            floor_m: DISTANCE_FLOOR_M,
        });
    }
    if !(FC_MIN_HZ..=FC_MAX_HZ).contains(&fc_hz) {
        return Err(Error::FrequencyOutOfRange {
            fc_hz,
            lo_hz: FC_MIN_HZ,
            hi_hz: FC_MAX_HZ,
        });
    }
    let fc_ghz = fc_hz / 1e9;
    Ok(match model {
        PathLossModel::UmaNlos => {
            13.54 + 39.08 * distance_m.log10() + 20.0 * fc_ghz.log10() - 0.6 * (UT_HEIGHT_M - 1.5)
        }
        // 20 log10(4 pi d f / c) with d in m and f in GHz
        PathLossModel::FreeSpace => 32.45 + 20.0 * fc_ghz.log10() + 20.0 * (distance_m / 1e3).log10() + 60.0,
    })
}

/// Thermal noise floor in dBm over `bandwidth_hz` with receiver noise figure.
pub fn noise_floor_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

/// Static link-budget inputs for one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudgetParams {
    pub fc_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub noise_figure_db: f64,
    pub shadowing_sigma_db: f64,
    pub pathloss_model: PathLossModel,
}

impl Default for LinkBudgetParams {
    fn default() -> Self {
        Self {
            fc_hz: 900e6,
            bandwidth_hz: 1.4e6,
            tx_power_dbm: 23.0,
            tx_gain_dbi: 0.0,
            rx_gain_dbi: 0.0,
            noise_figure_db: 9.0,
            shadowing_sigma_db: UMA_NLOS_SHADOWING_DB,
            pathloss_model: PathLossModel::UmaNlos,
        }
    }
}

impl LinkBudgetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.fc_hz > 0.0) {
            return Err(Error::config("channel.fc_hz", "must be > 0"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::config("channel.bandwidth_hz", "must be > 0"));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::config("channel.shadowing_sigma_db", "must be >= 0"));
        }
        Ok(())
    }

    pub fn noise_floor_dbm(&self) -> f64 {
        noise_floor_dbm(self.bandwidth_hz, self.noise_figure_db)
    }

    /// Received power in dBm at the given distance, before shadowing and fading.
    pub fn rx_power_dbm(&self, distance_m: f64) -> Result<f64> {
        let pl = path_loss_db(distance_m, self.fc_hz, self.pathloss_model)?;
        Ok(self.tx_power_dbm + self.tx_gain_dbi + self.rx_gain_dbi - pl)
    }
}

/// Mean SNR (dB) at `distance_m`; shadowing and fading are sampled separately.
pub fn mean_snr_db(params: &LinkBudgetParams, distance_m: f64) -> Result<f64> {
    Ok(params.rx_power_dbm(distance_m)? - params.noise_floor_dbm())
}

/// Zero-mean Gaussian shadowing sample in dB.
pub fn sample_shadowing<R: Rng + ?Sized>(rng: &mut R, sigma_db: f64) -> f64 {
    if sigma_db == 0.0 {
        return 0.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    sigma_db * z
}

/// Unit-power circularly symmetric complex Gaussian sample.
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rayleigh fading gains, stored row-major as `n_rx` rows by `n_tx` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingMatrix {
    pub n_rx: usize,
    pub n_tx: usize,
    pub coeffs: Vec<Complex64>,
}

impl FadingMatrix {
    pub fn get(&self, rx: usize, tx: usize) -> Complex64 {
        self.coeffs[rx * self.n_tx + tx]
    }

    pub fn identity(n: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            coeffs[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self {
            n_rx: n,
            n_tx: n,
            coeffs,
        }
    }

    /// Sum of squared magnitudes over all antenna pairs.
    pub fn frobenius_sq(&self) -> f64 {
        self.coeffs.iter().map(Complex64::norm_sqr).sum()
    }
}

/// Draws i.i.d. unit-power Rayleigh gains for `n_tx` transmit and `n_rx` receive antennas.
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R, n_tx: usize, n_rx: usize) -> Result<FadingMatrix> {
    if !(1..=2).contains(&n_tx) || !(1..=2).contains(&n_rx) {
        return Err(Error::Contract(format!(
            "unsupported antenna configuration {n_tx}x{n_rx}; only 1 or 2 per side"
        )));
    }
    let coeffs = (0..n_tx * n_rx).map(|_| sample_cn(rng)).collect();
    Ok(FadingMatrix { n_rx, n_tx, coeffs })
}

/// One drawn channel state for a transmission attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub pathloss_db: f64,
    pub shadowing_db: f64,
    /// One fading matrix per independent fading block of the codeword.
    pub fading_blocks: Vec<FadingMatrix>,
    pub mean_snr_db: f64,
    /// Per-block SNR after shadowing and fading, per unit transmit power.
    pub instantaneous_snr_linear: Vec<f64>,
}

impl ChannelRealization {
    pub fn draw<R: Rng + ?Sized>(
        rng: &mut R,
        params: &LinkBudgetParams,
        distance_m: f64,
        shadowing_db: f64,
        n_tx: usize,
        n_rx: usize,
        blocks: usize,
    ) -> Result<Self> {
        let pathloss_db = path_loss_db(distance_m, params.fc_hz, params.pathloss_model)?;
        let mean = mean_snr_db(params, distance_m)?;
        let scale = db_to_linear(mean + shadowing_db);
        let mut fading_blocks = Vec::with_capacity(blocks);
        let mut inst = Vec::with_capacity(blocks);
        for _ in 0..blocks {
            let h = sample_fading(rng, n_tx, n_rx)?;
            inst.push(scale * h.frobenius_sq() / n_tx as f64);
            fading_blocks.push(h);
        }
        Ok(Self {
            pathloss_db,
            shadowing_db,
            fading_blocks,
            mean_snr_db: mean,
            instantaneous_snr_linear: inst,
        })
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Average bit error probability of coherent QPSK (or BPSK per bit) over
/// Rayleigh fading at mean per-bit SNR `gamma_bar` (linear).
pub fn rayleigh_bpsk_ber(gamma_bar: f64) -> f64 {
    0.5 * (1.0 - (gamma_bar / (1.0 + gamma_bar)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{ks_test, split_stream};

    fn uma(d: f64, f: f64) -> f64 {
        path_loss_db(d, f, PathLossModel::UmaNlos).unwrap()
    }

    #[test]
    fn uma_reference_points() {
        // 13.54 + 39.08 * 2.698970004 + 20 * (-0.0457574906) = 118.1006
        assert!((uma(500.0, 900e6) - 118.100_58).abs() < 1e-3);
        // 13.54 + 78.16 + 20 * 0.770852012 = 107.1170
        assert!((uma(100.0, 5.9e9) - 107.117_04).abs() < 1e-3);
    }

    #[test]
    fn path_loss_is_monotone() {
        for f in [0.45e9, 0.9e9, 1.9e9, 2.1e9, 5.9e9] {
            assert!(uma(1000.0, f) > uma(500.0, f));
        }
        assert!(uma(500.0, 2.1e9) > uma(500.0, 1.9e9));
    }

    #[test]
    fn below_floor_names_the_floor() {
        match path_loss_db(5.0, 900e6, PathLossModel::UmaNlos) {
            Err(Error::BelowValidityFloor { floor_m, .. }) => assert_eq!(floor_m, 10.0),
            other => panic!("{other:?}"),
        }
        assert!(path_loss_db(100.0, 0.3e9, PathLossModel::UmaNlos).is_err());
    }

    #[test]
    fn free_space_reference() {
        // 1 km at 1 GHz: 92.45 dB
        let pl = path_loss_db(1000.0, 1e9, PathLossModel::FreeSpace).unwrap();
        assert!((pl - 92.45).abs() < 1e-9);
    }

    #[test]
    fn noise_floor_values() {
        assert!((noise_floor_dbm(1.4e6, 9.0) - (-103.53)).abs() < 0.01);
        assert_eq!(noise_floor_dbm(1.0, 0.0), -174.0);
        let d = noise_floor_dbm(2e6, 9.0) - noise_floor_dbm(1e6, 9.0);
        assert!((d - 3.0103).abs() < 1e-4);
    }

    #[test]
    fn mean_snr_budget() {
        let p = LinkBudgetParams {
            fc_hz: 900e6,
            bandwidth_hz: 1.4e6,
            tx_power_dbm: 23.0,
            ..Default::default()
        };
        // 23 - 118.10 + 103.54
        let snr = mean_snr_db(&p, 500.0).unwrap();
        assert!((snr - 8.44).abs() < 0.01, "{snr}");
        let p7 = LinkBudgetParams {
            tx_power_dbm: 30.0,
            ..p
        };
        assert!((mean_snr_db(&p7, 500.0).unwrap() - snr - 7.0).abs() < 1e-12);
    }

    #[test]
    fn shadowing_moments_and_determinism() {
        let mut rng = split_stream(11, 0);
        assert_eq!(sample_shadowing(&mut rng, 0.0), 0.0);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_shadowing(&mut rng, 7.8)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((sd - 7.8).abs() < 0.05, "{sd}");
        assert!(mean.abs() < 0.05);
        let mut a = split_stream(5, 1);
        let mut b = split_stream(5, 1);
        for _ in 0..100 {
            assert_eq!(sample_shadowing(&mut a, 7.8), sample_shadowing(&mut b, 7.8));
        }
    }

    #[test]
    fn fading_power_and_envelope() {
        let mut rng = split_stream(12, 0);
        let n = 1_000_000;
        let mut power = 0.0;
        let mut env = Vec::with_capacity(20_000);
        for i in 0..n {
            let h = sample_fading(&mut rng, 1, 1).unwrap();
            assert_eq!(h.coeffs.len(), 1);
            power += h.frobenius_sq();
            if i < 20_000 {
                env.push(h.coeffs[0].norm());
            }
        }
        assert!((power / n as f64 - 1.0).abs() < 0.005);
        // Rayleigh with sigma^2 = 1/2: F(r) = 1 - exp(-r^2)
        let (_, p) = ks_test(&env, |r| 1.0 - (-r * r).exp());
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn unsupported_antennas() {
        let mut rng = split_stream(1, 1);
        assert!(sample_fading(&mut rng, 3, 1).is_err());
        assert!(sample_fading(&mut rng, 0, 1).is_err());
        let h = sample_fading(&mut rng, 2, 2).unwrap();
        assert_eq!((h.n_rx, h.n_tx, h.coeffs.len()), (2, 2, 4));
    }
}
