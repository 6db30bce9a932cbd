//! Per-attempt latency model: wait for the transmit opportunity, serialize
//! the coded block, then turn around.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::techprofiles::TechnologyProfile;

/// Latency constants for one scenario; all reported in output metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyParams {
    /// Slot duration used for alignment, ms.
    pub slot_ms: f64,
    /// Mean wait for the granted resource beyond slot alignment, ms.
    pub access_wait_ms: f64,
    /// Receiver processing and turnaround, ms.
    pub processing_ms: f64,
    /// Symbols per second per hertz of channel bandwidth.
    pub spectral_efficiency: f64,
}

impl LatencyParams {
    pub fn from_profile(profile: &TechnologyProfile) -> Self {
        Self {
            slot_ms: profile.latency_slot_ms,
            access_wait_ms: profile.access_wait_ms,
            processing_ms: profile.processing_turnaround_ms,
            spectral_efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("latency.slot_ms", self.slot_ms),
            ("latency.access_wait_ms", self.access_wait_ms),
            ("latency.processing_ms", self.processing_ms),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(name, "must be a finite value >= 0"));
            }
        }
        if !(self.spectral_efficiency > 0.0) {
            return Err(Error::config("latency.spectral_efficiency", "must be > 0"));
        }
        Ok(())
    }

    /// Channel bit rate in bit/s for a modulation carrying `bits_per_symbol`.
    pub fn scenario_rate_bps(&self, bits_per_symbol: usize, bandwidth_hz: f64) -> f64 {
        bits_per_symbol as f64 * bandwidth_hz * self.spectral_efficiency
    }

    /// Latency in ms for `attempts` transmissions of `coded_bits` at `rate_bps`.
    /// `attempts` may be fractional (an expected attempt count).
    pub fn latency_ms(&self, coded_bits: usize, attempts: f64, rate_bps: f64) -> Result<f64> {
        if !(rate_bps > 0.0) {
            return Err(Error::Contract("scenario rate must be > 0".into()));
        }
        if !(attempts >= 1.0) {
            return Err(Error::Contract("attempts must be >= 1".into()));
        }
        let per_attempt = 0.5 * self.slot_ms + self.access_wait_ms + coded_bits as f64 / rate_bps * 1e3 + self.processing_ms;
        Ok(attempts * per_attempt)
    }
}

/// Latency for `attempts` transmissions of a rate-1/3 block of
/// `packet_info_bits` using the profile's default constants.
pub fn latency_estimate(
    profile: &TechnologyProfile,
    packet_info_bits: usize,
    attempts: u32,
    scenario_rate_bps: f64,
) -> Result<f64> {
    LatencyParams::from_profile(profile).latency_ms(3 * packet_info_bits, attempts as f64, scenario_rate_bps)
}
