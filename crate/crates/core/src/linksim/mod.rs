//! Link-level Monte Carlo engine.
//!
//! A packet is one codeword of `packet_info_bits` information bits. Each
//! attempt redraws small-scale fading; large-scale shadowing follows the
//! configured [`ShadowingMode`]. Retransmission is plain ARQ: every attempt is
//! decoded on its own and the packet succeeds once an attempt decodes with
//! zero information-bit errors (genie comparison, no CRC).
//!
//! Two estimators produce the same curve columns:
//!
//! * `direct` runs every attempt through the full chain and counts errors.
//! * `conditional` measures the chain once on AWGN (see [`estimator`]) and
//!   averages the measured block-failure and bit-error curves over sampled
//!   channel states. It reaches error rates far below what direct counting
//!   can resolve in reasonable time.
//!
//! Work is split into fixed-size units of trials, each with its own random
//! stream, and merged in unit order, so a sweep is bit-for-bit identical for
//! any number of worker threads.

pub mod chain;
pub mod estimator;
pub mod latency;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{db_to_linear, mean_snr_db, sample_fading, sample_shadowing, LinkBudgetParams};
use crate::coding::{Codec, CodecSpec};
use crate::error::{Error, Result};
use crate::modem::ModulationSpec;
use crate::montecarlo::{split_stream, unit_index, wilson_interval, z_for_confidence};
use crate::techprofiles::{TechnologyId, TechnologyProfile};
use chain::{AttemptChannel, Chain};
use estimator::{effective_snr_db, AwgnTable, TableParams};
use latency::LatencyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum AntennaScheme {
    #[default]
    #[serde(rename = "siso")]
    Siso,
    #[serde(rename = "alamouti2x2")]
    Alamouti2x2,
}

impl AntennaScheme {
    /// (transmit, receive) antenna counts.
    pub fn antennas(self) -> (usize, usize) {
        match self {
            AntennaScheme::Siso => (1, 1),
            AntennaScheme::Alamouti2x2 => (2, 2),
        }
    }
}

/// How often log-normal shadowing is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShadowingMode {
    /// Once per packet, shared by all of its attempts.
    #[default]
    PerPacket,
    /// Independently for every attempt.
    PerAttempt,
    /// Held at the `shadowing_percentile` quantile of its distribution; the
    /// 0.5 quantile is the median (no shadowing).
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    pub shadowing: ShadowingMode,
    /// Quantile used by [`ShadowingMode::Fixed`], in (0, 1).
    pub shadowing_percentile: f64,
    /// Independent Rayleigh blocks per codeword; symbols are interleaved
    /// across blocks round-robin.
    pub fading_blocks: usize,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            shadowing: ShadowingMode::PerPacket,
            shadowing_percentile: 0.5,
            fading_blocks: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    Direct,
    Conditional,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Direct => "direct",
            EstimatorKind::Conditional => "conditional",
        }
    }
}

/// Trial-count controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRule {
    /// Direct estimator: stop a distance early once this many residual bit
    /// errors are seen (0 disables early stopping).
    pub max_bit_errors: u64,
    /// Trials per work unit. Part of the random-stream layout, so changing it
    /// changes results.
    pub unit_trials: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_bit_errors: 0,
            unit_trials: 64,
        }
    }
}

/// Bit errors below which a point is flagged as low confidence.
pub const MIN_CONFIDENT_BIT_ERRORS: u64 = 100;

/// Carrier used when a scenario does not override it.
pub fn default_carrier_hz(id: TechnologyId) -> f64 {
    match id {
        TechnologyId::GsmR => 900e6,
        TechnologyId::Tetra => 400e6,
        TechnologyId::Dmr => 450e6,
        TechnologyId::LteV2x | TechnologyId::NrV2x => 5.9e9,
    }
}

/// Channel bandwidth used when a scenario does not override it.
pub fn default_bandwidth_hz(profile: &TechnologyProfile) -> f64 {
    match profile.id {
        TechnologyId::LteV2x | TechnologyId::NrV2x => 10e6,
        _ => profile.channel_bandwidth_hz_options[0],
    }
}

/// Everything a sweep needs, fully resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkScenario {
    pub technology: TechnologyId,
    /// When false the codec is bypassed and info bits are sent raw.
    pub coding_enabled: bool,
    pub codec: CodecSpec,
    pub modulation: ModulationSpec,
    pub link: LinkBudgetParams,
    pub antenna_scheme: AntennaScheme,
    pub max_retransmissions: u32,
    pub packet_info_bits: usize,
    pub distances_m: Vec<f64>,
    pub trials_per_distance: u64,
    pub stop: StopRule,
    pub channel: ChannelModel,
    pub estimator: EstimatorKind,
    pub table: TableParams,
    pub latency: LatencyParams,
    pub seed: u64,
}

impl LinkScenario {
    /// Standard parameters of a technology: its coding and first modulation,
    /// default power and carrier, SISO, three retransmissions.
    pub fn for_technology(profile: &TechnologyProfile) -> Self {
        let packet_info_bits = 1000;
        Self {
            technology: profile.id,
            coding_enabled: true,
            codec: CodecSpec::new(profile.coding_scheme, packet_info_bits),
            modulation: ModulationSpec::new(profile.data_modulation()),
            link: LinkBudgetParams {
                fc_hz: default_carrier_hz(profile.id),
                bandwidth_hz: default_bandwidth_hz(profile),
                tx_power_dbm: profile.tx_power_dbm_default,
                ..LinkBudgetParams::default()
            },
            antenna_scheme: AntennaScheme::Siso,
            max_retransmissions: 3,
            packet_info_bits,
            distances_m: vec![100.0, 200.0, 500.0, 1000.0],
            trials_per_distance: 1000,
            stop: StopRule::default(),
            channel: ChannelModel::default(),
            estimator: EstimatorKind::Direct,
            table: TableParams::default(),
            latency: LatencyParams::from_profile(profile),
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        self.modulation.validate()?;
        self.latency.validate()?;
        if self.packet_info_bits == 0 {
            return Err(Error::config("packet_info_bits", "must be > 0"));
        }
        if self.coding_enabled && self.codec.info_block_bits != self.packet_info_bits {
            return Err(Error::config(
                "codec.info_block_bits",
                format!("must equal packet_info_bits ({})", self.packet_info_bits),
            ));
        }
        if self.distances_m.is_empty() {
            return Err(Error::config("distances_m", "must not be empty"));
        }
        if self.distances_m.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("distances_m", "must be strictly ascending"));
        }
        if self.trials_per_distance < 1 {
            return Err(Error::config("trials_per_distance", "must be >= 1"));
        }
        if self.stop.unit_trials < 1 {
            return Err(Error::config("stop.unit_trials", "must be >= 1"));
        }
        if !(self.channel.shadowing_percentile > 0.0 && self.channel.shadowing_percentile < 1.0) {
            return Err(Error::config("channel.shadowing_percentile", "must lie in (0, 1)"));
        }
        if self.channel.fading_blocks < 1 {
            return Err(Error::config("channel.fading_blocks", "must be >= 1"));
        }
        let t = &self.table;
        if !(t.step_db > 0.0) || !(t.snr_lo_db < t.snr_hi_db) || t.block_errors < 1 || t.max_trials < 1 {
            return Err(Error::config("table", "need step_db > 0, snr_lo_db < snr_hi_db and positive effort limits"));
        }
        Ok(())
    }

    pub fn attempts_cap(&self) -> usize {
        1 + self.max_retransmissions as usize
    }

    /// The modem + codec pipeline of this scenario.
    pub fn chain(&self) -> Result<Chain> {
        self.chain_for(self.antenna_scheme)
    }

    fn chain_for(&self, antenna: AntennaScheme) -> Result<Chain> {
        let codec = if self.coding_enabled {
            Some(Codec::new(&self.codec)?)
        } else {
            None
        };
        Chain::new(codec, self.modulation, antenna, self.packet_info_bits)
    }

    /// Short SHA-256 digest of the canonical serialized scenario.
    pub fn config_hash(&self) -> String {
        let text = toml::to_string(self).expect("scenario serializes");
        hash_text(&text)
    }
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn hash_text(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Result of one packet (up to `1 + max_retransmissions` attempts).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub attempts_used: u32,
    pub success: bool,
    pub bit_errors_first_attempt: u64,
    /// Info-bit errors of each attempt that was made.
    pub attempt_bit_errors: Vec<u64>,
}

/// Large-scale state fixed for a packet.
fn packet_shadowing<R: Rng + ?Sized>(rng: &mut R, scenario: &LinkScenario) -> f64 {
    match scenario.channel.shadowing {
        ShadowingMode::PerPacket => sample_shadowing(rng, scenario.link.shadowing_sigma_db),
        ShadowingMode::PerAttempt => 0.0,
        ShadowingMode::Fixed => {
            let q = scenario.channel.shadowing_percentile;
            scenario.link.shadowing_sigma_db * normal_quantile(q)
        }
    }
}

fn normal_quantile(q: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    if q == 0.5 {
        return 0.0;
    }
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(q)
}

/// Draws one attempt's channel and the post-combining SNR of every block.
fn draw_attempt<R: Rng + ?Sized>(
    rng: &mut R,
    scenario: &LinkScenario,
    mean_db: f64,
    packet_shadow_db: f64,
) -> Result<(AttemptChannel, Vec<f64>)> {
    let shadow = match scenario.channel.shadowing {
        ShadowingMode::PerAttempt => sample_shadowing(rng, scenario.link.shadowing_sigma_db),
        _ => packet_shadow_db,
    };
    let power = db_to_linear(mean_db + shadow);
    let amplitude = power.sqrt();
    let (n_tx, n_rx) = scenario.antenna_scheme.antennas();
    let l = scenario.channel.fading_blocks;
    let mut snr = Vec::with_capacity(l);
    let channel = match scenario.antenna_scheme {
        AntennaScheme::Siso => {
            let mut gains = Vec::with_capacity(l);
            for _ in 0..l {
                let h = sample_fading(rng, n_tx, n_rx)?.get(0, 0);
                snr.push(power * h.norm_sqr());
                gains.push(h * amplitude);
            }
            AttemptChannel::Siso(gains)
        }
        AntennaScheme::Alamouti2x2 => {
            let mut blocks = Vec::with_capacity(l);
            for _ in 0..l {
                let h = sample_fading(rng, n_tx, n_rx)?;
                snr.push(power * h.frobenius_sq() / 2.0);
                blocks.push(h);
            }
            AttemptChannel::Alamouti { blocks, amplitude }
        }
    };
    Ok((channel, snr))
}

/// Sends one packet with ARQ. The same codeword is repeated on every attempt.
pub fn run_packet_trial<R: Rng + ?Sized>(
    scenario: &LinkScenario,
    chain: &Chain,
    distance_m: f64,
    rng: &mut R,
) -> Result<TrialRecord> {
    let mean_db = mean_snr_db(&scenario.link, distance_m)?;
    let shadow = packet_shadowing(rng, scenario);
    let (info, symbols) = chain.prepare(rng)?;
    let mut errors = Vec::with_capacity(scenario.attempts_cap());
    for _ in 0..scenario.attempts_cap() {
        let (channel, _) = draw_attempt(rng, scenario, mean_db, shadow)?;
        let out = chain.attempt(rng, &info, &symbols, &channel)?;
        errors.push(out.bit_errors);
        if out.success() {
            break;
        }
    }
    Ok(TrialRecord {
        attempts_used: errors.len() as u32,
        success: *errors.last().expect("at least one attempt") == 0,
        bit_errors_first_attempt: errors[0],
        attempt_bit_errors: errors,
    })
}

/// One distance of a [`LinkCurve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub distance_m: f64,
    pub mean_snr_db: f64,
    /// Residual info-bit error rate after all allowed attempts.
    pub ber: f64,
    pub ber_ci_low: f64,
    pub ber_ci_high: f64,
    /// First-attempt block error rate.
    pub bler: f64,
    /// Packet success probability after all allowed attempts.
    pub reliability_retx: f64,
    /// Latency at the expected number of attempts.
    pub latency_ms: f64,
    pub expected_attempts: f64,
    pub trials: u64,
    /// Counted errors (direct) or the expected count (conditional).
    pub bit_errors: u64,
    pub low_confidence: bool,
    pub estimator: EstimatorKind,
    /// Residual BER and reliability when at most `n` attempts are allowed,
    /// for `n = 1 ..= 1 + max_retransmissions`.
    pub ber_by_attempts: Vec<f64>,
    pub reliability_by_attempts: Vec<f64>,
}

/// Output of [`sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkCurve {
    pub scenario: LinkScenario,
    /// Bits on the air per attempt, used by the latency model.
    pub transmitted_bits: usize,
    /// Channel bit rate used by the latency model.
    pub rate_bps: f64,
    pub points: Vec<CurvePoint>,
}

pub const CSV_COLUMNS: [&str; 15] = [
    "distance_m",
    "ber",
    "ber_ci_low",
    "ber_ci_high",
    "bler",
    "reliability_retx",
    "latency_ms",
    "trials",
    "bit_errors",
    "mean_snr_db",
    "expected_attempts",
    "low_confidence",
    "estimator",
    "config_hash",
    "seed",
];

impl LinkCurve {
    /// CSV with a header row; `config_hash` identifies the resolved config.
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS).expect("in-memory write");
        for p in &self.points {
            w.write_record([
                fmt_f64(p.distance_m),
                fmt_f64(p.ber),
                fmt_f64(p.ber_ci_low),
                fmt_f64(p.ber_ci_high),
                fmt_f64(p.bler),
                fmt_f64(p.reliability_retx),
                fmt_f64(p.latency_ms),
                p.trials.to_string(),
                p.bit_errors.to_string(),
                fmt_f64(p.mean_snr_db),
                fmt_f64(p.expected_attempts),
                p.low_confidence.to_string(),
                p.estimator.as_str().to_string(),
                config_hash.to_string(),
                self.scenario.seed.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Shortest round-trip decimal form, so equal floats print identically.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, Default)]
struct DirectTally {
    trials: u64,
    first_failures: u64,
    attempts: u64,
    /// Per cap n: packets delivered correctly within n attempts.
    successes: Vec<u64>,
    /// Per cap n: residual bit errors.
    bit_errors: Vec<u64>,
    /// Sum of squared per-packet residual errors at the full cap.
    sq_errors: u128,
}

impl DirectTally {
    fn new(cap: usize) -> Self {
        Self {
            successes: vec![0; cap],
            bit_errors: vec![0; cap],
            ..Self::default()
        }
    }

    fn record(&mut self, t: &TrialRecord) {
        let cap = self.successes.len();
        self.trials += 1;
        self.attempts += t.attempts_used as u64;
        if t.bit_errors_first_attempt > 0 {
            self.first_failures += 1;
        }
        for n in 0..cap {
            // with cap n+1 the delivered block is the first success, or attempt n+1
            if let Some(&e) = t.attempt_bit_errors.get(n) {
                self.bit_errors[n] += e;
            }
            if t.success && t.attempts_used as usize <= n + 1 {
                self.successes[n] += 1;
            }
        }
        let last = if t.success { 0 } else { *t.attempt_bit_errors.last().unwrap_or(&0) };
        self.sq_errors += (last as u128) * (last as u128);
    }

    fn merge(&mut self, o: &DirectTally) {
        self.trials += o.trials;
        self.first_failures += o.first_failures;
        self.attempts += o.attempts;
        self.sq_errors += o.sq_errors;
        for (a, b) in self.successes.iter_mut().zip(&o.successes) {
            *a += b;
        }
        for (a, b) in self.bit_errors.iter_mut().zip(&o.bit_errors) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, Default)]
struct ConditionalTally {
    trials: u64,
    first_fail: f64,
    attempts: f64,
    ber: Vec<f64>,
    fail: Vec<f64>,
    ber_sq: f64,
}

impl ConditionalTally {
    fn new(cap: usize) -> Self {
        Self {
            ber: vec![0.0; cap],
            fail: vec![0.0; cap],
            ..Self::default()
        }
    }

    fn merge(&mut self, o: &ConditionalTally) {
        self.trials += o.trials;
        self.first_fail += o.first_fail;
        self.attempts += o.attempts;
        self.ber_sq += o.ber_sq;
        for (a, b) in self.ber.iter_mut().zip(&o.ber) {
            *a += b;
        }
        for (a, b) in self.fail.iter_mut().zip(&o.fail) {
            *a += b;
        }
    }
}

/// Number of units evaluated between stop checks.
const ROUND_UNITS: u64 = 16;

fn unit_sizes(total: u64, unit: u64) -> impl Iterator<Item = (u64, u64)> {
    let n = total.div_ceil(unit);
    (0..n).map(move |i| (i, unit.min(total - i * unit)))
}

fn run_direct(scenario: &LinkScenario, chain: &Chain, di: u64, distance_m: f64) -> Result<DirectTally> {
    let cap = scenario.attempts_cap();
    let units: Vec<(u64, u64)> = unit_sizes(scenario.trials_per_distance, scenario.stop.unit_trials).collect();
    let mut total = DirectTally::new(cap);
    for round in units.chunks(ROUND_UNITS as usize) {
        let parts: Vec<Result<DirectTally>> = round
            .par_iter()
            .map(|&(u, n)| {
                let mut rng = split_stream(scenario.seed, unit_index(di, u));
                let mut t = DirectTally::new(cap);
                for _ in 0..n {
                    t.record(&run_packet_trial(scenario, chain, distance_m, &mut rng)?);
                }
                Ok(t)
            })
            .collect();
        for p in parts {
            total.merge(&p?);
        }
        let max = scenario.stop.max_bit_errors;
        if max > 0 && total.bit_errors[cap - 1] >= max {
            break;
        }
    }
    Ok(total)
}

fn run_conditional(scenario: &LinkScenario, table: &AwgnTable, di: u64, distance_m: f64) -> Result<ConditionalTally> {
    let cap = scenario.attempts_cap();
    let mean_db = mean_snr_db(&scenario.link, distance_m)?;
    let scheme = scenario.modulation.scheme;
    let parts: Vec<Result<ConditionalTally>> = unit_sizes(scenario.trials_per_distance, scenario.stop.unit_trials)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(u, n)| {
            let mut rng = split_stream(scenario.seed, unit_index(di, u));
            let mut t = ConditionalTally::new(cap);
            for _ in 0..n {
                let shadow = packet_shadowing(&mut rng, scenario);
                let mut prod = 1.0;
                let mut residual = 0.0;
                for a in 0..cap {
                    let (_, snr) = draw_attempt(&mut rng, scenario, mean_db, shadow)?;
                    let eff = effective_snr_db(scheme, &snr);
                    let (p, b) = (table.p_fail_at(eff), table.ber_at(eff));
                    if a == 0 {
                        t.first_fail += p;
                    }
                    t.attempts += prod;
                    residual = prod * b;
                    t.ber[a] += residual;
                    prod *= p;
                    t.fail[a] += prod;
                }
                t.ber_sq += residual * residual;
                t.trials += 1;
            }
            Ok(t)
        })
        .collect();
    let mut total = ConditionalTally::new(cap);
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}

fn mean_ci(sum: f64, sum_sq: f64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let mean = sum / n;
    let var = if n > 1.0 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    let half = z * (var / n).sqrt();
    ((mean - half).max(0.0), (mean + half).min(1.0))
}

/// AWGN reference of a chain; measured once per process and chain.
pub fn awgn_table(scenario: &LinkScenario) -> Result<Arc<AwgnTable>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<AwgnTable>>>> = OnceLock::new();
    #[derive(Serialize)]
    struct Key<'a> {
        coding_enabled: bool,
        codec: &'a CodecSpec,
        modulation: &'a ModulationSpec,
        packet_info_bits: usize,
        table: &'a TableParams,
        unit_trials: u64,
        seed: u64,
    }
    let key = toml::to_string(&Key {
        coding_enabled: scenario.coding_enabled,
        codec: &scenario.codec,
        modulation: &scenario.modulation,
        packet_info_bits: scenario.packet_info_bits,
        table: &scenario.table,
        unit_trials: scenario.stop.unit_trials,
        seed: scenario.seed,
    })
    .expect("key serializes");
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cache lock").get(&key) {
        return Ok(Arc::clone(t));
    }
    // Alamouti reduces to an AWGN link at the combined SNR, so the SISO
    // chain is the reference for both antenna schemes.
    let chain = scenario.chain_for(AntennaScheme::Siso)?;
    let table = Arc::new(measure_awgn_table(&chain, &scenario.table, scenario.seed ^ TABLE_SALT)?);
    cache.lock().expect("cache lock").insert(key, Arc::clone(&table));
    Ok(table)
}

const TABLE_SALT: u64 = 0x7ab1_e5a1_7000_0001;
/// Trials per work unit while measuring a table.
const TABLE_UNIT: u64 = 32;

/// Scans the SNR grid upward until a point shows no block failure within
/// the trial cap. A point whose first unit fails completely is taken as
/// saturated (failure probability 1) without further trials.
pub fn measure_awgn_table(chain: &Chain, params: &TableParams, seed: u64) -> Result<AwgnTable> {
    let (mut snrs, mut blocks, mut bits, mut trials) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let n_points = ((params.snr_hi_db - params.snr_lo_db) / params.step_db).round() as u64 + 1;
    for gi in 0..n_points {
        let snr_db = params.snr_lo_db + gi as f64 * params.step_db;
        let gain = Complex64::new(db_to_linear(snr_db).sqrt(), 0.0);
        let channel = AttemptChannel::Siso(vec![gain]);
        let (mut n, mut be, mut bb) = (0u64, 0u64, 0u64);
        let mut next_unit = 0u64;
        let mut round = 1u64;
        loop {
            let units: Vec<u64> = (next_unit..next_unit + round).collect();
            next_unit += round;
            let parts: Vec<Result<(u64, u64, u64)>> = units
                .par_iter()
                .map(|&u| {
                    let mut rng = split_stream(seed, unit_index(gi, u));
                    let (mut t, mut e, mut b) = (0, 0, 0);
                    for _ in 0..TABLE_UNIT {
                        let (info, syms) = chain.prepare(&mut rng)?;
                        let out = chain.attempt(&mut rng, &info, &syms, &channel)?;
                        t += 1;
                        e += u64::from(!out.success());
                        b += out.bit_errors;
                    }
                    Ok((t, e, b))
                })
                .collect();
            for p in parts {
                let (t, e, b) = p?;
                n += t;
                be += e;
                bb += b;
            }
            let saturated = next_unit == 1 && be == n;
            if saturated || be >= params.block_errors || n >= params.max_trials {
                break;
            }
            round = (round * 2).min(ROUND_UNITS);
        }
        snrs.push(snr_db);
        blocks.push(be);
        bits.push(bb);
        trials.push(n);
        if be == 0 {
            break;
        }
    }
    Ok(AwgnTable::from_counts(snrs, &blocks, &bits, trials, chain.info_bits()))
}

/// Runs every distance of the scenario on the current rayon pool.
pub fn sweep(scenario: &LinkScenario) -> Result<LinkCurve> {
    scenario.validate()?;
    let cap = scenario.attempts_cap();
    let chain = scenario.chain()?;
    let table = match scenario.estimator {
        EstimatorKind::Conditional => Some(awgn_table(scenario)?),
        EstimatorKind::Direct => None,
    };
    let rate = scenario
        .latency
        .scenario_rate_bps(scenario.modulation.bits_per_symbol(), scenario.link.bandwidth_hz);
    let k = scenario.packet_info_bits as u64;
    let z = z_for_confidence(0.95);
    let mut points = Vec::with_capacity(scenario.distances_m.len());
    for (di, &d) in scenario.distances_m.iter().enumerate() {
        let mean_db = mean_snr_db(&scenario.link, d)?;
        let point = match &table {
            None => {
                let t = run_direct(scenario, &chain, di as u64, d)?;
                let n = t.trials as f64;
                let exposure = t.trials * k;
                let errs = t.bit_errors[cap - 1];
                let ber = errs as f64 / exposure as f64;
                let (lo, hi) = if errs == 0 {
                    wilson_interval(0, exposure, 0.95)
                } else {
                    let kf = k as f64;
                    mean_ci(errs as f64 / kf, t.sq_errors as f64 / (kf * kf), t.trials, z)
                };
                let expected_attempts = t.attempts as f64 / n;
                CurvePoint {
                    distance_m: d,
                    mean_snr_db: mean_db,
                    ber,
                    ber_ci_low: lo.min(ber),
                    ber_ci_high: hi.max(ber),
                    bler: t.first_failures as f64 / n,
                    reliability_retx: t.successes[cap - 1] as f64 / n,
                    latency_ms: scenario.latency.latency_ms(chain.transmitted_bits(), expected_attempts, rate)?,
                    expected_attempts,
                    trials: t.trials,
                    bit_errors: errs,
                    low_confidence: errs < MIN_CONFIDENT_BIT_ERRORS,
                    estimator: EstimatorKind::Direct,
                    ber_by_attempts: t.bit_errors.iter().map(|&e| e as f64 / exposure as f64).collect(),
                    reliability_by_attempts: t.successes.iter().map(|&s| s as f64 / n).collect(),
                }
            }
            Some(table) => {
                let t = run_conditional(scenario, table, di as u64, d)?;
                let n = t.trials as f64;
                let ber = t.ber[cap - 1] / n;
                let (lo, hi) = mean_ci(t.ber[cap - 1], t.ber_sq, t.trials, z);
                let expected_errors = (ber * n * k as f64).round() as u64;
                let expected_attempts = t.attempts / n;
                CurvePoint {
                    distance_m: d,
                    mean_snr_db: mean_db,
                    ber,
                    ber_ci_low: lo.min(ber),
                    ber_ci_high: hi.max(ber),
                    bler: t.first_fail / n,
                    reliability_retx: 1.0 - t.fail[cap - 1] / n,
                    latency_ms: scenario.latency.latency_ms(chain.transmitted_bits(), expected_attempts, rate)?,
                    expected_attempts,
                    trials: t.trials,
                    bit_errors: expected_errors,
                    low_confidence: expected_errors < MIN_CONFIDENT_BIT_ERRORS,
                    estimator: EstimatorKind::Conditional,
                    ber_by_attempts: t.ber.iter().map(|&b| b / n).collect(),
                    reliability_by_attempts: t.fail.iter().map(|&f| 1.0 - f / n).collect(),
                }
            }
        };
        points.push(point);
    }
    Ok(LinkCurve {
        scenario: scenario.clone(),
        transmitted_bits: chain.transmitted_bits(),
        rate_bps: rate,
        points,
    })
}

/// Runs [`sweep`] on a dedicated pool of `workers` threads.
pub fn sweep_with_workers(scenario: &LinkScenario, workers: usize) -> Result<LinkCurve> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Contract(format!("cannot start worker pool: {e}")))?;
    pool.install(|| sweep(scenario))
}
