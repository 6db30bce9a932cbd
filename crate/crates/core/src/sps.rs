//! Sensing-based semi-persistent scheduling on a sidelink resource grid.
//!
//! Each UE reserves one (slot, subchannel) resource and reuses it every
//! packet period. It keeps sensing the grid: received energy per resource is
//! averaged over the last second, and reservations announced by neighbours
//! it could decode are remembered. When its reselection counter runs out it
//! either keeps the resource (probability `P`) or runs a fresh selection:
//! exclude reserved or hot resources, relax the threshold in 3 dB steps until
//! enough survive, keep the coolest 20 % and pick one of them at random.
//!
//! The simulator works at MAC level. Received power comes from the channel
//! module's link budget plus per-pair shadowing and optional per-packet
//! Rayleigh fading; a packet is received when its SINR clears a threshold.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, linear_to_db, noise_floor_dbm, path_loss_db, sample_shadowing, LinkBudgetParams, DISTANCE_FLOOR_M};
use crate::error::{Error, Result};
use crate::linksim::fmt_f64;
use crate::montecarlo::{split_stream, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpsMode {
    /// LTE-V2X sidelink mode 4.
    #[serde(rename = "lte")]
    LteMode4,
    /// NR-V2X sidelink mode 2.
    #[serde(rename = "nr")]
    NrMode2,
}

impl SpsMode {
    /// Upper bound on the selection window, ms.
    pub fn window_cap_ms(self) -> f64 {
        match self {
            SpsMode::LteMode4 => 100.0,
            SpsMode::NrMode2 => 20.0,
        }
    }

    /// Default scheduling granularity, ms.
    pub fn default_slot_ms(self) -> f64 {
        match self {
            SpsMode::LteMode4 => 1.0,
            SpsMode::NrMode2 => 0.5,
        }
    }
}

/// Slots `[start, start + len)` in which the next transmission may go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionWindow {
    pub start_slot: u64,
    pub len_slots: u64,
}

impl SelectionWindow {
    pub fn len_ms(&self, slot_ms: f64) -> f64 {
        self.len_slots as f64 * slot_ms
    }
}

/// Window for a packet generated at `now_slot`: it opens after the
/// processing offset and spans `min(period, cap)`, trimmed so it never
/// reaches past the next packet.
pub fn build_selection_window(
    mode: SpsMode,
    packet_period_ms: f64,
    slot_ms: f64,
    now_slot: u64,
    processing_offset_slots: u64,
) -> Result<SelectionWindow> {
    if !(packet_period_ms > 0.0) || !(slot_ms > 0.0) {
        return Err(Error::Contract("packet period and slot duration must be > 0".into()));
    }
    let period_slots = (packet_period_ms / slot_ms).round() as u64;
    let cap_slots = (mode.window_cap_ms() / slot_ms).round() as u64;
    let len_slots = period_slots.min(cap_slots).min(period_slots.saturating_sub(processing_offset_slots)).max(1);
    Ok(SelectionWindow {
        start_slot: now_slot + processing_offset_slots,
        len_slots,
    })
}

/// What a UE knows about one resource of its selection window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceObservation {
    pub slot: u64,
    pub subchannel: u32,
    /// Average sensed power, dBm; `-inf` when nothing was ever sensed.
    pub rssi_dbm: f64,
    /// Received power of a decoded neighbour reservation covering this resource.
    pub reserved_rsrp_dbm: Option<f64>,
}

impl ResourceObservation {
    fn excluded_at(&self, threshold_dbm: f64) -> bool {
        self.rssi_dbm > threshold_dbm || self.reserved_rsrp_dbm.is_some_and(|p| p > threshold_dbm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSelection {
    /// Indices into the observation list, coolest first.
    pub candidates: Vec<usize>,
    pub final_threshold_dbm: f64,
    pub escalations: u32,
}

/// Number of candidates kept from a window of `n` resources.
pub fn candidate_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1))
}

/// Exclusion with threshold escalation, then the least-RSSI subset.
///
/// `tie_rank` orders resources of equal RSSI (a per-selection shuffle);
/// remaining ties fall back to the observation index.
pub fn select_candidates(
    obs: &[ResourceObservation],
    threshold_dbm: f64,
    step_db: f64,
    fraction: f64,
    tie_rank: &[u64],
) -> Result<CandidateSelection> {
    if obs.is_empty() {
        return Err(Error::Contract("selection window holds no resources".into()));
    }
    if tie_rank.len() != obs.len() {
        return Err(Error::LengthMismatch {
            expected: obs.len(),
            actual: tie_rank.len(),
        });
    }
    if !(step_db > 0.0) {
        return Err(Error::Contract("threshold step must be > 0".into()));
    }
    let need = candidate_count(obs.len(), fraction);
    let mut threshold = threshold_dbm;
    let mut escalations = 0;
    // Every finite metric is cleared after finitely many steps, so the loop ends.
    let ceiling = obs
        .iter()
        .flat_map(|o| [o.rssi_dbm, o.reserved_rsrp_dbm.unwrap_or(f64::NEG_INFINITY)])
        .fold(f64::NEG_INFINITY, f64::max);
    let survivors = loop {
        let s: Vec<usize> = (0..obs.len()).filter(|&i| !obs[i].excluded_at(threshold)).collect();
        if s.len() >= need || threshold >= ceiling {
            break s;
        }
        threshold += step_db;
        escalations += 1;
    };
    let mut ranked = survivors;
    ranked.sort_by(|&a, &b| {
        obs[a]
            .rssi_dbm
            .total_cmp(&obs[b].rssi_dbm)
            .then(tie_rank[a].cmp(&tie_rank[b]))
            .then(a.cmp(&b))
    });
    ranked.truncate(need);
    Ok(CandidateSelection {
        candidates: ranked,
        final_threshold_dbm: threshold,
        escalations,
    })
}

/// Outcome of the reselection counter after one transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrcOutcome {
    Continue,
    Keep,
    Reselect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    /// Absolute slot of the next transmission.
    pub next_slot: u64,
    pub subchannel: u32,
}

/// Per-UE scheduling state.
#[derive(Debug, Clone)]
pub struct UeState {
    pub id: usize,
    pub position_m: f64,
    pub period_slots: u64,
    pub reservation: Option<Reservation>,
    pub rrc: u32,
    pub keep_probability: f64,
    pub rssi_threshold_dbm: f64,
    /// Sensed energy per slot (only slots with energy), oldest first.
    history: VecDeque<(u64, Vec<(u32, f64)>)>,
    /// Slots in which this UE transmitted and so could not sense.
    own_tx: VecDeque<u64>,
    /// Latest decoded reservation of each neighbour.
    heard: BTreeMap<usize, HeardReservation>,
    rng: SimRng,
}

#[derive(Debug, Clone, Copy)]
struct HeardReservation {
    slot: u64,
    subchannel: u32,
    period_slots: u64,
    rsrp_dbm: f64,
}

impl UeState {
    pub fn new(id: usize, position_m: f64, period_slots: u64, keep_probability: f64, rssi_threshold_dbm: f64, rng: SimRng) -> Self {
        Self {
            id,
            position_m,
            period_slots,
            reservation: None,
            rrc: 0,
            keep_probability,
            rssi_threshold_dbm,
            history: VecDeque::new(),
            own_tx: VecDeque::new(),
            heard: BTreeMap::new(),
            rng,
        }
    }

    pub fn draw_rrc(&mut self, range: (u32, u32)) {
        self.rrc = self.rng.random_range(range.0..=range.1);
    }

    /// Counts one transmission down. At zero the resource is kept with
    /// probability `P` and reselected otherwise; the counter is redrawn in
    /// both cases.
    pub fn on_transmission(&mut self, rrc_range: (u32, u32)) -> RrcOutcome {
        self.rrc = self.rrc.saturating_sub(1);
        if self.rrc > 0 {
            return RrcOutcome::Continue;
        }
        let keep = self.rng.random::<f64>() < self.keep_probability;
        self.draw_rrc(rrc_range);
        if keep {
            RrcOutcome::Keep
        } else {
            RrcOutcome::Reselect
        }
    }

    fn forget_before(&mut self, oldest: u64) {
        while self.history.front().is_some_and(|(s, _)| *s < oldest) {
            self.history.pop_front();
        }
        while self.own_tx.front().is_some_and(|s| *s < oldest) {
            self.own_tx.pop_front();
        }
        self.heard.retain(|_, h| h.slot >= oldest);
    }

    fn energy(&self, slot: u64, subchannel: u32) -> f64 {
        match self.history.binary_search_by_key(&slot, |(s, _)| *s) {
            Ok(i) => self.history[i]
                .1
                .iter()
                .filter(|(c, _)| *c == subchannel)
                .map(|(_, p)| p)
                .sum(),
            Err(_) => 0.0,
        }
    }

    /// Observations for every resource of `window`, using sensing up to `now`.
    pub fn observe(&self, window: &SelectionWindow, n_subchannels: u32, now: u64, sensing_slots: u64) -> Vec<ResourceObservation> {
        let oldest = now.saturating_sub(sensing_slots);
        let mut out = Vec::with_capacity(window.len_slots as usize * n_subchannels as usize);
        for slot in window.start_slot..window.start_slot + window.len_slots {
            for c in 0..n_subchannels {
                // project the resource back onto past periods
                let (mut sum, mut count) = (0.0, 0u32);
                let mut k = 1;
                while let Some(past) = slot.checked_sub(k * self.period_slots) {
                    if past < oldest {
                        break;
                    }
                    if past < now && !self.own_tx.contains(&past) {
                        sum += self.energy(past, c);
                        count += 1;
                    }
                    k += 1;
                }
                let rssi_dbm = if count == 0 || sum <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    linear_to_db(sum / count as f64)
                };
                let reserved_rsrp_dbm = self
                    .heard
                    .values()
                    .filter(|h| h.subchannel == c && slot > h.slot && (slot - h.slot) % h.period_slots == 0)
                    .map(|h| h.rsrp_dbm)
                    .reduce(f64::max);
                out.push(ResourceObservation {
                    slot,
                    subchannel: c,
                    rssi_dbm,
                    reserved_rsrp_dbm,
                });
            }
        }
        out
    }
}

/// A pinned reservation used by test fixtures: the UE transmits at this slot
/// offset within every period and never reselects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedReservation {
    pub slot_offset: u64,
    pub subchannel: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpsConfig {
    pub mode: SpsMode,
    pub n_ues: usize,
    /// UEs sit at `i * ue_spacing_m` unless `positions_m` is given.
    pub ue_spacing_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions_m: Option<Vec<f64>>,
    pub packet_period_ms: f64,
    pub n_subchannels: u32,
    pub slot_ms: f64,
    pub duration_ms: f64,
    pub seed: u64,
    pub keep_probability: f64,
    pub rrc_min: u32,
    pub rrc_max: u32,
    pub rssi_threshold_dbm: f64,
    pub threshold_step_db: f64,
    pub candidate_fraction: f64,
    pub sinr_threshold_db: f64,
    pub processing_offset_slots: u64,
    pub sensing_window_ms: f64,
    pub link: LinkBudgetParams,
    /// Per-packet Rayleigh power fading on every link.
    pub rayleigh_fading: bool,
    pub distance_bin_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_reservations: Option<Vec<FixedReservation>>,
}

impl SpsConfig {
    pub fn new(mode: SpsMode) -> Self {
        Self {
            mode,
            n_ues: 10,
            ue_spacing_m: 100.0,
            positions_m: None,
            packet_period_ms: 100.0,
            n_subchannels: 4,
            slot_ms: mode.default_slot_ms(),
            duration_ms: 10_000.0,
            seed: 1,
            keep_probability: 0.0,
            rrc_min: 5,
            rrc_max: 15,
            rssi_threshold_dbm: -94.0,
            threshold_step_db: 3.0,
            candidate_fraction: 0.2,
            sinr_threshold_db: 2.0,
            processing_offset_slots: 1,
            sensing_window_ms: 1000.0,
            link: LinkBudgetParams {
                fc_hz: 5.9e9,
                bandwidth_hz: 10e6,
                tx_power_dbm: 23.0,
                ..LinkBudgetParams::default()
            },
            rayleigh_fading: true,
            distance_bin_m: 100.0,
            fixed_reservations: None,
        }
    }

    pub fn positions(&self) -> Vec<f64> {
        match &self.positions_m {
            Some(p) => p.clone(),
            None => (0..self.n_ues).map(|i| i as f64 * self.ue_spacing_m).collect(),
        }
    }

    pub fn period_slots(&self) -> u64 {
        (self.packet_period_ms / self.slot_ms).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        if self.n_ues < 2 {
            return Err(Error::config("sps.n_ues", "need at least two UEs"));
        }
        if let Some(p) = &self.positions_m {
            if p.len() != self.n_ues {
                return Err(Error::config("sps.positions_m", "must list one position per UE"));
            }
        }
        if !(self.slot_ms > 0.0) || !(self.packet_period_ms > 0.0) || !(self.duration_ms > 0.0) {
            return Err(Error::config("sps", "slot_ms, packet_period_ms and duration_ms must be > 0"));
        }
        let ratio = self.packet_period_ms / self.slot_ms;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 2.0 {
            return Err(Error::config("sps.packet_period_ms", "must be a whole number (>= 2) of slots"));
        }
        if self.n_subchannels == 0 {
            return Err(Error::config("sps.n_subchannels", "must be > 0"));
        }
        if !(0.0..=0.8).contains(&self.keep_probability) {
            return Err(Error::config("sps.keep_probability", "must lie in [0, 0.8]"));
        }
        if self.rrc_min < 1 || self.rrc_min > self.rrc_max {
            return Err(Error::config("sps.rrc_min", "need 1 <= rrc_min <= rrc_max"));
        }
        if !(self.threshold_step_db > 0.0) {
            return Err(Error::config("sps.threshold_step_db", "must be > 0"));
        }
        if !(self.candidate_fraction > 0.0 && self.candidate_fraction <= 1.0) {
            return Err(Error::config("sps.candidate_fraction", "must lie in (0, 1]"));
        }
        if !(self.sensing_window_ms > 0.0) || !(self.distance_bin_m > 0.0) {
            return Err(Error::config("sps", "sensing_window_ms and distance_bin_m must be > 0"));
        }
        if let Some(f) = &self.fixed_reservations {
            if f.len() != self.n_ues {
                return Err(Error::config("sps.fixed_reservations", "must give one reservation per UE"));
            }
            if f.iter().any(|r| r.slot_offset >= self.period_slots() || r.subchannel >= self.n_subchannels) {
                return Err(Error::config("sps.fixed_reservations", "slot_offset or subchannel out of range"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMetrics {
    /// Lower edge of the transmitter-receiver distance bin.
    pub distance_bin_m: f64,
    pub receptions: u64,
    pub successes: u64,
    pub prr: f64,
    /// Failed receptions with at least one co-resource transmitter.
    pub collisions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsMetrics {
    pub bins: Vec<BinMetrics>,
    pub transmissions: u64,
    /// Transmissions that shared their resource with another transmitter.
    pub colliding_transmissions: u64,
    pub collision_rate: f64,
    pub reselections: u64,
    pub half_duplex_losses: u64,
}

pub const SPS_CSV_COLUMNS: [&str; 8] = [
    "distance_bin_m",
    "prr",
    "receptions",
    "collisions",
    "reselections",
    "collision_rate",
    "config_hash",
    "seed",
];

impl SpsMetrics {
    pub fn to_csv(&self, config_hash: &str, seed: u64) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SPS_CSV_COLUMNS).expect("in-memory write");
        for b in &self.bins {
            w.write_record([
                fmt_f64(b.distance_bin_m),
                fmt_f64(b.prr),
                b.receptions.to_string(),
                b.collisions.to_string(),
                self.reselections.to_string(),
                fmt_f64(self.collision_rate),
                config_hash.to_string(),
                seed.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Picks a resource for `ue` in the window of a packet generated at `gen_slot`.
fn reselect(ue: &mut UeState, cfg: &SpsConfig, gen_slot: u64, now: u64, sensing_slots: u64) -> Result<Reservation> {
    let window = build_selection_window(cfg.mode, cfg.packet_period_ms, cfg.slot_ms, gen_slot, cfg.processing_offset_slots)?;
    let obs = ue.observe(&window, cfg.n_subchannels, now, sensing_slots);
    let mut ranks: Vec<u64> = (0..obs.len() as u64).collect();
    ranks.shuffle(&mut ue.rng);
    let sel = select_candidates(&obs, ue.rssi_threshold_dbm, cfg.threshold_step_db, cfg.candidate_fraction, &ranks)?;
    let pick = sel.candidates[ue.rng.random_range(0..sel.candidates.len())];
    let chosen = &obs[pick];
    debug_assert!(!chosen.excluded_at(sel.final_threshold_dbm) || sel.final_threshold_dbm.is_infinite());
    Ok(Reservation {
        next_slot: chosen.slot,
        subchannel: chosen.subchannel,
    })
}

/// Runs the scheduling simulation and scores every transmitter-receiver pair.
pub fn run_sps(cfg: &SpsConfig) -> Result<SpsMetrics> {
    cfg.validate()?;
    let positions = cfg.positions();
    let n = positions.len();
    let period = cfg.period_slots();
    let horizon = (cfg.duration_ms / cfg.slot_ms).round() as u64;
    let sensing_slots = (cfg.sensing_window_ms / cfg.slot_ms).round() as u64;
    let rrc_range = (cfg.rrc_min, cfg.rrc_max);
    let noise_mw = db_to_linear(noise_floor_dbm(cfg.link.bandwidth_hz / cfg.n_subchannels as f64, cfg.link.noise_figure_db));
    let sinr_min = db_to_linear(cfg.sinr_threshold_db);

    // Mean received power of every ordered pair: link budget plus a shadowing
    // draw shared by both directions.
    let mut chan_rng = split_stream(cfg.seed, u64::MAX);
    let mut mean_rx_mw = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = (positions[i] - positions[j]).abs().max(DISTANCE_FLOOR_M);
            let pl = path_loss_db(d, cfg.link.fc_hz, cfg.link.pathloss_model)?;
            let shadow = sample_shadowing(&mut chan_rng, cfg.link.shadowing_sigma_db);
            let p = db_to_linear(cfg.link.tx_power_dbm + cfg.link.tx_gain_dbi + cfg.link.rx_gain_dbi - pl + shadow);
            mean_rx_mw[i][j] = p;
            mean_rx_mw[j][i] = p;
        }
    }

    let mut ues: Vec<UeState> = (0..n)
        .map(|i| UeState::new(i, positions[i], period, cfg.keep_probability, cfg.rssi_threshold_dbm, split_stream(cfg.seed, i as u64)))
        .collect();
    // generation slot of each UE's current packet
    let mut gen = vec![0u64; n];
    let mut queue = BinaryHeap::new();
    for (i, ue) in ues.iter_mut().enumerate() {
        let r = match &cfg.fixed_reservations {
            Some(f) => Reservation {
                next_slot: f[i].slot_offset,
                subchannel: f[i].subchannel,
            },
            None => {
                gen[i] = ue.rng.random_range(0..period);
                ue.draw_rrc(rrc_range);
                reselect(ue, cfg, gen[i], 0, sensing_slots)?
            }
        };
        queue.push(Reverse((r.next_slot, i)));
        ue.reservation = Some(r);
    }

    let max_d = positions.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - positions.iter().cloned().fold(f64::INFINITY, f64::min);
    let n_bins = (max_d / cfg.distance_bin_m).floor() as usize + 1;
    let mut bins: Vec<BinMetrics> = (0..n_bins)
        .map(|b| BinMetrics {
            distance_bin_m: b as f64 * cfg.distance_bin_m,
            receptions: 0,
            successes: 0,
            prr: 0.0,
            collisions: 0,
        })
        .collect();
    let (mut transmissions, mut colliding, mut reselections, mut half_duplex) = (0u64, 0u64, 0u64, 0u64);

    while let Some(&Reverse((slot, _))) = queue.peek() {
        if slot >= horizon {
            break;
        }
        let mut txs: Vec<usize> = Vec::new();
        while queue.peek().is_some_and(|Reverse((s, _))| *s == slot) {
            let Reverse((_, i)) = queue.pop().expect("peeked");
            txs.push(i);
        }
        txs.sort_unstable();
        let sub = |i: usize, ues: &[UeState]| ues[i].reservation.as_ref().expect("reserved").subchannel;
        // instantaneous received power of every transmitter at every UE
        let mut rx = vec![vec![0.0; n]; txs.len()];
        for (t, &i) in txs.iter().enumerate() {
            for j in 0..n {
                if j != i {
                    let fade = if cfg.rayleigh_fading { chan_rng.sample::<f64, _>(Exp1) } else { 1.0 };
                    rx[t][j] = mean_rx_mw[i][j] * fade;
                }
            }
        }
        for (t, &i) in txs.iter().enumerate() {
            transmissions += 1;
            let c = sub(i, &ues);
            if txs.iter().any(|&k| k != i && sub(k, &ues) == c) {
                colliding += 1;
            }
            for j in 0..n {
                if j == i {
                    continue;
                }
                let bin = &mut bins[((positions[i] - positions[j]).abs() / cfg.distance_bin_m).floor() as usize];
                bin.receptions += 1;
                if txs.contains(&j) {
                    half_duplex += 1;
                    continue;
                }
                let interference: f64 = txs
                    .iter()
                    .enumerate()
                    .filter(|&(u, &k)| u != t && sub(k, &ues) == c)
                    .map(|(u, _)| rx[u][j])
                    .sum();
                let sinr = rx[t][j] / (noise_mw + interference);
                if sinr >= sinr_min {
                    bin.successes += 1;
                    let h = HeardReservation {
                        slot,
                        subchannel: c,
                        period_slots: period,
                        rsrp_dbm: linear_to_db(rx[t][j]),
                    };
                    ues[j].heard.insert(i, h);
                } else if interference > 0.0 {
                    bin.collisions += 1;
                }
            }
        }
        // sensing: listeners record the energy above the noise floor
        for j in 0..n {
            if txs.contains(&j) {
                ues[j].own_tx.push_back(slot);
                continue;
            }
            let sensed: Vec<(u32, f64)> = txs
                .iter()
                .enumerate()
                .filter(|&(t, _)| rx[t][j] >= noise_mw)
                .map(|(t, &i)| (sub(i, &ues), rx[t][j]))
                .collect();
            if !sensed.is_empty() {
                ues[j].history.push_back((slot, sensed));
            }
        }
        for &i in &txs {
            let oldest = slot.saturating_sub(sensing_slots);
            ues[i].forget_before(oldest);
            let next = if cfg.fixed_reservations.is_some() {
                Reservation {
                    next_slot: slot + period,
                    subchannel: sub(i, &ues),
                }
            } else {
                gen[i] += period;
                match ues[i].on_transmission(rrc_range) {
                    RrcOutcome::Continue | RrcOutcome::Keep => Reservation {
                        next_slot: slot + period,
                        subchannel: sub(i, &ues),
                    },
                    RrcOutcome::Reselect => {
                        reselections += 1;
                        reselect(&mut ues[i], cfg, gen[i], slot + 1, sensing_slots)?
                    }
                }
            };
            queue.push(Reverse((next.next_slot, i)));
            ues[i].reservation = Some(next);
        }
    }
    for b in &mut bins {
        b.prr = if b.receptions > 0 {
            b.successes as f64 / b.receptions as f64
        } else {
            0.0
        };
    }
    bins.retain(|b| b.receptions > 0);
    Ok(SpsMetrics {
        bins,
        transmissions,
        colliding_transmissions: colliding,
        collision_rate: if transmissions > 0 { colliding as f64 / transmissions as f64 } else { 0.0 },
        reselections,
        half_duplex_losses: half_duplex,
    })
}
