//! Scores link curves against use-case requirements.
//!
//! Reliability is read from a curve in one of two ways. `BerThreshold` treats
//! a distance as reliable at level `r` when the residual BER is at most
//! `1 - r`; `PacketMode` requires the packet success probability after all
//! attempts to reach `r`. Both read reliability per packet. Since a failed
//! packet can never carry more than all of its bits in error, BER never
//! exceeds the packet failure probability, and the BER reading is always at
//! least as permissive.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linksim::{fmt_f64, LinkCurve};
use crate::techprofiles::{RangeSense, TechnologyId, UseCaseRequirement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplianceMode {
    BerThreshold,
    PacketMode,
}

impl ComplianceMode {
    pub const BOTH: [ComplianceMode; 2] = [ComplianceMode::BerThreshold, ComplianceMode::PacketMode];

    pub fn as_str(self) -> &'static str {
        match self {
            ComplianceMode::BerThreshold => "ber_threshold",
            ComplianceMode::PacketMode => "packet_mode",
        }
    }
}

/// Which end of the use case's rate span the technology must reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateRule {
    /// Peak rate must cover the maximum required rate.
    #[default]
    Strict,
    /// Peak rate must cover the minimum required rate.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeResult {
    pub range_m: f64,
    /// The target held at every sampled distance, so the true range may be longer.
    pub censored: bool,
}

/// Failure metric of point `i` under `mode` when at most `attempts` are allowed.
fn metric(curve: &LinkCurve, i: usize, mode: ComplianceMode, attempts: usize) -> f64 {
    let p = &curve.points[i];
    match mode {
        ComplianceMode::BerThreshold => p.ber_by_attempts[attempts - 1],
        ComplianceMode::PacketMode => 1.0 - p.reliability_by_attempts[attempts - 1],
    }
}

fn check_target(curve: &LinkCurve, target: f64, attempts: usize) -> Result<()> {
    if curve.points.is_empty() {
        return Err(Error::Contract("reliable_range needs a nonempty curve".into()));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Contract(format!("reliability target {target} outside (0, 1)")));
    }
    let cap = curve.points[0].ber_by_attempts.len();
    if attempts < 1 || attempts > cap {
        return Err(Error::Contract(format!("attempt cap {attempts} outside 1..={cap}")));
    }
    Ok(())
}

/// Largest distance at which the curve meets `target` with all attempts.
pub fn reliable_range(curve: &LinkCurve, target: f64, mode: ComplianceMode) -> Result<RangeResult> {
    let cap = curve.points.first().map_or(1, |p| p.ber_by_attempts.len());
    reliable_range_with_attempts(curve, target, mode, cap)
}

/// As [`reliable_range`] with at most `attempts` transmissions per packet.
///
/// Between the last sampled distance that meets the target and its successor
/// the crossing is interpolated linearly in (log distance, log metric).
pub fn reliable_range_with_attempts(
    curve: &LinkCurve,
    target: f64,
    mode: ComplianceMode,
    attempts: usize,
) -> Result<RangeResult> {
    check_target(curve, target, attempts)?;
    let limit = 1.0 - target;
    let n = curve.points.len();
    let Some(i) = (0..n).rev().find(|&i| metric(curve, i, mode, attempts) <= limit) else {
        return Ok(RangeResult {
            range_m: 0.0,
            censored: false,
        });
    };
    if i == n - 1 {
        return Ok(RangeResult {
            range_m: curve.points[i].distance_m,
            censored: true,
        });
    }
    let (d0, d1) = (curve.points[i].distance_m, curve.points[i + 1].distance_m);
    let (m0, m1) = (metric(curve, i, mode, attempts), metric(curve, i + 1, mode, attempts));
    let t = if m0 > 0.0 {
        (limit.ln() - m0.ln()) / (m1.ln() - m0.ln())
    } else {
        // a zero estimate has no logarithm; fall back to linear in the metric
        (limit - m0) / (m1 - m0)
    };
    let range_m = (d0.ln() + t.clamp(0.0, 1.0) * (d1.ln() - d0.ln())).exp();
    Ok(RangeResult {
        range_m,
        censored: false,
    })
}

/// Failure metric at an arbitrary distance, interpolated log-log between
/// samples and clamped to the sampled span.
fn metric_at(curve: &LinkCurve, distance_m: f64, mode: ComplianceMode, attempts: usize) -> f64 {
    let pts = &curve.points;
    let n = pts.len();
    if distance_m <= pts[0].distance_m {
        return metric(curve, 0, mode, attempts);
    }
    if distance_m >= pts[n - 1].distance_m {
        return metric(curve, n - 1, mode, attempts);
    }
    let j = pts.partition_point(|p| p.distance_m <= distance_m) - 1;
    let (d0, d1) = (pts[j].distance_m, pts[j + 1].distance_m);
    let (m0, m1) = (metric(curve, j, mode, attempts), metric(curve, j + 1, mode, attempts));
    let t = (distance_m.ln() - d0.ln()) / (d1.ln() - d0.ln());
    if m0 > 0.0 && m1 > 0.0 {
        (m0.ln() + t * (m1.ln() - m0.ln())).exp()
    } else {
        m0 + t * (m1 - m0)
    }
}

/// Everything the verdict needs about one simulated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub id: String,
    pub curve: LinkCurve,
    pub peak_rate_bps: f64,
}

impl ScenarioResult {
    pub fn technology(&self) -> TechnologyId {
        self.curve.scenario.technology
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub use_case: String,
    pub scenario_id: String,
    pub technology: TechnologyId,
    pub mode: ComplianceMode,
    pub latency_ok: bool,
    pub rate_ok: bool,
    pub reliability_range_ok: bool,
    pub reliable_range_m: f64,
    pub range_censored: bool,
    /// Attempts needed at the use case's distance (the cap when never met).
    pub attempts_needed: usize,
    pub latency_ms: f64,
    pub rate_bps: f64,
}

impl Verdict {
    pub fn pass(&self) -> bool {
        self.latency_ok && self.rate_ok && self.reliability_range_ok
    }
}

/// Scores one scenario against one use case.
pub fn evaluate(use_case: &UseCaseRequirement, result: &ScenarioResult, mode: ComplianceMode, rate_rule: RateRule) -> Result<Verdict> {
    let curve = &result.curve;
    let target = use_case.reliability;
    let range = reliable_range(curve, target, mode)?;
    let required_m = use_case.range_km * 1e3;
    // Both senses ask for reliable service out to the stated distance; a
    // censored range only counts when the sampled span reaches it.
    let reliability_range_ok = match use_case.range_sense {
        RangeSense::AtMost | RangeSense::AtLeast => range.range_m >= required_m,
    };
    let cap = curve.points[0].ber_by_attempts.len();
    let limit = 1.0 - target;
    let attempts_needed = (1..=cap)
        .find(|&n| metric_at(curve, required_m, mode, n) <= limit)
        .unwrap_or(cap);
    let latency_ms = curve
        .scenario
        .latency
        .latency_ms(curve.transmitted_bits, attempts_needed as f64, curve.rate_bps)?;
    let required_rate = match rate_rule {
        RateRule::Strict => use_case.data_rate_max_bps,
        RateRule::Lenient => use_case.data_rate_min_bps,
    };
    Ok(Verdict {
        use_case: use_case.name.clone(),
        scenario_id: result.id.clone(),
        technology: result.technology(),
        mode,
        latency_ok: latency_ms <= use_case.max_latency_ms,
        rate_ok: result.peak_rate_bps >= required_rate,
        reliability_range_ok,
        reliable_range_m: range.range_m,
        range_censored: range.censored,
        attempts_needed,
        latency_ms,
        rate_bps: result.peak_rate_bps,
    })
}

/// Full cross product, scenario-major, use cases in table order, both modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictMatrix {
    pub verdicts: Vec<Verdict>,
    pub rate_rule: RateRule,
}

pub fn verdict_matrix(scenarios: &[ScenarioResult], use_cases: &[UseCaseRequirement], rate_rule: RateRule) -> Result<VerdictMatrix> {
    if scenarios.is_empty() || use_cases.is_empty() {
        return Err(Error::Contract("verdict_matrix needs at least one scenario and one use case".into()));
    }
    let mut verdicts = Vec::with_capacity(scenarios.len() * use_cases.len() * 2);
    for s in scenarios {
        for mode in ComplianceMode::BOTH {
            for u in use_cases {
                verdicts.push(evaluate(u, s, mode, rate_rule)?);
            }
        }
    }
    Ok(VerdictMatrix { verdicts, rate_rule })
}

pub const VERDICT_COLUMNS: [&str; 14] = [
    "scenario",
    "technology",
    "mode",
    "use_case",
    "pass",
    "latency_ok",
    "rate_ok",
    "reliability_range_ok",
    "reliable_range_m",
    "range_censored",
    "attempts_needed",
    "latency_ms",
    "rate_bps",
    "config_hash",
];

impl VerdictMatrix {
    pub fn of_mode(&self, mode: ComplianceMode) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(move |v| v.mode == mode)
    }

    /// Scenario ids whose every use case passes under `mode`.
    pub fn all_pass(&self, mode: ComplianceMode) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for v in self.of_mode(mode) {
            if !ids.contains(&v.scenario_id) {
                ids.push(v.scenario_id.clone());
            }
        }
        ids.retain(|id| self.of_mode(mode).filter(|v| &v.scenario_id == id).all(Verdict::pass));
        ids
    }

    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(VERDICT_COLUMNS).expect("in-memory write");
        for v in &self.verdicts {
            w.write_record([
                v.scenario_id.clone(),
                v.technology.to_string(),
                v.mode.as_str().to_string(),
                v.use_case.clone(),
                v.pass().to_string(),
                v.latency_ok.to_string(),
                v.rate_ok.to_string(),
                v.reliability_range_ok.to_string(),
                fmt_f64(v.reliable_range_m),
                v.range_censored.to_string(),
                v.attempts_needed.to_string(),
                fmt_f64(v.latency_ms),
                fmt_f64(v.rate_bps),
                config_hash.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Plain-text grid: one row per use case, one column per scenario, with
    /// `P` for pass and the failing checks (L, R, D for latency, rate,
    /// distance) otherwise.
    pub fn to_grid(&self, mode: ComplianceMode) -> String {
        let mut scenarios: Vec<&str> = Vec::new();
        let mut cases: Vec<&str> = Vec::new();
        for v in self.of_mode(mode) {
            if !scenarios.contains(&v.scenario_id.as_str()) {
                scenarios.push(&v.scenario_id);
            }
            if !cases.contains(&v.use_case.as_str()) {
                cases.push(&v.use_case);
            }
        }
        let name_w = cases.iter().map(|c| c.len()).max().unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "mode: {}  (reliability read per packet)", mode.as_str());
        let _ = write!(out, "{:name_w$}", "");
        for s in &scenarios {
            let _ = write!(out, "  {s:>12}");
        }
        out.push('\n');
        for c in &cases {
            let _ = write!(out, "{c:name_w$}");
            for s in &scenarios {
                let v = self
                    .of_mode(mode)
                    .find(|v| v.use_case == *c && v.scenario_id == *s)
                    .expect("full cross product");
                let mut cell = String::new();
                if v.pass() {
                    cell.push('P');
                } else {
                    for (ok, tag) in [(v.latency_ok, 'L'), (v.rate_ok, 'R'), (v.reliability_range_ok, 'D')] {
                        if !ok {
                            cell.push(tag);
                        }
                    }
                }
                let _ = write!(out, "  {cell:>12}");
            }
            out.push('\n');
        }
        out
    }
}
