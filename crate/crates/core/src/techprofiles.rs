//! Static data model: technology profiles and use-case requirements.
//!
//! Both tables live in plain-text TOML files under `data/` and are the single
//! source of truth for every number the compliance engine uses. The copies
//! shipped with the repository are embedded at compile time so the library
//! works without a checkout; [`load_profiles_from`] and
//! [`load_use_cases_from`] read edited copies from disk.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TECHNOLOGIES_TOML: &str = include_str!("../../../data/technologies.toml");
pub const USE_CASES_TOML: &str = include_str!("../../../data/use_cases.toml");

pub const EXPECTED_USE_CASES: usize = 13;
pub const EXPECTED_TECHNOLOGIES: usize = 5;
pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TechnologyId {
    #[serde(rename = "GSM-R")]
    GsmR,
    #[serde(rename = "TETRA")]
    Tetra,
    #[serde(rename = "DMR")]
    Dmr,
    #[serde(rename = "LTE-V2X")]
    LteV2x,
    #[serde(rename = "NR-V2X")]
    NrV2x,
}

impl TechnologyId {
    pub const ALL: [TechnologyId; 5] = [
        TechnologyId::GsmR,
        TechnologyId::Tetra,
        TechnologyId::Dmr,
        TechnologyId::LteV2x,
        TechnologyId::NrV2x,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TechnologyId::GsmR => "GSM-R",
            TechnologyId::Tetra => "TETRA",
            TechnologyId::Dmr => "DMR",
            TechnologyId::LteV2x => "LTE-V2X",
            TechnologyId::NrV2x => "NR-V2X",
        }
    }

    pub fn is_narrowband(self) -> bool {
        matches!(
            self,
            TechnologyId::GsmR | TechnologyId::Tetra | TechnologyId::Dmr
        )
    }
}

impl fmt::Display for TechnologyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TechnologyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TechnologyId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("technology", format!("unknown technology `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessScheme {
    #[serde(rename = "TDMA")]
    Tdma,
    #[serde(rename = "SC-FDMA")]
    ScFdma,
    #[serde(rename = "OFDMA")]
    Ofdma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodingScheme {
    Convolutional,
    #[serde(rename = "RCPC")]
    Rcpc,
    Trellis,
    Turbo,
    #[serde(rename = "LDPC")]
    Ldpc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModulationScheme {
    #[serde(rename = "GMSK")]
    Gmsk,
    #[serde(rename = "PI4DQPSK")]
    Pi4Dqpsk,
    #[serde(rename = "FSK4")]
    Fsk4,
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "QAM16")]
    Qam16,
    #[serde(rename = "QAM64")]
    Qam64,
    #[serde(rename = "QAM256")]
    Qam256,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessProtocol {
    SlottedAloha,
    #[serde(rename = "SensingSPS")]
    SensingSps,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl FrequencyBand {
    pub fn center_hz(&self) -> f64 {
        0.5 * (self.lo_hz + self.hi_hz)
    }

    pub fn contains(&self, f_hz: f64) -> bool {
        (self.lo_hz..=self.hi_hz).contains(&f_hz)
    }
}

// Bands are stored as two-element arrays in the data file.
impl From<FrequencyBand> for [f64; 2] {
    fn from(b: FrequencyBand) -> Self {
        [b.lo_hz, b.hi_hz]
    }
}

impl From<[f64; 2]> for FrequencyBand {
    fn from(a: [f64; 2]) -> Self {
        FrequencyBand {
            lo_hz: a[0],
            hi_hz: a[1],
        }
    }
}

/// Static PHY/MAC parameters of one technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnologyProfile {
    pub id: TechnologyId,
    pub access_scheme: AccessScheme,
    pub slot_durations_ms: Vec<f64>,
    pub tx_power_dbm_default: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_power_dbm_range: Option<[f64; 2]>,
    #[serde(with = "band_list")]
    pub frequency_options_hz: Vec<FrequencyBand>,
    pub channel_bandwidth_hz_options: Vec<f64>,
    pub coding_scheme: CodingScheme,
    pub modulation_options: Vec<ModulationScheme>,
    pub peak_rate_bps: f64,
    pub direct_mode_supported: bool,
    pub access_protocol: AccessProtocol,
    /// Slot duration the latency model aligns to; one of `slot_durations_ms`.
    pub latency_slot_ms: f64,
    pub processing_turnaround_ms: f64,
    pub access_wait_ms: f64,
}

mod band_list {
    use super::FrequencyBand;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(bands: &[FrequencyBand], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<[f64; 2]> = bands.iter().map(|&b| b.into()).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<FrequencyBand>, D::Error> {
        let raw: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(FrequencyBand::from).collect())
    }
}

impl TechnologyProfile {
    /// Shortest (most aggressive) slot duration.
    pub fn min_slot_ms(&self) -> f64 {
        self.slot_durations_ms
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Modulation used on the simulated data channel (the first listed option).
    pub fn data_modulation(&self) -> ModulationScheme {
        self.modulation_options[0]
    }

    fn validate(&self, source: &str) -> Result<()> {
        let rec = self.id.as_str();
        let bad = |field: &str, message: &str| Error::Parse {
            source_name: source.to_string(),
            record: rec.to_string(),
            field: field.to_string(),
            message: message.to_string(),
        };
        if self.slot_durations_ms.is_empty() || self.slot_durations_ms.iter().any(|&s| !(s > 0.0)) {
            return Err(bad("slot_durations_ms", "slot durations must be non-empty and > 0"));
        }
        if self.frequency_options_hz.is_empty()
            || self.frequency_options_hz.iter().any(|b| !(b.lo_hz < b.hi_hz))
        {
            return Err(bad("frequency_options_hz", "every band needs lo < hi"));
        }
        if self.channel_bandwidth_hz_options.is_empty()
            || self.channel_bandwidth_hz_options.iter().any(|&b| !(b > 0.0))
        {
            return Err(bad("channel_bandwidth_hz_options", "bandwidths must be > 0"));
        }
        if self.modulation_options.is_empty() {
            return Err(bad("modulation_options", "at least one modulation is required"));
        }
        if !(self.peak_rate_bps > 0.0) {
            return Err(bad("peak_rate_bps", "peak rate must be > 0"));
        }
        if let Some([lo, hi]) = self.tx_power_dbm_range {
            if !(lo <= self.tx_power_dbm_default && self.tx_power_dbm_default <= hi) {
                return Err(bad("tx_power_dbm_default", "default power outside tx_power_dbm_range"));
            }
        }
        if !self.slot_durations_ms.contains(&self.latency_slot_ms) {
            return Err(bad("latency_slot_ms", "must be one of slot_durations_ms"));
        }
        if self.processing_turnaround_ms < 0.0 || self.access_wait_ms < 0.0 {
            return Err(bad("processing_turnaround_ms", "latency constants must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RangeSense {
    AtMost,
    AtLeast,
}

/// Numeric requirements of one off-network use case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UseCaseRequirement {
    pub name: String,
    pub max_latency_ms: f64,
    pub reliability: f64,
    pub data_rate_min_bps: f64,
    pub data_rate_max_bps: f64,
    pub range_km: f64,
    pub range_sense: RangeSense,
}

impl UseCaseRequirement {
    fn validate(&self, source: &str) -> Result<()> {
        let bad = |field: &str, message: &str| Error::Parse {
            source_name: source.to_string(),
            record: self.name.clone(),
            field: field.to_string(),
            message: message.to_string(),
        };
        if !(self.reliability > 0.0 && self.reliability < 1.0) {
            return Err(bad("reliability", "must lie strictly between 0 and 1"));
        }
        if !(self.max_latency_ms > 0.0) {
            return Err(bad("max_latency_ms", "must be > 0"));
        }
        if !(self.data_rate_min_bps >= 0.0 && self.data_rate_min_bps <= self.data_rate_max_bps) {
            return Err(bad("data_rate_min_bps", "need 0 <= min <= max"));
        }
        if !(self.range_km > 0.0) {
            return Err(bad("range_km", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct TechnologyFile<'a> {
    schema_version: i64,
    technology: &'a [TechnologyProfile],
}

#[derive(Debug, Serialize)]
struct UseCaseFile<'a> {
    schema_version: i64,
    use_case: &'a [UseCaseRequirement],
}

/// Pulls the field name out of a serde message such as "missing field `x`".
fn field_from_message(msg: &str) -> String {
    let mut parts = msg.split('`');
    match (parts.next(), parts.next()) {
        (Some(_), Some(field)) if !field.is_empty() => field.to_string(),
        _ => "?".to_string(),
    }
}

fn parse_records<T: for<'de> Deserialize<'de>>(
    text: &str,
    source: &str,
    array_key: &str,
) -> Result<Vec<T>> {
    let root: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        source_name: source.to_string(),
        record: "<file>".to_string(),
        field: "?".to_string(),
        message: e.message().to_string(),
    })?;
    match root.get("schema_version").and_then(toml::Value::as_integer) {
        Some(SCHEMA_VERSION) => {}
        other => {
            return Err(Error::Integrity {
                source_name: source.to_string(),
                message: format!("unsupported schema_version {other:?}, expected {SCHEMA_VERSION}"),
            })
        }
    }
    let rows = root
        .get(array_key)
        .and_then(toml::Value::as_array)
        .ok_or_else(|| Error::Integrity {
            source_name: source.to_string(),
            message: format!("missing [[{array_key}]] records"),
        })?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let label = row
                .get("name")
                .or_else(|| row.get("id"))
                .and_then(toml::Value::as_str)
                .map_or_else(|| format!("#{}", i + 1), str::to_string);
            serde_path_to_error::deserialize(row.clone()).map_err(|e| {
                let path = e.path().to_string();
                let msg = e.into_inner().message().to_string();
                let field = if path.is_empty() || path == "." {
                    field_from_message(&msg)
                } else {
                    path
                };
                Error::Parse {
                    source_name: source.to_string(),
                    record: label,
                    field,
                    message: msg,
                }
            })
        })
        .collect()
}

/// Parses and validates a use-case table; exactly thirteen rows, table order kept.
pub fn parse_use_cases(text: &str, source: &str) -> Result<Vec<UseCaseRequirement>> {
    let records: Vec<UseCaseRequirement> = parse_records(text, source, "use_case")?;
    if records.len() != EXPECTED_USE_CASES {
        return Err(Error::Integrity {
            source_name: source.to_string(),
            message: format!("expected {EXPECTED_USE_CASES} use cases, found {}", records.len()),
        });
    }
    for r in &records {
        r.validate(source)?;
    }
    let at_least = records
        .iter()
        .filter(|r| r.range_sense == RangeSense::AtLeast)
        .count();
    if at_least != 1 {
        return Err(Error::Integrity {
            source_name: source.to_string(),
            message: format!("expected exactly one AtLeast range record, found {at_least}"),
        });
    }
    Ok(records)
}

/// Parses and validates a technology table; exactly five rows, one per id.
pub fn parse_profiles(text: &str, source: &str) -> Result<Vec<TechnologyProfile>> {
    let records: Vec<TechnologyProfile> = parse_records(text, source, "technology")?;
    if records.len() != EXPECTED_TECHNOLOGIES {
        return Err(Error::Integrity {
            source_name: source.to_string(),
            message: format!(
                "expected {EXPECTED_TECHNOLOGIES} technologies, found {}",
                records.len()
            ),
        });
    }
    for id in TechnologyId::ALL {
        if records.iter().filter(|p| p.id == id).count() != 1 {
            return Err(Error::Integrity {
                source_name: source.to_string(),
                message: format!("technology {id} must appear exactly once"),
            });
        }
    }
    for p in &records {
        p.validate(source)?;
    }
    Ok(records)
}

pub fn load_use_cases() -> Result<Vec<UseCaseRequirement>> {
    parse_use_cases(USE_CASES_TOML, "use_cases.toml")
}

pub fn load_profiles() -> Result<Vec<TechnologyProfile>> {
    parse_profiles(TECHNOLOGIES_TOML, "technologies.toml")
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Integrity {
        source_name: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_use_cases_from(path: &Path) -> Result<Vec<UseCaseRequirement>> {
    parse_use_cases(&read(path)?, &path.display().to_string())
}

pub fn load_profiles_from(path: &Path) -> Result<Vec<TechnologyProfile>> {
    parse_profiles(&read(path)?, &path.display().to_string())
}

pub fn serialize_use_cases(records: &[UseCaseRequirement]) -> String {
    toml::to_string(&UseCaseFile {
        schema_version: SCHEMA_VERSION,
        use_case: records,
    })
    .expect("use cases serialize")
}

pub fn serialize_profiles(records: &[TechnologyProfile]) -> String {
    toml::to_string(&TechnologyFile {
        schema_version: SCHEMA_VERSION,
        technology: records,
    })
    .expect("profiles serialize")
}

/// Canonical form of a data file: parsed and re-emitted with comments and
/// number spelling normalised.
pub fn canonicalize(text: &str) -> Result<String> {
    let v: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        source_name: "<text>".into(),
        record: "<file>".into(),
        field: "?".into(),
        message: e.message().to_string(),
    })?;
    Ok(v.to_string())
}

pub fn profile(profiles: &[TechnologyProfile], id: TechnologyId) -> &TechnologyProfile {
    profiles
        .iter()
        .find(|p| p.id == id)
        .expect("validated profile table holds every technology")
}

pub fn use_case<'a>(cases: &'a [UseCaseRequirement], name: &str) -> Option<&'a UseCaseRequirement> {
    cases.iter().find(|c| c.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirteen_use_cases_in_table_order() {
        let cases = load_use_cases().unwrap();
        assert_eq!(cases.len(), 13);
        assert_eq!(cases[0].name, "Shunting voice communication");
        assert_eq!(
            cases[12].name,
            "Monitoring and controlling critical infrastructure video communication"
        );
    }

    #[test]
    fn shunting_video_row() {
        let cases = load_use_cases().unwrap();
        let c = use_case(&cases, "Shunting video communication").unwrap();
        assert_eq!(c.max_latency_ms, 100.0);
        assert_eq!(c.reliability, 0.999);
        assert_eq!(c.data_rate_min_bps, 10e6);
        assert_eq!(c.data_rate_max_bps, 10e6);
        assert_eq!(c.range_km, 1.5);
        assert_eq!(c.range_sense, RangeSense::AtMost);
    }

    #[test]
    fn trackside_row_is_the_only_at_least() {
        let cases = load_use_cases().unwrap();
        let c = use_case(&cases, "Trackside maintenance warning system communication").unwrap();
        assert_eq!(c.reliability, 0.999999);
        assert_eq!(c.range_km, 8.5);
        assert_eq!(c.range_sense, RangeSense::AtLeast);
    }

    #[test]
    fn reliability_levels_are_the_three_table_values() {
        for c in load_use_cases().unwrap() {
            assert!([0.999, 0.9999, 0.999999].contains(&c.reliability), "{}", c.name);
        }
    }

    #[test]
    fn dmr_and_tetra_rows() {
        let profiles = load_profiles().unwrap();
        let dmr = profile(&profiles, TechnologyId::Dmr);
        assert_eq!(dmr.slot_durations_ms, vec![30.0]);
        assert_eq!(dmr.channel_bandwidth_hz_options, vec![12.5e3]);
        assert_eq!(dmr.modulation_options, vec![ModulationScheme::Fsk4]);
        assert_eq!(dmr.coding_scheme, CodingScheme::Trellis);
        assert_eq!(dmr.peak_rate_bps, 4.8e3);
        let tetra = profile(&profiles, TechnologyId::Tetra);
        assert_eq!(tetra.slot_durations_ms, vec![14.167]);
        assert_eq!(tetra.channel_bandwidth_hz_options, vec![25e3]);
        assert_eq!(tetra.modulation_options, vec![ModulationScheme::Pi4Dqpsk]);
        assert_eq!(tetra.coding_scheme, CodingScheme::Rcpc);
        assert_eq!(tetra.peak_rate_bps, 7.2e3);
    }

    #[test]
    fn nr_slot_set_and_peak_rates() {
        let profiles = load_profiles().unwrap();
        let nr = profile(&profiles, TechnologyId::NrV2x);
        assert_eq!(nr.slot_durations_ms, vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
        for id in [TechnologyId::GsmR, TechnologyId::Tetra, TechnologyId::Dmr] {
            assert!(profile(&profiles, id).peak_rate_bps < 25e3);
        }
        assert_eq!(profile(&profiles, TechnologyId::LteV2x).peak_rate_bps, 30e6);
        assert_eq!(nr.peak_rate_bps, 1e9);
    }

    #[test]
    fn only_gsmr_lacks_direct_mode() {
        for p in load_profiles().unwrap() {
            assert_eq!(p.direct_mode_supported, p.id != TechnologyId::GsmR);
        }
    }

    #[test]
    fn round_trip_is_canonical() {
        let cases = load_use_cases().unwrap();
        assert_eq!(
            canonicalize(&serialize_use_cases(&cases)).unwrap(),
            canonicalize(USE_CASES_TOML).unwrap()
        );
        let profiles = load_profiles().unwrap();
        assert_eq!(
            canonicalize(&serialize_profiles(&profiles)).unwrap(),
            canonicalize(TECHNOLOGIES_TOML).unwrap()
        );
    }

    #[test]
    fn wrong_count_is_an_integrity_error() {
        let truncated = USE_CASES_TOML
            .rsplit_once("[[use_case]]")
            .map(|(head, _)| head)
            .unwrap();
        assert!(matches!(
            parse_use_cases(truncated, "t"),
            Err(Error::Integrity { .. })
        ));
    }

    #[test]
    fn bad_field_is_named() {
        let broken = USE_CASES_TOML.replacen("reliability = 0.999\n", "reliability = \"high\"\n", 1);
        match parse_use_cases(&broken, "t") {
            Err(Error::Parse { record, field, .. }) => {
                assert_eq!(record, "Shunting video communication");
                assert_eq!(field, "reliability");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_reliability_is_rejected() {
        let broken = USE_CASES_TOML.replacen("reliability = 0.999\n", "reliability = 1.5\n", 1);
        assert!(matches!(
            parse_use_cases(&broken, "t"),
            Err(Error::Parse { field, .. }) if field == "reliability"
        ));
    }
}
