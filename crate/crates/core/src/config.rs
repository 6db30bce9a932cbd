//! Scenario configuration files and the shipped presets.
//!
//! A config names technologies and overrides their standard parameters.
//! Every section is optional; whatever is left out keeps the technology's
//! default. Sections:
//!
//! - top level: `name`, `description`, `seed`, `workers` (0 = all cores),
//!   `technologies` (default: all five)
//! - `[scenario]`: any `LinkScenario` field except the link budget
//! - `[channel]`: link budget (`fc_hz`, `tx_power_dbm`, ...) and fading model
//!   (`shadowing`, `shadowing_percentile`, `fading_blocks`)
//! - `[sweep]`: carrier and power variants, log-spaced distance grid
//! - `[compliance]`: modes, rate rule, use-case filter
//! - `[sps]`: any `SpsConfig` field
//!
//! Unknown keys anywhere are rejected with the dotted path of the offender.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::compliance::{ComplianceMode, RateRule};
use crate::error::{Error, Result};
use crate::linksim::{hash_text, LinkScenario};
use crate::sps::{SpsConfig, SpsMode};
use crate::techprofiles::{load_profiles, load_use_cases, profile, TechnologyId};

/// Presets shipped with the crate, by name.
pub const PRESETS: [(&str, &str); 7] = [
    ("fig2", include_str!("../../../data/presets/fig2.toml")),
    ("fig3", include_str!("../../../data/presets/fig3.toml")),
    ("fig4", include_str!("../../../data/presets/fig4.toml")),
    ("baseline", include_str!("../../../data/presets/baseline.toml")),
    ("enhanced-900", include_str!("../../../data/presets/enhanced-900.toml")),
    ("sps-lte", include_str!("../../../data/presets/sps-lte.toml")),
    ("sps-nr", include_str!("../../../data/presets/sps-nr.toml")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// One scenario per carrier (cross product with `tx_power_dbm`).
    pub fc_hz: Option<Vec<f64>>,
    pub tx_power_dbm: Option<Vec<f64>>,
    /// Log-spaced grid; replaces `scenario.distances_m` when all three are set.
    pub distance_start_m: Option<f64>,
    pub distance_stop_m: Option<f64>,
    pub distance_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplianceSection {
    pub modes: Option<Vec<ComplianceMode>>,
    pub rate_rule: Option<RateRule>,
    /// Use-case names to score (default: all, in table order).
    pub use_cases: Option<Vec<String>>,
}

/// Raw file contents. Sections that mirror library types stay as tables until
/// they are merged over defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: Option<String>,
    pub description: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub technologies: Option<Vec<TechnologyId>>,
    pub scenario: Option<Table>,
    pub channel: Option<Table>,
    pub sweep: Option<SweepSection>,
    pub compliance: Option<ComplianceSection>,
    pub sps: Option<Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedScenario {
    pub id: String,
    pub scenario: LinkScenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceOptions {
    pub modes: Vec<ComplianceMode>,
    pub rate_rule: RateRule,
    pub use_cases: Vec<String>,
}

/// A config with every default applied; echoed into output metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub name: String,
    pub description: String,
    pub seed: u64,
    pub workers: usize,
    pub compliance: ComplianceOptions,
    pub sps: SpsConfig,
    pub scenarios: Vec<ResolvedScenario>,
}

impl ResolvedConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config serializes")
    }

    /// Hash of everything that affects results; the worker count is left out
    /// because it never changes them.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 0;
        hash_text(&c.to_toml())
    }
}

/// Parses a `key.path=value` override. The value is read as a TOML literal
/// and falls back to a bare string.
pub fn parse_override(text: &str) -> Result<(Vec<String>, Value)> {
    let (path, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::config(text, "override must look like key.path=value"))?;
    let path: Vec<String> = path.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(Error::config(text, "empty key in override path"));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((path, value))
}

/// Sets `path` inside `root`, creating intermediate tables.
pub fn apply_override(root: &mut Table, path: &[String], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().ok_or_else(|| Error::config("", "empty override path"))?;
    let mut cur = root;
    for (i, key) in parents.iter().enumerate() {
        let entry = cur.entry(key.clone()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(path[..=i].join("."), "is not a table"))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

fn typed<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let field = match (prefix.is_empty(), inner == ".") {
            (true, _) => inner,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix}.{inner}"),
        };
        Error::config(field, e.into_inner().to_string())
    })
}

/// Parses config text and applies overrides.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ScenarioConfig> {
    let mut root: Table = toml::from_str(text).map_err(|e| Error::config("<file>", e.message().to_string()))?;
    for o in overrides {
        let (path, value) = parse_override(o)?;
        apply_override(&mut root, &path, value)?;
    }
    typed(Value::Table(root), "")
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut Table, patch: &Table) {
    for (k, v) in patch {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(p)) => merge(b, p),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn to_table<T: Serialize>(v: &T) -> Table {
    match Value::try_from(v).expect("serializable") {
        Value::Table(t) => t,
        _ => unreachable!("structs serialize to tables"),
    }
}

fn log_grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop > start) || points < 2 {
        return Err(Error::config("sweep", "need 0 < distance_start_m < distance_stop_m and distance_points >= 2"));
    }
    let ratio = (stop / start).powf(1.0 / (points - 1) as f64);
    Ok((0..points)
        .map(|i| ((start * ratio.powi(i as i32)) * 10.0).round() / 10.0)
        .collect())
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl ScenarioConfig {
    /// Applies defaults and validates every resulting scenario.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let profiles = load_profiles()?;
        let seed = self.seed.unwrap_or(1);
        let sweep = self.sweep.clone().unwrap_or_default();
        let technologies = self.technologies.clone().unwrap_or_else(|| TechnologyId::ALL.to_vec());
        if technologies.is_empty() {
            return Err(Error::config("technologies", "must not be empty"));
        }

        // Split [channel] between the link budget and the fading model.
        let probe = LinkScenario::for_technology(profile(&profiles, TechnologyId::NrV2x));
        let link_keys = to_table(&probe.link);
        let model_keys = to_table(&probe.channel);
        let (mut link_patch, mut model_patch) = (Table::new(), Table::new());
        for (k, v) in self.channel.iter().flatten() {
            if link_keys.contains_key(k) {
                link_patch.insert(k.clone(), v.clone());
            } else if model_keys.contains_key(k) {
                model_patch.insert(k.clone(), v.clone());
            } else {
                return Err(Error::config(format!("channel.{k}"), "unknown field"));
            }
        }
        if let Some(s) = &self.scenario {
            for k in ["link", "channel", "seed", "technology"] {
                if s.contains_key(k) {
                    return Err(Error::config(format!("scenario.{k}"), "set this through its own section or the top level"));
                }
            }
        }

        let fcs: Vec<Option<f64>> = match &sweep.fc_hz {
            Some(v) if !v.is_empty() => v.iter().copied().map(Some).collect(),
            _ => vec![None],
        };
        let powers: Vec<Option<f64>> = match &sweep.tx_power_dbm {
            Some(v) if !v.is_empty() => v.iter().copied().map(Some).collect(),
            _ => vec![None],
        };
        let grid = match (sweep.distance_start_m, sweep.distance_stop_m, sweep.distance_points) {
            (Some(a), Some(b), Some(n)) => Some(log_grid(a, b, n)?),
            (None, None, None) => None,
            _ => {
                return Err(Error::config(
                    "sweep",
                    "distance_start_m, distance_stop_m and distance_points go together",
                ))
            }
        };

        let mut scenarios = Vec::new();
        for &tech in &technologies {
            let base = LinkScenario::for_technology(profile(&profiles, tech));
            let mut t = to_table(&base);
            if let Some(s) = &self.scenario {
                merge(&mut t, s);
            }
            if let Some(Value::Table(l)) = t.get_mut("link") {
                merge(l, &link_patch);
            }
            if let Some(Value::Table(c)) = t.get_mut("channel") {
                merge(c, &model_patch);
            }
            let mut scenario: LinkScenario = typed(Value::Table(t), "scenario")?;
            // A codec sized for the default packet follows a packet-size change.
            if self.scenario.as_ref().is_some_and(|s| s.contains_key("packet_info_bits") && !s.contains_key("codec")) {
                scenario.codec.info_block_bits = scenario.packet_info_bits;
            }
            scenario.seed = seed;
            if let Some(g) = &grid {
                scenario.distances_m = g.clone();
            }
            for &fc in &fcs {
                for &p in &powers {
                    let mut s = scenario.clone();
                    if let Some(fc) = fc {
                        s.link.fc_hz = fc;
                    }
                    if let Some(p) = p {
                        s.link.tx_power_dbm = p;
                    }
                    s.validate()?;
                    let id = format!("{}_{}MHz_{}dBm", tech, fmt_num(s.link.fc_hz / 1e6), fmt_num(s.link.tx_power_dbm));
                    scenarios.push(ResolvedScenario { id, scenario: s });
                }
            }
        }

        let cases = load_use_cases()?;
        let comp = self.compliance.clone().unwrap_or_default();
        let use_cases = match comp.use_cases {
            Some(names) => {
                for n in &names {
                    if !cases.iter().any(|c| &c.name == n) {
                        return Err(Error::config("compliance.use_cases", format!("unknown use case `{n}`")));
                    }
                }
                // keep table order whatever order the file lists them in
                cases.iter().filter(|c| names.contains(&c.name)).map(|c| c.name.clone()).collect()
            }
            None => cases.iter().map(|c| c.name.clone()).collect(),
        };
        let compliance = ComplianceOptions {
            modes: comp.modes.unwrap_or_else(|| ComplianceMode::BOTH.to_vec()),
            rate_rule: comp.rate_rule.unwrap_or_default(),
            use_cases,
        };
        if compliance.modes.is_empty() {
            return Err(Error::config("compliance.modes", "must not be empty"));
        }

        let sps_table = self.sps.clone().unwrap_or_default();
        let mode: SpsMode = match sps_table.get("mode") {
            Some(v) => typed(v.clone(), "sps.mode")?,
            None => SpsMode::LteMode4,
        };
        let mut sps_base = SpsConfig::new(mode);
        sps_base.seed = seed;
        let mut t = to_table(&sps_base);
        merge(&mut t, &sps_table);
        let sps: SpsConfig = typed(Value::Table(t), "sps")?;
        sps.validate()?;

        Ok(ResolvedConfig {
            name: self.name.clone().unwrap_or_else(|| "custom".into()),
            description: self.description.clone().unwrap_or_default(),
            seed,
            workers: self.workers.unwrap_or(0),
            compliance,
            sps,
            scenarios,
        })
    }
}

/// Parses and resolves config text in one step.
pub fn resolve_text(text: &str, overrides: &[String]) -> Result<ResolvedConfig> {
    parse_config(text, overrides)?.resolve()
}

/// Resolves every shipped preset; used by the data validator.
pub fn validate_presets() -> Result<Vec<(String, ResolvedConfig)>> {
    PRESETS
        .iter()
        .map(|(name, text)| {
            resolve_text(text, &[])
                .map(|r| (name.to_string(), r))
                .map_err(|e| Error::Integrity {
                    source_name: format!("preset {name}"),
                    message: e.to_string(),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linksim::{AntennaScheme, EstimatorKind};

    #[test]
    fn empty_config_gives_all_technologies_at_defaults() {
        let r = resolve_text("", &[]).unwrap();
        assert_eq!(r.scenarios.len(), 5);
        let profiles = load_profiles().unwrap();
        let expect = LinkScenario::for_technology(profile(&profiles, TechnologyId::Dmr));
        assert_eq!(r.scenarios[2].scenario, expect);
        assert_eq!(r.compliance.use_cases.len(), 13);
        assert_eq!(r.sps, SpsConfig::new(SpsMode::LteMode4));
    }

    #[test]
    fn sections_override_defaults() {
        let text = r#"
            technologies = ["NR-V2X"]
            seed = 9
            [scenario]
            antenna_scheme = "alamouti2x2"
            max_retransmissions = 1
            estimator = "conditional"
            [channel]
            tx_power_dbm = 30.0
            fading_blocks = 2
            [sweep]
            fc_hz = [450e6, 900e6]
        "#;
        let r = resolve_text(text, &[]).unwrap();
        assert_eq!(r.scenarios.len(), 2);
        let s = &r.scenarios[1].scenario;
        assert_eq!(r.scenarios[1].id, "NR-V2X_900MHz_30dBm");
        assert_eq!(s.antenna_scheme, AntennaScheme::Alamouti2x2);
        assert_eq!(s.estimator, EstimatorKind::Conditional);
        assert_eq!((s.max_retransmissions, s.seed, s.channel.fading_blocks), (1, 9, 2));
        assert_eq!(s.link.fc_hz, 900e6);
        // untouched budget fields keep the technology default
        assert_eq!(s.link.noise_figure_db, 9.0);
    }

    #[test]
    fn unknown_keys_name_their_path() {
        for (text, field) in [
            ("bogus = 1", "bogus"),
            ("[channel]\ntx_powr_dbm = 3.0", "channel.tx_powr_dbm"),
            ("[scenario]\nstop = { unit_trials = 8, extra = 1 }", "scenario.stop.extra"),
            ("[sps]\nslots = 3", "sps.slots"),
        ] {
            match resolve_text(text, &[]) {
                Err(Error::Config { field: f, .. }) => assert!(f.contains(field), "{f} vs {field}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn overrides_use_dotted_paths() {
        let r = resolve_text("", &["channel.tx_power_dbm=30".into(), "technologies=[\"DMR\"]".into()]).unwrap();
        assert_eq!(r.scenarios.len(), 1);
        assert_eq!(r.scenarios[0].scenario.link.tx_power_dbm, 30.0);
        let r = resolve_text("", &["sps.mode=nr".into()]).unwrap();
        assert_eq!(r.sps.mode, SpsMode::NrMode2);
        assert_eq!(r.sps.slot_ms, 0.5);
        assert!(parse_override("novalue").is_err());
        assert!(resolve_text("", &["channel.tx_power_dbm=loud".into()]).is_err());
    }

    #[test]
    fn packet_size_change_resizes_codec() {
        let r = resolve_text("[scenario]\npacket_info_bits = 200", &[]).unwrap();
        assert!(r.scenarios.iter().all(|s| s.scenario.codec.info_block_bits == 200));
    }

    #[test]
    fn distance_grid_is_log_spaced() {
        let g = log_grid(10.0, 1000.0, 3).unwrap();
        assert_eq!(g, vec![10.0, 100.0, 1000.0]);
        assert!(resolve_text("[sweep]\ndistance_start_m = 10.0", &[]).is_err());
    }

    #[test]
    fn hash_ignores_workers_only() {
        let a = resolve_text("workers = 1", &[]).unwrap();
        let b = resolve_text("workers = 8", &[]).unwrap();
        let c = resolve_text("seed = 2", &[]).unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_ne!(a.config_hash(), c.config_hash());
        let back: ResolvedConfig = toml::from_str(&a.to_toml()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn every_preset_resolves() {
        let all = validate_presets().unwrap();
        assert_eq!(all.len(), PRESETS.len());
        let get = |n: &str| all.iter().find(|(name, _)| name == n).unwrap().1.clone();
        assert_eq!(get("fig2").scenarios.len(), 5);
        assert_eq!(get("fig3").scenarios.len(), 15);
        assert_eq!(get("fig4").scenarios.len(), 8);
        assert_eq!(get("baseline").scenarios.len(), 5);
        let e = get("enhanced-900");
        assert_eq!(e.scenarios.len(), 1);
        let s = &e.scenarios[0].scenario;
        assert_eq!((s.technology, s.link.fc_hz, s.antenna_scheme, s.max_retransmissions), (TechnologyId::NrV2x, 900e6, AntennaScheme::Alamouti2x2, 3));
        assert_eq!(get("sps-nr").sps.mode, SpsMode::NrMode2);
    }
}
