//! `linksim`: batch front end for sweeps, compliance scoring and the SPS
//! simulator.
//!
//! Exit codes: 0 success, 1 runtime failure or failed expectation, 2 bad
//! input (config, data file, usage).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::Serialize;

use linksim_core::coding::{Codec, CodecSpec};
use linksim_core::compliance::{verdict_matrix, ScenarioResult};
use linksim_core::config::{preset_text, resolve_text, validate_presets, ResolvedConfig, PRESETS};
use linksim_core::linksim::{sweep, sweep_with_workers, LinkCurve};
use linksim_core::montecarlo::split_stream;
use linksim_core::sps::run_sps;
use linksim_core::techprofiles::{
    load_profiles, load_profiles_from, load_use_cases, load_use_cases_from, profile, use_case, CodingScheme,
};
use linksim_core::Error;

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "LINKSIM_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "linksim-out";

#[derive(Parser)]
#[command(name = "linksim", version, about = "Railway off-network link and sidelink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Data-file utilities.
    Data {
        #[command(subcommand)]
        action: DataAction,
    },
    /// Codec checks.
    Codec {
        #[command(subcommand)]
        action: CodecAction,
    },
    /// BER / reliability versus distance for every scenario of a config.
    Sweep(RunArgs),
    /// Verdict matrix of the config's scenarios against the use cases.
    Comply {
        #[command(flatten)]
        run: RunArgs,
        /// Use case that must pass in every mode (repeatable; `all` for every one
        /// not listed under --expect-fail).
        #[arg(long = "expect-pass")]
        expect_pass: Vec<String>,
        /// Use case that must fail in every mode (repeatable).
        #[arg(long = "expect-fail")]
        expect_fail: Vec<String>,
    },
    /// Semi-persistent scheduling simulation.
    Sps {
        #[command(flatten)]
        run: RunArgs,
        /// Sidelink flavour: `lte` or `nr`.
        #[arg(long)]
        mode: Option<String>,
    },
}

#[derive(Subcommand)]
enum DataAction {
    /// Parses and checks the technology and use-case tables and every preset.
    Validate {
        #[arg(long)]
        technologies: Option<PathBuf>,
        #[arg(long = "use-cases")]
        use_cases: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CodecAction {
    /// Noiseless round trip and rate check for all five coding schemes.
    Selftest {
        #[arg(long, default_value_t = 100)]
        blocks: usize,
        #[arg(long, default_value_t = 1000)]
        info_bits: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Shipped preset name instead of a file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Dotted override applied after parsing, e.g. `channel.tx_power_dbm=30`.
    #[arg(long = "set")]
    overrides: Vec<String>,
    /// Worker threads (0 = all cores); never changes results.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (default: $LINKSIM_OUT_DIR, else ./linksim-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Input(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Parse { .. } | Error::Integrity { .. } => Failure::Input(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Data {
            action: DataAction::Validate { technologies, use_cases },
        } => data_validate(technologies.as_deref(), use_cases.as_deref()),
        Command::Codec {
            action: CodecAction::Selftest { blocks, info_bits },
        } => codec_selftest(blocks, info_bits),
        Command::Sweep(run) => cmd_sweep(&run),
        Command::Comply {
            run,
            expect_pass,
            expect_fail,
        } => cmd_comply(&run, &expect_pass, &expect_fail),
        Command::Sps { run, mode } => cmd_sps(&run, mode.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn data_validate(technologies: Option<&Path>, use_cases: Option<&Path>) -> CliResult<()> {
    let profiles = match technologies {
        Some(p) => load_profiles_from(p)?,
        None => load_profiles()?,
    };
    let cases = match use_cases {
        Some(p) => load_use_cases_from(p)?,
        None => load_use_cases()?,
    };
    let presets = validate_presets()?;
    println!("technologies: {} records ok", profiles.len());
    println!("use cases: {} records ok", cases.len());
    for (name, r) in &presets {
        println!("preset {name}: {} scenarios, hash {}", r.scenarios.len(), r.config_hash());
    }
    Ok(())
}

fn codec_selftest(blocks: usize, info_bits: usize) -> CliResult<()> {
    let mut rng = split_stream(0x5e1f_7e57, 0);
    let mut failed = false;
    for scheme in [
        CodingScheme::Convolutional,
        CodingScheme::Rcpc,
        CodingScheme::Trellis,
        CodingScheme::Turbo,
        CodingScheme::Ldpc,
    ] {
        // LDPC block lengths come in multiples of five
        let k = if scheme == CodingScheme::Ldpc { info_bits.div_ceil(5) * 5 } else { info_bits };
        let codec = Codec::new(&CodecSpec::new(scheme, k))?;
        let mut errors = 0usize;
        for _ in 0..blocks {
            let info: Vec<u8> = (0..k).map(|_| rng.random_range(0..2u8)).collect();
            let coded = codec.encode(&info)?;
            let llrs: Vec<f64> = coded.iter().map(|&b| if b == 0 { 20.0 } else { -20.0 }).collect();
            if codec.decode(&llrs)? != info {
                errors += 1;
            }
        }
        let net = (codec.coded_len() - codec.termination_bits()) as f64 / k as f64;
        let ok = errors == 0 && (net - 3.0).abs() < 1e-12;
        failed |= !ok;
        println!(
            "{:<14} k={k:<5} n={:<5} net rate 1/{net} round-trip failures {errors}/{blocks} {}",
            format!("{scheme:?}"),
            codec.coded_len(),
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if failed {
        Err(Failure::Runtime("codec self-test failed".into()))
    } else {
        Ok(())
    }
}

fn load_config(run: &RunArgs, extra: &[String]) -> CliResult<ResolvedConfig> {
    let text = match (&run.config, &run.preset) {
        (Some(path), _) => {
            fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read config {}: {e}", path.display())))?
        }
        (None, Some(name)) => preset_text(name)
            .ok_or_else(|| {
                let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                Failure::Input(format!("unknown preset `{name}` (available: {})", names.join(", ")))
            })?
            .to_string(),
        (None, None) => String::new(),
    };
    let mut overrides = run.overrides.clone();
    overrides.extend_from_slice(extra);
    let mut resolved = resolve_text(&text, &overrides)?;
    if let Some(w) = run.workers {
        resolved.workers = w;
    }
    Ok(resolved)
}

fn require_config(run: &RunArgs) -> CliResult<()> {
    if run.config.is_none() && run.preset.is_none() {
        return Err(Failure::Input("give --config <file> or --preset <name>".into()));
    }
    Ok(())
}

fn out_dir(run: &RunArgs, name: &str) -> CliResult<PathBuf> {
    let base = run
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let dir = base.join(name);
    fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    tool_version: &'a str,
    config_hash: String,
    seed: u64,
    outputs: Vec<String>,
    notes: Vec<&'a str>,
    config: &'a ResolvedConfig,
}

const RELIABILITY_NOTE: &str = "reliability is per packet in both compliance modes";

fn write_metadata(dir: &Path, command: &str, cfg: &ResolvedConfig, outputs: Vec<String>, notes: Vec<&str>) -> CliResult<()> {
    let meta = Metadata {
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        outputs,
        notes,
        config: cfg,
    };
    let text = toml::to_string(&meta).map_err(|e| Failure::Runtime(e.to_string()))?;
    write(&dir.join(format!("{command}.meta.toml")), &text)
}

fn run_sweeps(cfg: &ResolvedConfig) -> CliResult<Vec<(String, LinkCurve)>> {
    let mut out = Vec::with_capacity(cfg.scenarios.len());
    for s in &cfg.scenarios {
        eprintln!("sweeping {} ({} distances)", s.id, s.scenario.distances_m.len());
        let curve = if cfg.workers == 0 {
            sweep(&s.scenario)?
        } else {
            sweep_with_workers(&s.scenario, cfg.workers)?
        };
        out.push((s.id.clone(), curve));
    }
    Ok(out)
}

fn cmd_sweep(run: &RunArgs) -> CliResult<()> {
    require_config(run)?;
    let cfg = load_config(run, &[])?;
    let dir = out_dir(run, &cfg.name)?;
    let hash = cfg.config_hash();
    let mut outputs = Vec::new();
    for (id, curve) in run_sweeps(&cfg)? {
        let file = format!("sweep_{id}.csv");
        write(&dir.join(&file), &curve.to_csv(&hash))?;
        outputs.push(file);
    }
    write_metadata(&dir, "sweep", &cfg, outputs, vec![])
}

fn cmd_comply(run: &RunArgs, expect_pass: &[String], expect_fail: &[String]) -> CliResult<()> {
    require_config(run)?;
    let cfg = load_config(run, &[])?;
    let all_cases = load_use_cases()?;
    for name in expect_pass.iter().chain(expect_fail).filter(|n| n.as_str() != "all") {
        if use_case(&all_cases, name).is_none() {
            return Err(Failure::Input(format!("unknown use case `{name}`")));
        }
    }
    let cases: Vec<_> = all_cases
        .iter()
        .filter(|c| cfg.compliance.use_cases.contains(&c.name))
        .cloned()
        .collect();
    let profiles = load_profiles()?;
    let results: Vec<ScenarioResult> = run_sweeps(&cfg)?
        .into_iter()
        .map(|(id, curve)| ScenarioResult {
            peak_rate_bps: profile(&profiles, curve.scenario.technology).peak_rate_bps,
            id,
            curve,
        })
        .collect();
    let mut matrix = verdict_matrix(&results, &cases, cfg.compliance.rate_rule)?;
    matrix.verdicts.retain(|v| cfg.compliance.modes.contains(&v.mode));
    let dir = out_dir(run, &cfg.name)?;
    write(&dir.join("verdicts.csv"), &matrix.to_csv(&cfg.config_hash()))?;
    for &mode in &cfg.compliance.modes {
        println!("\n[{}] P = pass; otherwise failing checks: L latency, R rate, D reliable range", mode.as_str());
        print!("{}", matrix.to_grid(mode));
    }
    write_metadata(&dir, "comply", &cfg, vec!["verdicts.csv".into()], vec![RELIABILITY_NOTE])?;

    let mut violations = Vec::new();
    let pass_all = expect_pass.iter().any(|n| n == "all");
    for v in &matrix.verdicts {
        let want_fail = expect_fail.contains(&v.use_case);
        let want_pass = !want_fail && (pass_all || expect_pass.contains(&v.use_case));
        if (want_pass && !v.pass()) || (want_fail && v.pass()) {
            violations.push(format!(
                "{} / {} [{}]: expected {}",
                v.scenario_id,
                v.use_case,
                v.mode.as_str(),
                if want_pass { "pass" } else { "fail" }
            ));
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        for v in &violations {
            eprintln!("expectation violated: {v}");
        }
        Err(Failure::Runtime(format!("{} expectation(s) violated", violations.len())))
    }
}

fn cmd_sps(run: &RunArgs, mode: Option<&str>) -> CliResult<()> {
    let extra: Vec<String> = mode.map(|m| format!("sps.mode=\"{m}\"")).into_iter().collect();
    let cfg = load_config(run, &extra)?;
    let metrics = run_sps(&cfg.sps)?;
    let dir = out_dir(run, &cfg.name)?;
    write(&dir.join("sps.csv"), &metrics.to_csv(&cfg.config_hash(), cfg.sps.seed))?;
    println!(
        "transmissions {} collision rate {:.4} reselections {} half-duplex losses {}",
        metrics.transmissions, metrics.collision_rate, metrics.reselections, metrics.half_duplex_losses
    );
    write_metadata(&dir, "sps", &cfg, vec!["sps.csv".into()], vec![])
}
