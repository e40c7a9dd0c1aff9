//! Scenario configuration: flag / config-file / environment merging with the
//! precedence flag > file > CALABI_OUT > built-in default, and validation of
//! everything the flow layer would otherwise reject mid-run.

use crate::ScenarioArgs;
use calabiflow_core::flow::RunConfig;
use calabiflow_core::geometry::{self, KahlerClass, ManifoldParams};
use calabiflow_core::profile::MIN_GRID;
use std::fmt;
use std::path::{Path, PathBuf};

/// Errors split by exit code: usage problems exit 2, run failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Run(msg) => write!(f, "{msg}"),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}

/// A fully resolved, validated scenario. `snapshot_interval` and
/// `t_stop_margin` are stored resolved (never None) so a persisted scenario
/// reproduces the run exactly.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub params: ManifoldParams,
    pub cls0: KahlerClass,
    pub m: usize,
    pub cfl: f64,
    pub t_stop_margin: f64,
    pub snapshot_interval: f64,
    pub out_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn t_sing(&self) -> f64 {
        geometry::singular_time(self.params, self.cls0)
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            params: self.params,
            cls0: self.cls0,
            m: self.m,
            cfl: self.cfl,
            t_stop: self.t_sing() - self.t_stop_margin,
            snapshot_interval: self.snapshot_interval,
        }
    }

    /// Flat key=value rendering, readable back by [`parse_kv_text`]. Floats
    /// use shortest-roundtrip formatting, so nothing is lost.
    pub fn to_kv_text(&self) -> String {
        format!(
            "n = {}\nk = {}\na0 = {:?}\nb0 = {:?}\ngrid = {}\ncfl = {:?}\n\
             t_stop_margin = {:?}\nsnapshot_interval = {:?}\n",
            self.params.n(),
            self.params.k(),
            self.cls0.a(),
            self.cls0.b(),
            self.m,
            self.cfl,
            self.t_stop_margin,
            self.snapshot_interval,
        )
    }
}

/// Pre-merge option bag. Field names double as flag names; the config-file
/// spelling of `m` is `grid`.
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    pub n: Option<u32>,
    pub k: Option<u32>,
    pub a0: Option<f64>,
    pub b0: Option<f64>,
    pub m: Option<usize>,
    pub cfl: Option<f64>,
    pub t_stop_margin: Option<f64>,
    pub snapshot_interval: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

impl RawConfig {
    fn apply_kv(&mut self, key: &str, value: &str, source: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str, source: &str) -> Result<T> {
            value.parse().map_or_else(
                |_| {
                    usage(format!(
                        "invalid value `{value}` for key `{key}` in {source}"
                    ))
                },
                Ok,
            )
        }
        match key {
            "n" => self.n = Some(parse(key, value, source)?),
            "k" => self.k = Some(parse(key, value, source)?),
            "a0" => self.a0 = Some(parse(key, value, source)?),
            "b0" => self.b0 = Some(parse(key, value, source)?),
            "grid" => self.m = Some(parse(key, value, source)?),
            "cfl" => self.cfl = Some(parse(key, value, source)?),
            "t_stop_margin" => self.t_stop_margin = Some(parse(key, value, source)?),
            "snapshot_interval" => self.snapshot_interval = Some(parse(key, value, source)?),
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            _ => return usage(format!("unknown key `{key}` in {source}")),
        }
        Ok(())
    }

    /// Overlays `self` (higher precedence) onto `base`.
    fn or(self, base: RawConfig) -> RawConfig {
        RawConfig {
            n: self.n.or(base.n),
            k: self.k.or(base.k),
            a0: self.a0.or(base.a0),
            b0: self.b0.or(base.b0),
            m: self.m.or(base.m),
            cfl: self.cfl.or(base.cfl),
            t_stop_margin: self.t_stop_margin.or(base.t_stop_margin),
            snapshot_interval: self.snapshot_interval.or(base.snapshot_interval),
            out_dir: self.out_dir.or(base.out_dir),
        }
    }
}

impl From<&ScenarioArgs> for RawConfig {
    fn from(args: &ScenarioArgs) -> Self {
        RawConfig {
            n: args.n,
            k: args.k,
            a0: args.a0,
            b0: args.b0,
            m: args.m,
            cfl: args.cfl,
            t_stop_margin: args.t_stop_margin,
            snapshot_interval: args.snapshot_interval,
            out_dir: args.out_dir.clone(),
        }
    }
}

/// Parses flat `key = value` text (one pair per line, `#` comments, blank
/// lines ignored). `source` names the file in error messages.
pub fn parse_kv_text(text: &str, source: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::default();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return usage(format!(
                "{source}:{}: expected `key = value`, got `{line}`",
                idx + 1
            ));
        };
        raw.apply_kv(key.trim(), value.trim(), source)?;
    }
    Ok(raw)
}

pub fn read_kv_file(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_kv_text(&text, &path.display().to_string())
}

/// Resolves the output directory alone (for `certify`, which takes the rest
/// of the scenario from the directory itself): flag > config file >
/// CALABI_OUT > ./out.
pub fn resolve_out_dir(out_dir: Option<&Path>, config: Option<&Path>) -> Result<PathBuf> {
    if let Some(dir) = out_dir {
        return Ok(dir.to_path_buf());
    }
    if let Some(path) = config {
        if let Some(dir) = read_kv_file(path)?.out_dir {
            return Ok(dir);
        }
    }
    Ok(env_or_default_out_dir())
}

fn env_or_default_out_dir() -> PathBuf {
    std::env::var_os("CALABI_OUT").map_or_else(|| PathBuf::from("./out"), PathBuf::from)
}

/// Full scenario resolution for `classify` / `run` / batch lines.
pub fn resolve(args: &ScenarioArgs) -> Result<ScenarioConfig> {
    let mut raw = RawConfig::from(args);
    if let Some(path) = &args.config {
        raw = raw.or(read_kv_file(path)?);
    }
    finalize(raw)
}

/// Turns a merged option bag into a validated scenario.
pub fn finalize(raw: RawConfig) -> Result<ScenarioConfig> {
    let missing: Vec<&str> = [
        ("--n", raw.n.is_none()),
        ("--k", raw.k.is_none()),
        ("--a0", raw.a0.is_none()),
        ("--b0", raw.b0.is_none()),
    ]
    .iter()
    .filter_map(|&(name, gone)| gone.then_some(name))
    .collect();
    if !missing.is_empty() {
        return usage(format!("missing required flag(s): {}", missing.join(", ")));
    }
    let params = ManifoldParams::new(raw.n.unwrap(), raw.k.unwrap())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let cls0 = KahlerClass::new(raw.a0.unwrap(), raw.b0.unwrap())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let m = raw.m.unwrap_or(401);
    if m < MIN_GRID {
        return usage(format!("grid size m = {m} below the minimum {MIN_GRID}"));
    }
    let cfl = raw.cfl.unwrap_or(0.4);
    if !(cfl > 0.0 && cfl < 1.0) {
        return usage(format!("cfl = {cfl} outside (0, 1)"));
    }
    let t_sing = geometry::singular_time(params, cls0);
    let t_stop_margin = raw.t_stop_margin.unwrap_or(1e-3);
    if !(t_stop_margin > 0.0 && t_stop_margin <= t_sing) {
        return usage(format!(
            "t_stop_margin = {t_stop_margin} outside (0, T] with T = {t_sing}"
        ));
    }
    let snapshot_interval = raw.snapshot_interval.unwrap_or(t_sing / 50.0);
    if !(snapshot_interval > 0.0) {
        return usage(format!(
            "snapshot_interval = {snapshot_interval} must be positive"
        ));
    }
    let out_dir = raw.out_dir.unwrap_or_else(env_or_default_out_dir);
    Ok(ScenarioConfig {
        params,
        cls0,
        m,
        cfl,
        t_stop_margin,
        snapshot_interval,
        out_dir,
    })
}
