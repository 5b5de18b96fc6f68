//! Scenario files: TOML with `[system]`, `[environment]`, `[grid]`, `[mc]`,
//! `[truncation]`, `[pde]` and `[output]` tables plus top-level `scenario`
//! and `p_max` keys.
//!
//! ```toml
//! scenario = "compare-all"
//!
//! [system]
//! omega = 1.0
//! mu = 0.1
//! hbar = 1.0
//! alpha_re = 2.0
//! alpha_im = 0.0
//!
//! [environment]
//! temperature = 1.0
//! k_b = 1.0
//! modes = [{ omega = 1.0, g = 0.05 }, { omega = 1.5, g = 0.08 }]
//!
//! [grid]
//! t_start = 0.0
//! t_end = 31.41592653589793
//! n_points = 100
//! ```
//!
//! An identical-mode bath may be written as
//! `identical = { n_modes = 50, omega_e = 1.0, g = 0.05 }` instead of `modes`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::Error;
use crate::params::{EnvMode, EnvironmentSpec, SystemParams};

/// Config problem, with the offending field and its line when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        Self { field: None, line: None, message: message.into() }
    }

    fn at(field: &str, message: impl Into<String>) -> Self {
        Self { field: Some(field.to_string()), line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error")?;
        if let Some(field) = &self.field {
            write!(f, " in `{field}`")?;
        }
        if let Some(line) = self.line {
            write!(f, " (line {line})")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Closed,
    ExactOpen,
    Mc,
    Perturbative,
    Oracle,
    PdeCheck,
    CompareAll,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Closed => "closed",
            Scenario::ExactOpen => "exact-open",
            Scenario::Mc => "mc",
            Scenario::Perturbative => "perturbative",
            Scenario::Oracle => "oracle",
            Scenario::PdeCheck => "pde-check",
            Scenario::CompareAll => "compare-all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub omega: f64,
    pub mu: f64,
    pub hbar: f64,
    pub alpha_re: f64,
    #[serde(default)]
    pub alpha_im: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeBlock {
    pub omega: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdenticalBlock {
    pub n_modes: usize,
    pub omega_e: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentBlock {
    pub modes: Option<Vec<ModeBlock>>,
    pub identical: Option<IdenticalBlock>,
    pub temperature: f64,
    #[serde(default = "one")]
    pub k_b: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub t_start: f64,
    pub t_end: f64,
    pub n_points: usize,
}

impl GridBlock {
    pub fn times(&self) -> Vec<f64> {
        let n = self.n_points;
        let span = self.t_end - self.t_start;
        (0..n)
            .map(|k| if k + 1 == n { self.t_end } else { self.t_start + span * k as f64 / (n - 1) as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationBlock {
    pub tail_tol: f64,
    pub n_max: Option<usize>,
    pub mu_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeBlock {
    #[serde(default = "default_step")]
    pub h: f64,
    #[serde(default = "default_step")]
    pub dt: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_pde_points")]
    pub points: usize,
    #[serde(default)]
    pub seed: u64,
    /// Bound on `|u|`, `|v|` of the random evaluation points.
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_step() -> f64 {
    1e-4
}
fn default_tolerance() -> f64 {
    1e-5
}
fn default_pde_points() -> usize {
    20
}
fn default_radius() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Trajectory CSV; standard output when absent.
    pub csv: Option<PathBuf>,
    /// JSON report.
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub system: SystemBlock,
    pub environment: Option<EnvironmentBlock>,
    pub grid: GridBlock,
    pub mc: Option<McBlock>,
    pub truncation: Option<TruncationBlock>,
    pub pde: Option<PdeBlock>,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default = "default_p_max")]
    pub p_max: u32,
}

fn default_p_max() -> u32 {
    2
}

/// A parsed, validated config together with the merged table it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub table: Table,
    pub system: SystemParams,
    pub env: EnvironmentSpec,
}

impl LoadedConfig {
    /// Parse `text`, apply `--key=value` overrides and validate.
    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table = Table::from_str(text).map_err(|e| ConfigError::new(e.to_string().trim_end()))?;
        for raw in overrides {
            apply_override(&mut table, raw)?;
        }
        let config = match Value::Table(table.clone()).try_into::<ScenarioConfig>() {
            Ok(c) => c,
            Err(e) => {
                // Re-parsing the file text recovers the line when the file
                // itself is at fault.
                if let Err(spanned) = toml::from_str::<ScenarioConfig>(text) {
                    if overrides.is_empty() || spanned.message() == e.message() {
                        return Err(ConfigError::new(spanned.to_string().trim_end()));
                    }
                }
                let mut err = ConfigError::new(e.message().to_string());
                err.field = culprit_override(text, overrides);
                return Err(err);
            }
        };
        Self::validate(config, table).map_err(|mut e| {
            if let (Some(field), None) = (&e.field, e.line) {
                e.line = locate(text, field);
            }
            e
        })
    }

    fn validate(config: ScenarioConfig, table: Table) -> Result<Self, ConfigError> {
        let s = &config.system;
        let system = SystemParams::new(s.omega, s.mu, s.hbar, Complex64::new(s.alpha_re, s.alpha_im))
            .map_err(|e| match e {
                Error::InvalidParameter { name: "alpha0", reason } => ConfigError::at("system.alpha_re", reason),
                Error::InvalidParameter { name, reason } => ConfigError::at(&format!("system.{name}"), reason),
                other => ConfigError::new(other.to_string()),
            })?;
        let env = build_environment(config.environment.as_ref())?;

        let g = &config.grid;
        if !(g.t_start.is_finite() && g.t_end.is_finite()) {
            return Err(ConfigError::at("grid.t_end", "grid bounds must be finite"));
        }
        if !(g.t_end > g.t_start) {
            return Err(ConfigError::at(
                "grid.t_end",
                format!("must exceed t_start = {}, got {}", g.t_start, g.t_end),
            ));
        }
        if g.n_points < 2 {
            return Err(ConfigError::at("grid.n_points", format!("must be >= 2, got {}", g.n_points)));
        }

        let needs_mc = matches!(config.scenario, Scenario::Mc | Scenario::CompareAll);
        let needs_trunc = matches!(config.scenario, Scenario::Oracle | Scenario::CompareAll);
        if needs_mc {
            let mc = config.mc.as_ref().ok_or_else(|| {
                ConfigError::at("mc", format!("scenario `{}` needs an [mc] table", config.scenario.name()))
            })?;
            if mc.samples == 0 {
                return Err(ConfigError::at("mc.samples", "must be >= 1"));
            }
        }
        if needs_trunc {
            let tr = config.truncation.as_ref().ok_or_else(|| {
                ConfigError::at(
                    "truncation",
                    format!("scenario `{}` needs a [truncation] table", config.scenario.name()),
                )
            })?;
            if !(tr.tail_tol > 0.0 && tr.tail_tol < 1.0) {
                return Err(ConfigError::at("truncation.tail_tol", format!("must lie in (0, 1), got {}", tr.tail_tol)));
            }
        }
        if config.scenario == Scenario::PdeCheck {
            let pde = config.pde.as_ref().ok_or_else(|| ConfigError::at("pde", "scenario `pde-check` needs a [pde] table"))?;
            for (name, v) in [("pde.h", pde.h), ("pde.dt", pde.dt), ("pde.tolerance", pde.tolerance), ("pde.radius", pde.radius)] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(ConfigError::at(name, format!("must be finite and > 0, got {v}")));
                }
            }
            if pde.points == 0 {
                return Err(ConfigError::at("pde.points", "must be >= 1"));
            }
        }
        if config.scenario == Scenario::CompareAll && config.output.report.is_none() {
            return Err(ConfigError::at("output.report", "scenario `compare-all` needs a report path"));
        }
        Ok(Self { config, table, system, env })
    }
}

fn build_environment(block: Option<&EnvironmentBlock>) -> Result<EnvironmentSpec, ConfigError> {
    let Some(b) = block else {
        return Ok(EnvironmentSpec::closed());
    };
    let modes = match (&b.modes, &b.identical) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::at("environment", "give either `modes` or `identical`, not both"))
        }
        (None, None) => Vec::new(),
        (Some(list), None) => list
            .iter()
            .enumerate()
            .map(|(i, m)| EnvMode::new(m.omega, m.g).map_err(|e| ConfigError::at(&format!("environment.modes[{i}]"), e.to_string())))
            .collect::<Result<Vec<_>, _>>()?,
        (None, Some(id)) => {
            let mode = EnvMode::new(id.omega_e, id.g)
                .map_err(|e| ConfigError::at("environment.identical", e.to_string()))?;
            vec![mode; id.n_modes]
        }
    };
    EnvironmentSpec::new(modes, b.temperature, b.k_b).map_err(|e| match e {
        Error::InvalidParameter { name, reason } => ConfigError::at(&format!("environment.{name}"), reason),
        other => ConfigError::new(other.to_string()),
    })
}

/// Apply one `--dotted.key=value` override. Values are read as TOML and fall
/// back to a bare string.
pub fn apply_override(table: &mut Table, raw: &str) -> Result<(), ConfigError> {
    let body = raw
        .strip_prefix("--")
        .ok_or_else(|| ConfigError::new(format!("override `{raw}` must look like --key=value")))?;
    let (key, value) = body
        .split_once('=')
        .ok_or_else(|| ConfigError::new(format!("override `{raw}` must look like --key=value")))?;
    let path: Vec<&str> = key.split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::new(format!("override `{raw}` has an empty key segment")));
    }
    let value = parse_value(value);

    let (last, parents) = path.split_last().expect("split yields at least one segment");
    let mut cursor = table;
    for (depth, part) in parents.iter().enumerate() {
        let entry = cursor.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cursor = entry.as_table_mut().ok_or_else(|| {
            ConfigError::at(&path[..=depth].join("."), format!("override `{raw}`: not a table"))
        })?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

/// Key of the first override after which the table stops deserializing.
fn culprit_override(text: &str, overrides: &[String]) -> Option<String> {
    let mut table = Table::from_str(text).ok()?;
    let mut ok_before = Value::Table(table.clone()).try_into::<ScenarioConfig>().is_ok();
    for raw in overrides {
        apply_override(&mut table, raw).ok()?;
        let ok_now = Value::Table(table.clone()).try_into::<ScenarioConfig>().is_ok();
        if ok_before && !ok_now {
            let key = raw.trim_start_matches('-').split('=').next()?;
            return Some(key.to_string());
        }
        ok_before = ok_now;
    }
    None
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// 1-based line of `field` (`table.key`, `key` or `table`) in the file text.
fn locate(text: &str, field: &str) -> Option<usize> {
    let field = field.split('[').next().unwrap_or(field);
    let (section, key) = match field.rsplit_once('.') {
        Some((s, k)) => (s, Some(k)),
        None => (field, None),
    };
    let mut current = String::new();
    let mut section_line = None;
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(inner) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = inner.trim().to_string();
            if current == section {
                section_line = Some(i + 1);
            }
            continue;
        }
        let Some((k, _)) = l.split_once('=') else { continue };
        let k = k.trim();
        match key {
            Some(key) if current == section && k == key => return Some(i + 1),
            None if current.is_empty() && k == section => return Some(i + 1),
            _ => {}
        }
    }
    section_line
}
