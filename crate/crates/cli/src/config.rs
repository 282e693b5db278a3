//! Sweep configuration: flat `key = value` text with `protocol.*`, `sweep.*`
//! and `engine.*` sections, overlaid by command-line flags.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::path::PathBuf;

use demonsim_core::{CoarseVariant, IonCompositeModel, SigmaMode};

use crate::error::ConfigError;

pub const DEFAULT_SEED: u64 = 7;
pub const SEED_ENV: &str = "DEMONSIM_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolName {
    Szilard,
    Flip,
    Ion,
}

impl ProtocolName {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolName::Szilard => "szilard",
            ProtocolName::Flip => "flip",
            ProtocolName::Ion => "ion",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "szilard" => Some(ProtocolName::Szilard),
            "flip" => Some(ProtocolName::Flip),
            "ion" => Some(ProtocolName::Ion),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub name: ProtocolName,
    pub kappa: f64,
    pub lamb_dicke: f64,
    pub nbar: f64,
    pub n_max: usize,
    pub pulse_area: f64,
}

/// The measurement-error axis: `ε` directly, or pulse angles under `ε = 1 − e^{−ζθ}`.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorAxis {
    Epsilon(Vec<f64>),
    Pulse { zeta: f64, theta: Vec<f64> },
}

impl ErrorAxis {
    pub fn epsilons(&self) -> Vec<f64> {
        match self {
            ErrorAxis::Epsilon(e) => e.clone(),
            ErrorAxis::Pulse { zeta, theta } => {
                theta.iter().map(|t| -(-zeta * t).exp_m1()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineMode {
    Exact,
    MonteCarlo,
    Both,
}

impl EngineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineMode::Exact => "exact",
            EngineMode::MonteCarlo => "montecarlo",
            EngineMode::Both => "both",
        }
    }

    pub fn exact(self) -> bool {
        matches!(self, EngineMode::Exact | EngineMode::Both)
    }

    pub fn monte_carlo(self) -> bool {
        matches!(self, EngineMode::MonteCarlo | EngineMode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub protocol: ProtocolSpec,
    pub theta_c: Vec<f64>,
    pub error_axis: ErrorAxis,
    pub engine: EngineMode,
    pub samples: usize,
    pub seed: u64,
    pub sigma_mode: SigmaMode,
    pub coarse_variant: CoarseVariant,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub timestamp: bool,
}

/// Every recognised key with its default (`None` = required) and help text.
pub const KEYS: &[(&str, Option<&str>, &str)] = &[
    ("protocol.name", None, "szilard | flip | ion"),
    (
        "protocol.kappa",
        Some("0.88"),
        "battery storage efficiency, W_ext = kappa * W_out",
    ),
    (
        "protocol.lamb_dicke",
        Some("0.11"),
        "Lamb-Dicke parameter (ion)",
    ),
    (
        "protocol.nbar",
        Some("0.14"),
        "initial mean phonon number (ion)",
    ),
    ("protocol.n_max", Some("30"), "phonon truncation (ion)"),
    (
        "protocol.pulse_area",
        Some("pi"),
        "red-sideband pulse area; pi transfers |up,0> fully (ion)",
    ),
    (
        "sweep.theta_c",
        Some("pi/3"),
        "preparation angles in (0, pi/2]",
    ),
    (
        "sweep.epsilon",
        Some("0:1:0.05"),
        "measurement error grid (exclusive with sweep.pulse_theta)",
    ),
    (
        "sweep.zeta",
        Some("1.94"),
        "error decay parameter for sweep.pulse_theta",
    ),
    (
        "sweep.pulse_theta",
        None,
        "measurement pulse angles; epsilon = 1 - exp(-zeta*theta)",
    ),
    (
        "sweep.coarse_variant",
        Some("cycle-improper"),
        "marginal | cycle-improper | partial-average",
    ),
    ("sweep.output", None, "output path (stdout when absent)"),
    ("sweep.format", Some("csv"), "csv | json"),
    (
        "sweep.timestamp",
        Some("true"),
        "write the generated-at header line",
    ),
    ("engine.mode", Some("exact"), "exact | montecarlo | both"),
    (
        "engine.samples",
        Some("100000"),
        "trajectories per sweep point",
    ),
    (
        "engine.seed",
        None,
        "root seed (default $DEMONSIM_SEED, else 7)",
    ),
    ("engine.sigma_mode", Some("model"), "model | empirical"),
];

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut pairs = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::new(
                format!("line {}", lineno + 1),
                format!("expected `key = value`, got {line:?}"),
            ));
        };
        let key = key.trim().to_string();
        if !KEYS.iter().any(|(k, _, _)| *k == key) {
            return Err(ConfigError::new(key, "unknown key"));
        }
        if pairs
            .insert(key.clone(), value.trim().to_string())
            .is_some()
        {
            return Err(ConfigError::new(key, "given more than once"));
        }
    }
    Ok(pairs)
}

/// A number, `pi`, or `[k*]pi[/m]`.
pub fn parse_scalar(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (numerator, denominator) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim().parse::<f64>().ok()?)),
        None => (s, None),
    };
    let scale = match numerator.strip_suffix("pi") {
        Some("") => 1.0,
        Some(k) => k.trim_end_matches('*').trim().parse::<f64>().ok()?,
        None => return None,
    };
    Some(scale * PI / denominator.unwrap_or(1.0))
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> Option<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (start, stop, step) = (
            parse_scalar(parts[0])?,
            parse_scalar(parts[1])?,
            parse_scalar(parts[2])?,
        );
        if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
            return None;
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Some(
            (0..count)
                .map(|i| {
                    let v = (i as f64).mul_add(step, start);
                    if (v - stop).abs() < 1e-9 * step {
                        stop
                    } else {
                        v
                    }
                })
                .collect(),
        );
    }
    if parts.len() != 1 {
        return None;
    }
    let values: Option<Vec<f64>> = s.split(',').map(parse_scalar).collect();
    values.filter(|v| !v.is_empty())
}

fn format_grid(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

struct Resolver<'a> {
    pairs: &'a BTreeMap<String, String>,
}

impl Resolver<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.pairs.get(key).map(String::as_str).or_else(|| {
            KEYS.iter()
                .find(|(k, _, _)| *k == key)
                .and_then(|(_, d, _)| *d)
        })
    }

    fn required(&self, key: &str) -> Result<&str, ConfigError> {
        self.raw(key)
            .ok_or_else(|| ConfigError::new(key, "missing required value"))
    }

    fn scalar(&self, key: &str) -> Result<f64, ConfigError> {
        let raw = self.required(key)?;
        parse_scalar(raw)
            .ok_or_else(|| ConfigError::new(key, format!("expected a number, got {raw:?}")))
    }

    fn grid(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.required(key)?;
        parse_grid(raw).ok_or_else(|| {
            ConfigError::new(
                key,
                format!("expected start:stop:step or a list, got {raw:?}"),
            )
        })
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        let raw = self.required(key)?;
        raw.parse()
            .map_err(|_| ConfigError::new(key, format!("cannot parse {raw:?}")))
    }
}

impl SweepConfig {
    /// Resolves explicit key/value pairs against the defaults and validates.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        if let Some(key) = pairs
            .keys()
            .find(|k| !KEYS.iter().any(|(known, _, _)| known == k))
        {
            return Err(ConfigError::new(key.clone(), "unknown key"));
        }
        let r = Resolver { pairs };

        let name_raw = r.required("protocol.name")?;
        let name = ProtocolName::parse(name_raw).ok_or_else(|| {
            ConfigError::new("protocol.name", format!("unknown protocol {name_raw:?}"))
        })?;
        let protocol = ProtocolSpec {
            name,
            kappa: r.scalar("protocol.kappa")?,
            lamb_dicke: r.scalar("protocol.lamb_dicke")?,
            nbar: r.scalar("protocol.nbar")?,
            n_max: r.parse("protocol.n_max")?,
            pulse_area: r.scalar("protocol.pulse_area")?,
        };
        if !(0.0..=1.0).contains(&protocol.kappa) {
            return Err(ConfigError::new("protocol.kappa", "must lie in [0, 1]"));
        }
        if name == ProtocolName::Ion {
            IonCompositeModel::with_pulse_area(
                protocol.lamb_dicke,
                protocol.nbar,
                protocol.n_max,
                protocol.pulse_area,
            )
            .map_err(|e| ConfigError::new("protocol", e.to_string()))?;
        }

        let theta_c = r.grid("sweep.theta_c")?;
        if let Some(bad) = theta_c
            .iter()
            .find(|t| !(**t > 0.0 && **t <= FRAC_PI_2 + 1e-12))
        {
            return Err(ConfigError::new(
                "sweep.theta_c",
                format!("{bad} outside (0, pi/2]; larger angles invert the population"),
            ));
        }
        let theta_c = theta_c.into_iter().map(|t| t.min(FRAC_PI_2)).collect();

        let error_axis = match (
            pairs.contains_key("sweep.epsilon"),
            pairs.contains_key("sweep.pulse_theta"),
        ) {
            (true, true) => {
                return Err(ConfigError::new(
                    "error_axis",
                    "sweep.epsilon and sweep.pulse_theta are mutually exclusive",
                ))
            }
            (false, true) => {
                let zeta = r.scalar("sweep.zeta")?;
                if !(zeta > 0.0 && zeta.is_finite()) {
                    return Err(ConfigError::new("sweep.zeta", "must be positive"));
                }
                let theta = r.grid("sweep.pulse_theta")?;
                if theta.iter().any(|t| t.is_nan() || *t < 0.0) {
                    return Err(ConfigError::new("error_axis", "pulse angles must be >= 0"));
                }
                ErrorAxis::Pulse { zeta, theta }
            }
            _ => {
                let eps = r.grid("sweep.epsilon")?;
                if let Some(bad) = eps.iter().find(|e| !(0.0..=1.0).contains(*e)) {
                    return Err(ConfigError::new(
                        "error_axis",
                        format!("epsilon {bad} outside [0, 1]"),
                    ));
                }
                ErrorAxis::Epsilon(eps)
            }
        };

        let coarse_raw = r.required("sweep.coarse_variant")?;
        let coarse_variant = CoarseVariant::from_name(coarse_raw).ok_or_else(|| {
            ConfigError::new(
                "sweep.coarse_variant",
                format!("unknown variant {coarse_raw:?}"),
            )
        })?;
        let format = match r.required("sweep.format")? {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => {
                return Err(ConfigError::new(
                    "sweep.format",
                    format!("unknown format {other:?}"),
                ))
            }
        };
        let engine = match r.required("engine.mode")? {
            "exact" => EngineMode::Exact,
            "montecarlo" => EngineMode::MonteCarlo,
            "both" => EngineMode::Both,
            other => {
                return Err(ConfigError::new(
                    "engine.mode",
                    format!("unknown engine {other:?}"),
                ))
            }
        };
        let samples: usize = r.parse("engine.samples")?;
        if samples == 0 {
            return Err(ConfigError::new("engine.samples", "must be >= 1"));
        }
        let seed = match r.raw("engine.seed") {
            Some(_) => r.parse("engine.seed")?,
            None => match std::env::var(SEED_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| {
                    ConfigError::new(
                        "engine.seed",
                        format!("${SEED_ENV} is not an integer: {v:?}"),
                    )
                })?,
                Err(_) => DEFAULT_SEED,
            },
        };
        let sigma_mode = match r.required("engine.sigma_mode")? {
            "model" => SigmaMode::Model,
            "empirical" => SigmaMode::Empirical,
            other => {
                return Err(ConfigError::new(
                    "engine.sigma_mode",
                    format!("unknown mode {other:?}"),
                ))
            }
        };

        Ok(SweepConfig {
            protocol,
            theta_c,
            error_axis,
            engine,
            samples,
            seed,
            sigma_mode,
            coarse_variant,
            output: pairs.get("sweep.output").map(PathBuf::from),
            format,
            timestamp: r.parse("sweep.timestamp")?,
        })
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        Self::from_pairs(&parse_config_text(text)?)
    }

    /// Every setting as `key = value` lines; parses back to an equal config.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let p = &self.protocol;
        line("protocol.name", p.name.as_str().into());
        line("protocol.kappa", p.kappa.to_string());
        line("protocol.lamb_dicke", p.lamb_dicke.to_string());
        line("protocol.nbar", p.nbar.to_string());
        line("protocol.n_max", p.n_max.to_string());
        line("protocol.pulse_area", p.pulse_area.to_string());
        line("sweep.theta_c", format_grid(&self.theta_c));
        match &self.error_axis {
            ErrorAxis::Epsilon(e) => line("sweep.epsilon", format_grid(e)),
            ErrorAxis::Pulse { zeta, theta } => {
                line("sweep.zeta", zeta.to_string());
                line("sweep.pulse_theta", format_grid(theta));
            }
        }
        line("sweep.coarse_variant", self.coarse_variant.name().into());
        if let Some(path) = &self.output {
            line("sweep.output", path.display().to_string());
        }
        line("sweep.format", self.format.as_str().into());
        line("sweep.timestamp", self.timestamp.to_string());
        line("engine.mode", self.engine.as_str().into());
        line("engine.samples", self.samples.to_string());
        line("engine.seed", self.seed.to_string());
        line(
            "engine.sigma_mode",
            match self.sigma_mode {
                SigmaMode::Model => "model",
                SigmaMode::Empirical => "empirical",
            }
            .into(),
        );
        out
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.error_axis.epsilons()
    }
}

/// Overlays flag values on file values. Setting either error-axis key from
/// the flags drops the other one coming from the file.
pub fn overlay(
    mut file: BTreeMap<String, String>,
    flags: BTreeMap<String, String>,
) -> BTreeMap<String, String> {
    for axis in ["sweep.epsilon", "sweep.pulse_theta"] {
        if flags.contains_key(axis) {
            let other = if axis == "sweep.epsilon" {
                "sweep.pulse_theta"
            } else {
                "sweep.epsilon"
            };
            file.remove(other);
        }
    }
    file.extend(flags);
    file
}
