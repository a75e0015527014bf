//! Scenario files: flat TOML sections, overrides from `--set` and `CATQ_*`
//! environment variables, and validation into a runnable model.

use std::collections::BTreeMap;
use std::path::PathBuf;

use catsim::models::{ModelSpec, Rung, SystemParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Prefix of environment variables that mirror `--set`.
pub const ENV_PREFIX: &str = "CATQ_";

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    /// Overrides on the parameter registry, by registry key.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub scan: Scan,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub rung: Rung,
    /// Drive α² for scans that use a single operating point.
    #[serde(default)]
    pub alpha_sq: f64,
    pub truncations: Option<Vec<usize>>,
    /// Cat-mode detuning (MHz).
    #[serde(default)]
    pub detuning: f64,
    /// Multiplies every rate; times in the scan are then in units of µs/rescale.
    pub rescale: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

/// Initial or analysed state of the cat mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateChoice {
    Vacuum,
    Coherent,
    Plus,
    Minus,
    Zero,
    One,
    /// Steady state of the model (Wigner scans only).
    Steady,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scan {
    /// Derived rates and frequency-matching residuals of the parameter set.
    Derived {},
    Bitflip {
        /// Drive α² per point; exclusive with `cat_size`.
        alpha_sq: Option<Vec<f64>>,
        /// Target |α_∞|² per point, converted to drives by adding κ_a/(2κ₂).
        cat_size: Option<Vec<f64>>,
        horizon: f64,
        samples: Option<usize>,
        settle: Option<f64>,
        #[serde(default)]
        husimi: bool,
        rel_step_tol: Option<f64>,
    },
    Phaseflip {
        cat_size: Vec<f64>,
        horizon: Option<f64>,
        samples: Option<usize>,
    },
    Kappa2Cal {
        /// MHz
        deltas: Vec<f64>,
        /// α² assumed by the fit; defaults to the model's.
        fit_alpha_sq: Option<f64>,
    },
    DriveCal {
        alpha_sq: Vec<f64>,
        resolution: Option<usize>,
    },
    Wigner {
        state: StateChoice,
        half_extent: f64,
        resolution: usize,
        /// Evolve the state under the model for this long first (µs).
        time: Option<f64>,
    },
    Semiclassical {
        half_extent: f64,
        resolution: usize,
    },
    Evolve {
        initial: StateChoice,
        horizon: f64,
        samples: usize,
        observables: Vec<String>,
        #[serde(default)]
        transmon_excited: bool,
    },
}

impl Scan {
    pub fn kind(&self) -> &'static str {
        match self {
            Scan::Derived {} => "derived",
            Scan::Bitflip { .. } => "bitflip",
            Scan::Phaseflip { .. } => "phaseflip",
            Scan::Kappa2Cal { .. } => "kappa2_cal",
            Scan::DriveCal { .. } => "drive_cal",
            Scan::Wigner { .. } => "wigner",
            Scan::Semiclassical { .. } => "semiclassical",
            Scan::Evolve { .. } => "evolve",
        }
    }
}

/// One `key=value` override, from the command line or the environment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Override {
    pub key: String,
    pub value: String,
    pub source: String,
}

impl Override {
    pub fn parse_flag(s: &str) -> Result<Self, CliError> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("override `{s}` is not of the form key=value")))?;
        Ok(Self { key: k.trim().to_string(), value: v.trim().to_string(), source: "--set".into() })
    }
}

/// Overrides from `CATQ_<KEY>` variables, sorted by name. Registry keys
/// match case-insensitively; `__` stands for the `.` of a sectioned key.
pub fn env_overrides(vars: impl Iterator<Item = (String, String)>) -> Result<Vec<Override>, CliError> {
    let mut out: Vec<Override> = Vec::new();
    for (name, value) in vars {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
        let key = if rest.contains("__") {
            rest.replace("__", ".").to_lowercase()
        } else {
            SystemParams::KEYS
                .iter()
                .find(|k| k.eq_ignore_ascii_case(rest))
                .map(|k| k.to_string())
                .ok_or_else(|| CliError::Validation(format!("unknown key `{rest}` (from environment variable {name})")))?
        };
        out.push(Override { key, value, source: name });
    }
    out.sort_by(|a, b| a.source.cmp(&b.source));
    Ok(out)
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn registry_value(o: &Override) -> Result<f64, CliError> {
    if !SystemParams::KEYS.contains(&o.key.as_str()) {
        return Err(CliError::Validation(format!("unknown key `{}` (from {})", o.key, o.source)));
    }
    o.value
        .parse::<f64>()
        .map_err(|_| CliError::Validation(format!("`{}` for key `{}` is not a number", o.value, o.key)))
}

/// Parameter registry with `overrides` applied; only registry keys are allowed.
pub fn params_with(overrides: &[Override]) -> Result<SystemParams, CliError> {
    let mut p = SystemParams::default();
    for o in overrides {
        p.set(&o.key, registry_value(o)?)?;
    }
    p.validate()?;
    Ok(p)
}

/// Parses `text` and applies `overrides` in order. Plain keys land in
/// `[params]`; `section.key` replaces that entry of the file.
pub fn load(text: &str, overrides: &[Override]) -> Result<ScenarioConfig, CliError> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config does not parse: {e}")))?;
    for o in overrides {
        let (section, key, value) = match o.key.split_once('.') {
            Some((s, k)) => (s.to_string(), k.to_string(), parse_value(&o.value)),
            None => ("params".to_string(), o.key.clone(), toml::Value::Float(registry_value(o)?)),
        };
        let entry = table.entry(section.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(t) = entry else {
            return Err(CliError::Validation(format!("`{section}` is not a section")));
        };
        t.insert(key, value);
    }
    // registry values written as integers in TOML are still numbers
    if let Some(toml::Value::Table(params)) = table.get_mut("params") {
        for (_, v) in params.iter_mut() {
            if let toml::Value::Integer(i) = *v {
                *v = toml::Value::Float(i as f64);
            }
        }
    }
    toml::Value::Table(table)
        .try_into::<ScenarioConfig>()
        .map_err(|e| CliError::Validation(format!("invalid config: {e}")))
}

impl ScenarioConfig {
    /// Registry with the file's overrides and rescaling applied.
    pub fn system_params(&self) -> Result<SystemParams, CliError> {
        let mut p = SystemParams::default();
        for (k, v) in &self.params {
            p.set(k, *v)?;
        }
        if let Some(s) = self.model.rescale {
            if !(s > 0.0) || !s.is_finite() {
                return Err(CliError::Validation("model.rescale must be positive".into()));
            }
            p = p.rescaled(s);
        }
        p.validate()?;
        Ok(p)
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let mut spec = ModelSpec::new(self.model.rung, self.system_params()?, self.model.alpha_sq)
            .with_detuning(self.model.detuning);
        if let Some(t) = &self.model.truncations {
            spec = spec.with_truncations(t.clone());
        }
        spec.validate()?;
        Ok(spec)
    }
}
