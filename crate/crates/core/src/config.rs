//! Run configuration: TOML on disk, `key=value` overrides, validation.
//!
//! Every section is optional; missing keys take the reference baseline
//! (120 nodes, 60 s periods with a 0.05 s duty-cycling phase, 30 days).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{EnergyError, EnergyParams, Environment};
use crate::netsim::PeriodSchedule;
use crate::protocol::{ProtocolError, ProtocolParams};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SELFSYNC_OUT_DIR";

/// Largest seed a config file can hold (TOML integers are signed 64-bit).
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("bad override `{0}`: expected key=value")]
    Override(String),
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
}

impl ConfigError {
    fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Invalid {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub nodes: usize,
    pub p_loss: f64,
    /// Battery level of every node at period 0.
    pub initial_battery: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            nodes: 120,
            p_loss: 0.0,
            initial_battery: 1.0,
        }
    }
}

/// How transmission radii are rescaled when the network size changes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerScaling {
    /// `t · sqrt(k / k_new)`: keeps `π t² k` constant.
    #[default]
    Quadratic,
    /// `sqrt(2 t k / k_new)`, the formula taken literally.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Periods dropped before averaging; one day when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_periods: Option<u64>,
    pub power_scaling: PowerScaling,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            warmup_periods: None,
            power_scaling: PowerScaling::Quadratic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub network: NetworkConfig,
    pub schedule: PeriodSchedule,
    pub protocol: ProtocolParams,
    pub energy: EnergyParams,
    pub environment: Environment,
    pub analysis: AnalysisConfig,
    /// Trace CSV destination.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            network: NetworkConfig::default(),
            schedule: PeriodSchedule::default(),
            protocol: ProtocolParams::default(),
            energy: EnergyParams::default(),
            environment: Environment::default(),
            analysis: AnalysisConfig::default(),
            output: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Self::from_toml_with_overrides(text, &[])
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::load_with_overrides(path, &[])
    }

    /// Read `path`, apply `key=value` overrides, then validate.
    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    /// Defaults with overrides applied.
    pub fn defaults_with_overrides(overrides: &[String]) -> Result<Self, ConfigError> {
        Self::from_toml_with_overrides("", overrides)
    }

    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    /// Warmup in periods (defaults to one day).
    pub fn warmup_periods(&self) -> u64 {
        self.analysis
            .warmup_periods
            .unwrap_or(self.environment.day_length as u64)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seed > MAX_SEED {
            return Err(ConfigError::invalid(
                "seed",
                format!("must be at most {MAX_SEED} to fit a TOML integer"),
            ));
        }
        if self.network.nodes == 0 {
            return Err(ConfigError::invalid("network.nodes", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.network.p_loss) {
            return Err(ConfigError::invalid("network.p_loss", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.network.initial_battery) {
            return Err(ConfigError::invalid(
                "network.initial_battery",
                "must lie in [0, 1]",
            ));
        }
        self.schedule
            .validate()
            .map_err(|r| ConfigError::invalid("schedule", r))?;
        self.protocol.validate().map_err(|e| match e {
            ProtocolError::InvalidParam { field, reason } => {
                ConfigError::invalid(format!("protocol.{field}"), reason)
            }
            other => ConfigError::invalid("protocol", other.to_string()),
        })?;
        let energy_err = |section: &str, e: EnergyError| match e {
            EnergyError::InvalidParam { field, reason } => {
                ConfigError::invalid(format!("{section}.{field}"), reason)
            }
        };
        self.energy
            .validate()
            .map_err(|e| energy_err("energy", e))?;
        self.environment
            .validate()
            .map_err(|e| energy_err("environment", e))?;
        Ok(())
    }
}

/// Set a dotted key in a TOML table. The value is read as a TOML literal,
/// falling back to a plain string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(spec.to_string()))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Override(spec.to_string()));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("split yields at least one part");
    let mut cursor = table;
    for part in parts {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::invalid(key, format!("`{part}` is not a section")))?;
    }
    cursor.insert(leaf.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{CloudSchedule, SunModel};

    #[test]
    fn defaults_match_baseline() {
        let c = RunConfig::default();
        assert_eq!(c.network.nodes, 120);
        assert_eq!(c.network.p_loss, 0.0);
        assert_eq!(c.schedule.delta_seconds, 60.0);
        assert_eq!(c.schedule.phase1_seconds, 0.05);
        assert_eq!(c.schedule.total_periods, 43_200);
        assert_eq!(c.environment.day_length, 1440);
        assert_eq!(c.protocol.p_min, 0.07);
        assert_eq!(c.protocol.p_max, 0.14);
        assert_eq!(c.protocol.g, 0.1);
        assert_eq!(c.protocol.p_a, 0.001);
        assert_eq!(c.energy.e_app, 0.001);
        assert_eq!(c.energy.f, 0.0027);
        assert_eq!(c.protocol.levels.len(), 6);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn empty_text_is_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip_through_toml() {
        let mut c = RunConfig {
            seed: 99,
            ..RunConfig::default()
        };
        c.environment.cloud = CloudSchedule {
            density: 0.2,
            changes: vec![(100, 0.6)],
        };
        c.environment.sun = SunModel::Constant { intensity: 0.5 };
        c.analysis.warmup_periods = Some(10);
        c.output = Some("out/trace.csv".into());
        let text = c.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn overrides_apply_dotted_keys() {
        let c = RunConfig::defaults_with_overrides(&[
            "protocol.theta_act=0.2".into(),
            "network.nodes = 30".into(),
            "seed=5".into(),
            "analysis.power_scaling=literal".into(),
        ])
        .unwrap();
        assert_eq!(c.protocol.theta_act, 0.2);
        assert_eq!(c.network.nodes, 30);
        assert_eq!(c.seed, 5);
        assert_eq!(c.analysis.power_scaling, PowerScaling::Literal);
    }

    #[test]
    fn invalid_values_report_field_path() {
        let err = RunConfig::from_toml_str("[protocol]\np_a = 2.0\n").unwrap_err();
        assert!(err.to_string().starts_with("protocol.p_a"), "{err}");
        let err = RunConfig::from_toml_str("[network]\nnodes = 0\n").unwrap_err();
        assert!(err.to_string().starts_with("network.nodes"), "{err}");
        let err = RunConfig::from_toml_str("[energy]\ne_off = 1.0\n").unwrap_err();
        assert!(err.to_string().starts_with("energy.e_off"), "{err}");
        let c = RunConfig {
            seed: MAX_SEED + 1,
            ..RunConfig::default()
        };
        assert!(c.validate().unwrap_err().to_string().starts_with("seed"));
    }

    #[test]
    fn unknown_keys_and_bad_overrides_are_rejected() {
        assert!(matches!(
            RunConfig::from_toml_str("[protocol]\nbogus = 1\n"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            RunConfig::defaults_with_overrides(&["nodes".into()]),
            Err(ConfigError::Override(_))
        ));
        assert!(RunConfig::defaults_with_overrides(&["seed.x=1".into()]).is_err());
    }

    #[test]
    fn missing_file_is_read_error() {
        let err = RunConfig::load(Path::new("/definitely/not/here.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::Read { .. }));
    }
}
