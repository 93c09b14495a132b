//! Experiment configuration.
//!
//! Config files are TOML restricted to flat dotted keys, e.g.
//!
//! ```toml
//! train.lambda = 2.0
//! env.drift_noise_sd = 0.05
//! experiment.seeds = [0, 1, 2]
//! ```
//!
//! Tables (`[train]` followed by `lambda = 2.0`) resolve to the same keys.
//! Every key is optional; missing keys keep their defaults. Command-line
//! overrides go through [`ExperimentConfig::set_str`] after the file is
//! applied, so flags win.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::env::{EnvConfig, EnvKind};
use crate::error::{Error, Result};
use crate::esd::EsdParams;
use crate::metrics::DECISION_THRESHOLD;
use crate::policy::Activation;
use crate::trainer::{AgentKind, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub envs: Vec<EnvKind>,
    pub agents: Vec<AgentKind>,
    pub seeds: Vec<u64>,
    pub rollouts: usize,
    pub threshold: f64,
    /// Output directory; not part of the recorded configuration.
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub esd: EsdParams<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            envs: EnvKind::ALL.to_vec(),
            agents: AgentKind::ALL.to_vec(),
            seeds: vec![0, 1, 2, 3, 4],
            rollouts: 40,
            threshold: DECISION_THRESHOLD,
            out_dir: PathBuf::from("out"),
            env: EnvConfig::default(),
            train: TrainConfig::default(),
            esd: EsdParams::default(),
        }
    }
}

/// Every key accepted in config files and `--set`.
pub const KEYS: &[&str] = &[
    "experiment.envs",
    "experiment.agents",
    "experiment.seeds",
    "experiment.rollouts",
    "experiment.threshold",
    "experiment.out",
    "env.horizon",
    "env.drift_onset_lo",
    "env.drift_onset_hi",
    "env.drift_base",
    "env.drift_noise_sd",
    "env.drift_ramp_noise_sd",
    "env.hover_threshold",
    "env.hover_jitter",
    "env.hover_cross_lo",
    "env.hover_cross_hi",
    "env.hover_ramp_len",
    "env.hover_settle_noise_sd",
    "env.window_lo",
    "env.window_hi",
    "env.window_noise_sd",
    "env.sustain_lag",
    "env.reward_hit",
    "env.reward_miss",
    "env.reward_transient",
    "train.episodes",
    "train.gamma",
    "train.lambda",
    "train.learn_rate",
    "train.adam_beta1",
    "train.adam_beta2",
    "train.adam_eps",
    "train.hidden",
    "train.activation",
    "train.normalize_returns",
    "esd.alpha_up",
    "esd.alpha_down",
    "esd.beta",
    "esd.clamp_output",
];

fn bad(key: &str, expected: &str, value: &Value) -> Error {
    Error::config(key, format!("expected {expected}, got {value}"))
}

fn float(key: &str, value: &Value) -> Result<f64> {
    match value {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(bad(key, "a number", other)),
    }
}

fn uint(key: &str, value: &Value) -> Result<u64> {
    match value {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        other => Err(bad(key, "a non-negative integer", other)),
    }
}

fn usize_of(key: &str, value: &Value) -> Result<usize> {
    uint(key, value).map(|v| v as usize)
}

fn boolean(key: &str, value: &Value) -> Result<bool> {
    value.as_bool().ok_or_else(|| bad(key, "true or false", value))
}

fn string<'a>(key: &str, value: &'a Value) -> Result<&'a str> {
    value.as_str().ok_or_else(|| bad(key, "a string", value))
}

/// Accepts `["a", "b"]`, `"a,b"` or the shorthands `"all"`/`"both"`.
fn name_list<T: Copy>(
    key: &str,
    value: &Value,
    everything: &[T],
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Vec<T>> {
    let names: Vec<String> = match value {
        Value::String(s) => s.split(',').map(|x| x.trim().to_string()).collect(),
        Value::Array(items) => items
            .iter()
            .map(|v| string(key, v).map(str::to_string))
            .collect::<Result<_>>()?,
        other => return Err(bad(key, "a list of names", other)),
    };
    let mut out = Vec::new();
    for name in names.iter().filter(|n| !n.is_empty()) {
        if name == "all" || name == "both" {
            return Ok(everything.to_vec());
        }
        out.push(parse(name).map_err(|e| Error::config(key, e))?);
    }
    Ok(out)
}

fn seed_list(key: &str, value: &Value) -> Result<Vec<u64>> {
    match value {
        Value::Integer(_) => Ok(vec![uint(key, value)?]),
        Value::Array(items) => items.iter().map(|v| uint(key, v)).collect(),
        Value::String(s) => s
            .split(',')
            .filter(|x| !x.trim().is_empty())
            .map(|x| {
                x.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::config(key, format!("bad seed `{x}`: {e}")))
            })
            .collect(),
        other => Err(bad(key, "a list of seeds", other)),
    }
}

/// Parses a command-line value as a TOML literal, falling back to a bare
/// string (`drift,hover` and `tanh` need no quoting).
fn literal(text: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(inner) => flatten(&key, inner, out),
            other => out.push((key, other.clone())),
        }
    }
}

impl ExperimentConfig {
    /// Applies one dotted key.
    pub fn set(&mut self, key: &str, value: &Value) -> Result<()> {
        let e = &mut self.env;
        let t = &mut self.train;
        match key {
            "experiment.envs" => self.envs = name_list(key, value, &EnvKind::ALL, str::parse)?,
            "experiment.agents" => self.agents = name_list(key, value, &AgentKind::ALL, str::parse)?,
            "experiment.seeds" => self.seeds = seed_list(key, value)?,
            "experiment.rollouts" => self.rollouts = usize_of(key, value)?,
            "experiment.threshold" => self.threshold = float(key, value)?,
            "experiment.out" => self.out_dir = PathBuf::from(string(key, value)?),
            "env.horizon" => e.horizon = usize_of(key, value)?,
            "env.drift_onset_lo" => e.drift_onset_lo = usize_of(key, value)?,
            "env.drift_onset_hi" => e.drift_onset_hi = usize_of(key, value)?,
            "env.drift_base" => e.drift_base = float(key, value)?,
            "env.drift_noise_sd" => e.drift_noise_sd = float(key, value)?,
            "env.drift_ramp_noise_sd" => e.drift_ramp_noise_sd = float(key, value)?,
            "env.hover_threshold" => e.hover_threshold = float(key, value)?,
            "env.hover_jitter" => e.hover_jitter = float(key, value)?,
            "env.hover_cross_lo" => e.hover_cross_lo = usize_of(key, value)?,
            "env.hover_cross_hi" => e.hover_cross_hi = usize_of(key, value)?,
            "env.hover_ramp_len" => e.hover_ramp_len = usize_of(key, value)?,
            "env.hover_settle_noise_sd" => e.hover_settle_noise_sd = float(key, value)?,
            "env.window_lo" => e.window_lo = usize_of(key, value)?,
            "env.window_hi" => e.window_hi = usize_of(key, value)?,
            "env.window_noise_sd" => e.window_noise_sd = float(key, value)?,
            "env.sustain_lag" => e.sustain_lag = usize_of(key, value)?,
            "env.reward_hit" => e.reward_hit = float(key, value)?,
            "env.reward_miss" => e.reward_miss = float(key, value)?,
            "env.reward_transient" => e.reward_transient = float(key, value)?,
            "train.episodes" => t.episodes = usize_of(key, value)?,
            "train.gamma" => t.gamma = float(key, value)?,
            "train.lambda" => t.lambda = float(key, value)?,
            "train.learn_rate" => t.adam.learn_rate = float(key, value)?,
            "train.adam_beta1" => t.adam.beta1 = float(key, value)?,
            "train.adam_beta2" => t.adam.beta2 = float(key, value)?,
            "train.adam_eps" => t.adam.eps = float(key, value)?,
            "train.hidden" => t.hidden = usize_of(key, value)?,
            "train.activation" => {
                t.activation = string(key, value)?
                    .parse::<Activation>()
                    .map_err(|e| Error::config(key, e))?
            }
            "train.normalize_returns" => t.normalize_returns = boolean(key, value)?,
            "esd.alpha_up" => self.esd.alpha_up = float(key, value)?,
            "esd.alpha_down" => self.esd.alpha_down = float(key, value)?,
            "esd.beta" => self.esd.beta = float(key, value)?,
            "esd.clamp_output" => self.esd.clamp_output = boolean(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Applies one override given as command-line text.
    pub fn set_str(&mut self, key: &str, text: &str) -> Result<()> {
        self.set(key, &literal(text))
    }

    /// Applies every key of a TOML document on top of the current values.
    pub fn apply_toml(&mut self, text: &str, origin: &Path) -> Result<()> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);
        for (key, value) in &entries {
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_toml(text, Path::new("<inline>"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults, then the file (if any), then `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        Self::load_onto(Self::default(), path, overrides)
    }

    /// Like [`ExperimentConfig::load`] but starting from `base`.
    pub fn load_onto(base: Self, path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = base;
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg.apply_toml(&text, path)?;
        }
        for (key, text) in overrides {
            cfg.set_str(key, text)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.envs.is_empty() {
            return Err(Error::config("experiment.envs", "select at least one environment"));
        }
        if self.agents.is_empty() {
            return Err(Error::config("experiment.agents", "select at least one agent"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("experiment.seeds", "give at least one seed"));
        }
        if self.rollouts == 0 {
            return Err(Error::config("experiment.rollouts", "must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("experiment.threshold", "must lie in (0, 1)"));
        }
        self.env.validate()?;
        self.train.validate()?;
        self.esd.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.env.horizon, 100);
        assert_eq!(cfg.train.episodes, 800);
        assert_eq!(cfg.train.gamma, 0.99);
        assert_eq!(cfg.train.lambda, 2.0);
        assert_eq!(cfg.rollouts, 40);
        assert_eq!((cfg.esd.alpha_up, cfg.esd.alpha_down, cfg.esd.beta), (0.15, 0.4, 0.6));
    }

    #[test]
    fn dotted_keys_and_tables_agree() {
        let a = ExperimentConfig::from_toml_str("train.lambda = 1.5\nenv.sustain_lag = 4").unwrap();
        let b = ExperimentConfig::from_toml_str("[train]\nlambda = 1.5\n[env]\nsustain_lag = 4").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.lambda, 1.5);
        assert_eq!(a.env.sustain_lag, 4);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        fs::write(&path, "train.lambda = 2.0\nexperiment.seeds = [7, 8]\n").unwrap();
        let cfg = ExperimentConfig::load(Some(&path), &[("train.lambda".into(), "0".into())]).unwrap();
        assert_eq!(cfg.train.lambda, 0.0);
        assert_eq!(cfg.seeds, vec![7, 8]);
    }

    #[test]
    fn out_of_range_value_names_key() {
        let err = ExperimentConfig::from_toml_str("train.gamma = 1.5")
            .unwrap_err()
            .to_string();
        assert!(err.contains("train.gamma"), "{err}");
        let err = ExperimentConfig::from_toml_str("esd.alpha_down = 0")
            .unwrap_err()
            .to_string();
        assert!(err.contains("esd.alpha_down"), "{err}");
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let err = ExperimentConfig::from_toml_str("train.lambda = \"big\"")
            .unwrap_err()
            .to_string();
        assert!(err.contains("train.lambda"), "{err}");
        let err = ExperimentConfig::from_toml_str("train.lamda = 1")
            .unwrap_err()
            .to_string();
        assert!(err.contains("train.lamda"), "{err}");
        assert!(matches!(
            ExperimentConfig::from_toml_str("train.lambda = = 1"),
            Err(Error::Parse { .. })
        ));
        let err = ExperimentConfig::from_toml_str("experiment.seeds = []")
            .unwrap_err()
            .to_string();
        assert!(err.contains("experiment.seeds"), "{err}");
    }

    #[test]
    fn list_shorthands() {
        let mut cfg = ExperimentConfig::default();
        cfg.set_str("experiment.envs", "drift,window").unwrap();
        assert_eq!(cfg.envs, vec![EnvKind::Drift, EnvKind::Window]);
        cfg.set_str("experiment.envs", "all").unwrap();
        assert_eq!(cfg.envs, EnvKind::ALL.to_vec());
        cfg.set_str("experiment.agents", "dprl").unwrap();
        assert_eq!(cfg.agents, vec![AgentKind::DpRl]);
        cfg.set_str("experiment.seeds", "3,1").unwrap();
        assert_eq!(cfg.seeds, vec![3, 1]);
        cfg.set_str("experiment.seeds", "[5]").unwrap();
        assert_eq!(cfg.seeds, vec![5]);
        cfg.set_str("train.activation", "relu").unwrap();
        assert_eq!(cfg.train.activation, Activation::Relu);
        assert!(cfg.set_str("experiment.envs", "pong").is_err());
    }

    #[test]
    fn every_listed_key_is_settable() {
        let sample = |key: &str| -> &str {
            match key {
                "experiment.envs" => "drift",
                "experiment.agents" => "both",
                "experiment.seeds" => "[1]",
                "experiment.out" => "\"x\"",
                "train.activation" => "tanh",
                "train.normalize_returns" | "esd.clamp_output" => "true",
                k if k.starts_with("esd.") => "0.5",
                "experiment.threshold" => "0.6",
                "train.gamma" | "train.lambda" | "train.learn_rate" | "train.adam_eps" => "0.5",
                "train.adam_beta1" | "train.adam_beta2" => "0.5",
                k if k.contains("noise") || k.contains("jitter") || k.contains("base") => "0.1",
                k if k.contains("threshold") || k.starts_with("env.reward") => "0.5",
                _ => "3",
            }
        };
        for key in KEYS {
            let mut cfg = ExperimentConfig::default();
            cfg.set_str(key, sample(key)).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }
}
