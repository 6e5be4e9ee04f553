//! Run configuration: environment, agent and harness sections, with
//! dotted-path `key=value` overrides applied to the JSON document before parsing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agent::AgentConfig;
use crate::envs::{EnvSpec, QuadrotorEnvSpec};
use crate::harness::HarnessConfig;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "RDPG_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {detail}")]
    Read { path: String, detail: String },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("bad override {0:?}: expected key.path=value")]
    Override(String),
    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub env: EnvSpec,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub harness: HarnessConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: default_output_dir(),
            env: EnvSpec::Quadrotor(QuadrotorEnvSpec::default()),
            agent: AgentConfig::default(),
            harness: HarnessConfig::default(),
        }
    }
}

impl RunConfig {
    /// Every violated constraint across all sections.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = self.env.validate();
        errs.extend(self.agent.validate());
        errs.extend(self.harness.validate());
        if let EnvSpec::Lq(lq) = &self.env {
            if lq.game.eta != self.agent.eta {
                errs.push(format!(
                    "agent.eta ({}) must equal env.game.eta ({}) for the linear-quadratic game",
                    self.agent.eta, lq.game.eta
                ));
            }
        }
        errs
    }

    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let errs = cfg.validate();
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    /// Reads `path`, applies overrides, parses and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), detail: e.to_string() })?;
        let mut value: Value = serde_json::from_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Sets `a.b.c=value` in a JSON document. The value is parsed as JSON when
/// possible (numbers, booleans, arrays, objects) and taken as a string otherwise.
/// Missing intermediate objects are created.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::Override(assignment.into()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Override(assignment.into()));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !node.is_object() {
            return Err(ConfigError::Override(format!("{assignment} ({} is not an object)", parts[..i].join("."))));
        }
        let map = node.as_object_mut().expect("checked object");
        if i + 1 == parts.len() {
            map.insert((*part).to_string(), value);
            return Ok(());
        }
        node = map.entry((*part).to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("loop returns on the last path segment")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn lq_doc() -> Value {
        json!({
            "seed": 3,
            "env": {"kind": "lq", "game": {"a": [[0.9]], "b": [[1]], "d": [[1]], "q": [[1]], "r": [[1]], "eta": 2, "gamma": 0.99}},
            "agent": {"eta": 2}
        })
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = RunConfig::from_value(lq_doc()).unwrap();
        assert_eq!(cfg.agent.batch_size, 256);
        assert_eq!(cfg.harness.snapshot_every, 5000);
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut doc = lq_doc();
        doc["agent"]["learning_rate"] = json!(0.1);
        assert!(matches!(RunConfig::from_value(doc), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn overrides_create_and_replace() {
        let mut doc = lq_doc();
        apply_override(&mut doc, "agent.batch_size=32").unwrap();
        apply_override(&mut doc, "harness.eval_mode={\"kind\":\"none\"}").unwrap();
        apply_override(&mut doc, "output_dir=out/x").unwrap();
        let cfg = RunConfig::from_value(doc).unwrap();
        assert_eq!(cfg.agent.batch_size, 32);
        assert_eq!(cfg.output_dir, PathBuf::from("out/x"));
        assert!(apply_override(&mut lq_doc(), "novalue").is_err());
        assert!(apply_override(&mut lq_doc(), "seed.x=1").is_err());
    }

    #[test]
    fn every_violation_is_listed() {
        let mut doc = lq_doc();
        apply_override(&mut doc, "agent.eta=5").unwrap();
        apply_override(&mut doc, "agent.batch_size=0").unwrap();
        apply_override(&mut doc, "harness.snapshot_every=0").unwrap();
        match RunConfig::from_value(doc) {
            Err(ConfigError::Invalid(errs)) => assert_eq!(errs.len(), 3, "{errs:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip_through_json() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
    }
}
