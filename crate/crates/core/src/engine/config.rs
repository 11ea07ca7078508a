//! Run configuration: a TOML document with one table per subsystem.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::DEFAULT_VARIANTS;
use crate::archive::DEFAULT_DIGEST_K;
use crate::evaluation::{default_judges, JudgeSpec};
use crate::morphology::{default_design, parse_design, DesignBounds, DesignParams};
use crate::policy::TrainBudget;
use crate::sim::SimConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("bad override `{0}`: expected key=value")]
    BadOverride(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Scripted,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub backend: BackendKind,
    /// Overrides the endpoint environment variable when set.
    pub endpoint: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub token_cap: Option<u64>,
    pub max_repair_attempts: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Scripted,
            endpoint: None,
            model: "gpt-4o-mini".into(),
            temperature: 0.7,
            max_tokens: 1024,
            token_cap: None,
            max_repair_attempts: crate::agents::DEFAULT_REPAIR_ATTEMPTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rounds: usize,
    pub variants_per_design: usize,
    pub master_seed: u64,
    pub parallel_evaluations: usize,
    pub digest_k: usize,
    pub out_dir: PathBuf,
    /// Design XML to start from; the default design when absent.
    pub initial_design: Option<PathBuf>,
    /// Regenerate rewards for the synthesis design instead of reusing the
    /// thesis rewards.
    pub regenerate_synthesis_rewards: bool,
    pub max_edit_frac: f64,
    pub sim: SimConfig,
    pub budget: TrainBudget,
    pub judges: Vec<JudgeSpec>,
    pub agents: AgentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rounds: 3,
            variants_per_design: DEFAULT_VARIANTS,
            master_seed: 1,
            parallel_evaluations: 4,
            digest_k: DEFAULT_DIGEST_K,
            out_dir: PathBuf::from("runs/default"),
            initial_design: None,
            regenerate_synthesis_rewards: false,
            max_edit_frac: DesignBounds::default().max_edit_frac,
            sim: SimConfig::default(),
            budget: TrainBudget::default(),
            judges: default_judges(),
            agents: AgentConfig::default(),
        }
    }
}

/// Sets `key` (dotted for nested tables) to `raw`, parsed as a TOML value
/// when possible and as a string otherwise.
fn apply_override(doc: &mut toml::Table, key: &str, raw: &str) -> Result<(), ConfigError> {
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').map(str::trim).collect();
    let last = parts.pop().filter(|k| !k.is_empty());
    let Some(last) = last else {
        return Err(ConfigError::BadOverride(key.to_string()));
    };
    let mut table = doc;
    for p in parts {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::BadOverride(key.to_string()))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parses `text`, applying `key=value` overrides before deserializing.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| ConfigError::BadOverride(o.clone()))?;
            apply_override(&mut doc, k, v.trim())?;
        }
        let cfg: RunConfig = doc
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Self::from_toml_with(text, &[])
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_with(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if self.variants_per_design == 0 {
            return bad("variants_per_design must be at least 1");
        }
        if self.parallel_evaluations == 0 {
            return bad("parallel_evaluations must be at least 1");
        }
        if self.judges.is_empty() {
            return bad("at least one judge is required");
        }
        if !(self.max_edit_frac > 0.0 && self.max_edit_frac < 1.0) {
            return bad("max_edit_frac must be in (0, 1)");
        }
        if self.budget.population < 2 || !self.budget.population.is_multiple_of(2) {
            return bad("budget.population must be even and at least 2");
        }
        if self.budget.episodes_per_eval == 0 {
            return bad("budget.episodes_per_eval must be at least 1");
        }
        if !(self.budget.sigma > 0.0) || !(self.budget.step_size > 0.0) {
            return bad("budget.sigma and budget.step_size must be positive");
        }
        self.sim
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn bounds(&self) -> DesignBounds {
        let mut b = DesignBounds::default();
        b.max_edit_frac = self.max_edit_frac;
        b
    }

    pub fn initial_design(&self) -> Result<DesignParams, ConfigError> {
        let Some(path) = &self.initial_design else {
            return Ok(default_design());
        };
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.clone(),
            source,
        })?;
        parse_design(&text).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_toml_with(
            "rounds = 2\n[budget]\ntotal_env_steps = 1000\n",
            &[
                "budget.total_env_steps=50000".into(),
                "out_dir=/tmp/x".into(),
                "sim.dt=0.02".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.rounds, 2);
        assert_eq!(cfg.budget.total_env_steps, 50_000);
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.sim.dt, 0.02);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(
            RunConfig::from_toml("rounds = 0"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            RunConfig::from_toml("colour = 1"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            RunConfig::from_toml("[sim]\nwarp = 2"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            RunConfig::from_toml_with("", &["rounds".into()]),
            Err(ConfigError::BadOverride(_))
        ));
    }

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.judges.truncate(2);
        cfg.agents.token_cap = Some(5000);
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
