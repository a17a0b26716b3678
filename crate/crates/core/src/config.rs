//! Sectioned TOML configuration for a full pipeline run.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::TrainConfig;
use crate::bdr::BdrConfig;
use crate::gridworld::{LavaParams, DEFAULT_MAX_STEPS};
use crate::summary::SplitSpec;
use crate::{Error, Result};

/// The shipped example configuration; parses to [`PipelineConfig::default`].
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub lava_min: usize,
    pub lava_max: usize,
    pub max_steps: usize,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        let lava = LavaParams::default();
        EnvironmentConfig { lava_min: lava.lava_min, lava_max: lava.lava_max, max_steps: DEFAULT_MAX_STEPS }
    }
}

impl EnvironmentConfig {
    pub fn lava(&self) -> LavaParams {
        LavaParams { lava_min: self.lava_min, lava_max: self.lava_max }
    }
}

/// Base seeds of the three layout suites. Evaluation and trace suites exclude
/// every training layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuitesConfig {
    pub train_seed: u64,
    pub eval_seed: u64,
    pub eval_size: usize,
}

impl Default for SuitesConfig {
    fn default() -> Self {
        SuitesConfig { train_seed: 1000, eval_seed: 2000, eval_size: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub suite_seed: u64,
    pub suite_size: usize,
    /// One trained agent per seed; each is rolled out once per trace layout.
    pub run_seeds: Vec<u64>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig { suite_seed: 3000, suite_size: 500, run_seeds: vec![1, 2, 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardrailSource {
    /// Compile the learned stage-1 rules.
    Learned,
    /// Read a hand-written spec from `guardrail.spec_path`.
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuardrailConfig {
    pub source: GuardrailSource,
    pub spec_path: Option<PathBuf>,
}

impl Default for GuardrailConfig {
    fn default() -> Self {
        GuardrailConfig { source: GuardrailSource::Learned, spec_path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub environment: EnvironmentConfig,
    pub suites: SuitesConfig,
    pub agent: TrainConfig,
    pub trace: TraceConfig,
    pub bdr: BdrConfig,
    pub split: SplitSpec,
    pub guardrail: GuardrailConfig,
    pub output: OutputConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| Error::Format(format!("{origin}: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// `"default"` names the built-in configuration; anything else is a path.
    pub fn load(spec: &str) -> Result<Self> {
        if spec == "default" {
            return Ok(PipelineConfig::default());
        }
        let path = Path::new(spec);
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.lava().validate()?;
        if self.environment.max_steps == 0 {
            return Err(Error::InvalidParams("max_steps must be positive".into()));
        }
        self.agent.validate()?;
        if self.agent.train_suite_size == 0 || self.suites.eval_size == 0 || self.trace.suite_size == 0 {
            return Err(Error::InvalidParams("suite sizes must be positive".into()));
        }
        if self.trace.run_seeds.is_empty() {
            return Err(Error::InvalidParams("at least one run seed is required".into()));
        }
        let mut seeds = self.trace.run_seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.trace.run_seeds.len() {
            return Err(Error::InvalidParams("run seeds must be distinct".into()));
        }
        self.bdr.validate()?;
        self.split.validate()?;
        if self.guardrail.source == GuardrailSource::Manual && self.guardrail.spec_path.is_none() {
            return Err(Error::InvalidParams("manual guardrail needs guardrail.spec_path".into()));
        }
        Ok(())
    }

    /// Replaces the run seeds by `seed, seed + 1, ...` keeping their count.
    pub fn with_base_seed(mut self, seed: u64) -> Self {
        let n = self.trace.run_seeds.len() as u64;
        self.trace.run_seeds = (0..n).map(|i| seed.wrapping_add(i)).collect();
        self
    }

    /// Training configuration for one run.
    pub fn agent_for(&self, run_seed: u64) -> TrainConfig {
        TrainConfig { seed: run_seed, ..self.agent.clone() }
    }
}
