//! Run configuration: the full knob set for an optimization run, loadable
//! from TOML with every field defaulted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::credit::CreditMetric;
use crate::error::{Error, Result};
use crate::evaluation::TaskInstance;

/// Which evaluation backend executes trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Closed-form world model; deterministic, offline, fast.
    Simulated,
    /// Chat-completion-driven orchestration.
    LlmScaffold,
}

/// Where chat completions come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Offline provider with scripted and synthesized replies.
    Mock,
    /// HTTP chat-completions endpoint (base URL from `BOAD_API_BASE`).
    Http,
}

/// Complete run configuration. Every field has a default, so an empty TOML
/// document is a valid config; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Optimization rounds to run.
    pub budget: u64,
    /// Arms selected per round.
    pub k: usize,
    /// Solo refinement episodes for each newly created arm.
    pub warmup_rounds: u32,
    /// Concentration parameter of the expansion process.
    pub theta: f64,
    /// Arms generated up front, before round 1.
    pub bootstrap_size: usize,
    /// Number of synthesized design-set instances (ignored when
    /// `design_instances` is given explicitly).
    pub design_set_size: usize,
    /// Explicit design-set instances; `None` synthesizes them.
    pub design_instances: Option<Vec<TaskInstance>>,
    /// Label kind recorded into arm statistics.
    pub credit_metric: CreditMetric,
    /// Ask the model for a team-specific plan instead of the generic one.
    pub customized_orchestrator: bool,
    /// Allow the archive to grow during rounds.
    pub expansion_enabled: bool,
    /// Arms exported at the end of the run.
    pub export_top_k: usize,
    /// World-model JSON for the simulated backend; `None` uses the built-in.
    pub world: Option<PathBuf>,
    pub evaluation_backend: BackendKind,
    pub provider: ProviderKind,
    pub model: String,
    /// Design-set instances evaluated per round; `None` means all of them.
    pub instances_per_round: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            seed: 0,
            budget: 20,
            k: 3,
            warmup_rounds: 4,
            theta: 2.0,
            bootstrap_size: 3,
            design_set_size: 12,
            design_instances: None,
            credit_metric: CreditMetric::Helpfulness,
            customized_orchestrator: true,
            expansion_enabled: true,
            export_top_k: 2,
            world: None,
            evaluation_backend: BackendKind::Simulated,
            provider: ProviderKind::Mock,
            model: "boad-mock".to_owned(),
            instances_per_round: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_owned()));
        if self.budget == 0 {
            return fail("budget must be >= 1");
        }
        if self.k == 0 {
            return fail("k must be >= 1");
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return fail("theta must be positive and finite");
        }
        if self.bootstrap_size == 0 {
            return fail("bootstrap_size must be >= 1");
        }
        if self.export_top_k == 0 {
            return fail("export_top_k must be >= 1");
        }
        match &self.design_instances {
            Some(instances) if instances.is_empty() => {
                return fail("design_instances must not be empty when given");
            }
            None if self.design_set_size == 0 => {
                return fail("design_set_size must be >= 1");
            }
            _ => {}
        }
        if self.instances_per_round == Some(0) {
            return fail("instances_per_round must be >= 1 when given");
        }
        if self.model.is_empty() {
            return fail("model must not be empty");
        }
        Ok(())
    }

    /// Number of design-set instances each round evaluates.
    pub fn effective_instances_per_round(&self, design_set_len: usize) -> usize {
        self.instances_per_round
            .map(|n| n.min(design_set_len))
            .unwrap_or(design_set_len)
    }

    /// The round a run stops after, honoring an operator-supplied early
    /// stop. The stop is an argument, not a config field, so staged and
    /// full runs log byte-identical configurations.
    pub fn effective_final_round(&self, stop_after: Option<u64>) -> u64 {
        stop_after.map(|r| r.min(self.budget)).unwrap_or(self.budget)
    }
}
