//! Training orchestration: replay buffers, arena comparisons, optimizer
//! cadence, validation-based model selection and metrics.

mod arena;
mod metrics;
mod replay;
mod trainer;

pub use arena::{arena_decision, arena_evaluate, greedy_rewards, ArenaResult};
pub use metrics::{read_metrics, MetricsRow, MetricsWriter, METRICS_HEADER};
pub use replay::{augment_policy, augment_value, Batch, Bundle, ReplayBuffer};
pub use trainer::{run_episode, train, train_problem, EpisodeOutput, EpisodeSummary, TrainOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvError;
use crate::mcts::{SearchConfig, SearchError};
use crate::nn::{CheckpointError, EncoderKind, NetConfig, NnError};
use crate::variants::VariantConfig;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,
    #[error("non-finite loss at step {step} (episode {episode}): policy {policy}, value {value}")]
    NonFiniteLoss { step: u64, episode: usize, policy: f64, value: f64 },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("metrics: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Problem family and size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Tsp { n: usize },
    Jssp { jobs: usize, machines: usize },
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Tsp { .. } => "tsp",
            ProblemSpec::Jssp { .. } => "jssp",
        }
    }

    pub fn encoder(&self) -> EncoderKind {
        match *self {
            ProblemSpec::Tsp { .. } => EncoderKind::Tsp,
            ProblemSpec::Jssp { machines, .. } => EncoderKind::Jssp { machines },
        }
    }

    /// Optimizer steps per episode: `0.1·n` for TSP, `0.02·k·m` for JSSP.
    pub fn default_steps_per_episode(&self) -> f64 {
        match *self {
            ProblemSpec::Tsp { n } => 0.1 * n as f64,
            ProblemSpec::Jssp { jobs, machines } => 0.02 * (jobs * machines) as f64,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        match *self {
            ProblemSpec::Tsp { n } if n < 2 => vec![format!("problem.n must be at least 2, got {n}")],
            ProblemSpec::Jssp { jobs, machines } if jobs == 0 || machines == 0 => {
                vec![format!("problem.jobs and problem.machines must be positive, got {jobs}x{machines}")]
            }
            _ => Vec::new(),
        }
    }
}

/// Network width and depth; encoder and head follow from the problem and variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSettings {
    pub dim: usize,
    pub heads: usize,
    pub blocks: usize,
    pub job_blocks: usize,
}

impl Default for NetSettings {
    fn default() -> Self {
        Self { dim: 32, heads: 2, blocks: 2, job_blocks: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Probability that an episode's greedy actor uses the current policy.
    pub gamma: f64,
    /// Episodes between arena comparisons (and validation runs).
    pub arena_period: usize,
    pub arena_size: usize,
    pub validation_size: usize,
    /// Samples drawn from each of the policy and value buffers per step.
    pub batch_size: usize,
    /// Optimizer steps per played episode; the problem default when unset.
    pub steps_per_episode: Option<f64>,
    /// Optimizer steps between snapshot publications to the workers.
    pub publish_period: usize,
    /// Episodes generated concurrently; 0 uses every available thread.
    pub workers: usize,
    /// Single worker, strictly alternating generate and learn.
    pub deterministic: bool,
    /// Buffer capacity in episodes.
    pub buffer_capacity: usize,
    pub augment: bool,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 1000,
            gamma: 0.2,
            arena_period: 400,
            arena_size: 64,
            validation_size: 16,
            batch_size: 256,
            steps_per_episode: None,
            publish_period: 100,
            workers: 0,
            deterministic: false,
            buffer_capacity: 2000,
            augment: true,
            learning_rate: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Every violated constraint, prefixed with its key.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(0.0..1.0).contains(&self.gamma) {
            errs.push(format!("train.gamma must lie in [0, 1), got {}", self.gamma));
        }
        for (key, v) in [
            ("episodes", self.episodes),
            ("arena_period", self.arena_period),
            ("arena_size", self.arena_size),
            ("validation_size", self.validation_size),
            ("batch_size", self.batch_size),
            ("publish_period", self.publish_period),
            ("buffer_capacity", self.buffer_capacity),
        ] {
            if v == 0 {
                errs.push(format!("train.{key} must be at least 1"));
            }
        }
        if let Some(r) = self.steps_per_episode {
            if !(r.is_finite() && r >= 0.0) {
                errs.push(format!("train.steps_per_episode must be finite and non-negative, got {r}"));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            errs.push(format!("train.learning_rate must be positive, got {}", self.learning_rate));
        }
        errs
    }

    pub fn resolved_workers(&self) -> usize {
        if self.deterministic {
            1
        } else if self.workers == 0 {
            crate::par::available_workers().max(1)
        } else {
            self.workers
        }
    }
}

/// Everything a training run needs; mirrors the sections of a run config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub network: NetSettings,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub variant: VariantConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn net_config(&self) -> NetConfig {
        let n = self.network;
        NetConfig {
            dim: n.dim,
            heads: n.heads,
            blocks: n.blocks,
            job_blocks: n.job_blocks,
            seed: crate::derive_seed(self.train.seed, 0x6e6574),
            ..NetConfig::new(self.problem.encoder(), self.variant.variant.head())
        }
    }

    pub fn steps_per_episode(&self) -> f64 {
        self.train.steps_per_episode.unwrap_or_else(|| self.problem.default_steps_per_episode())
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let mut errs = self.problem.validate();
        errs.extend(self.train.validate());
        if let Err(e) = self.search.validate() {
            errs.push(format!("search: {e}"));
        }
        if self.network.dim == 0 || self.network.heads == 0 || !self.network.dim.is_multiple_of(self.network.heads) {
            errs.push(format!(
                "network.dim ({}) must be a positive multiple of network.heads ({})",
                self.network.dim, self.network.heads
            ));
        }
        if self.variant.n_step == 0 {
            errs.push("variant.n_step must be at least 1".into());
        }
        if self.variant.tb_samples == 0 {
            errs.push("variant.tb_samples must be at least 1".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(TrainError::Config(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ratios() {
        assert!((ProblemSpec::Tsp { n: 20 }.default_steps_per_episode() - 2.0).abs() < 1e-12);
        assert!((ProblemSpec::Jssp { jobs: 15, machines: 15 }.default_steps_per_episode() - 4.5).abs() < 1e-12);
    }

    #[test]
    fn validation_lists_every_problem() {
        let cfg = TrainConfig { gamma: 1.0, arena_period: 0, batch_size: 0, ..Default::default() };
        let errs = cfg.validate();
        assert_eq!(errs.len(), 3, "{errs:?}");
        assert!(errs[0].contains("gamma"));
        assert!(TrainConfig::default().validate().is_empty());
    }

    #[test]
    fn deterministic_pins_one_worker() {
        let cfg = TrainConfig { deterministic: true, workers: 8, ..Default::default() };
        assert_eq!(cfg.resolved_workers(), 1);
    }
}
