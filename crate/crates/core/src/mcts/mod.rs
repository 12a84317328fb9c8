//! Gumbel MCTS: root Gumbel-Top-k, sequential halving, completed Q-values and
//! deterministic non-root selection.

mod gumbel;
mod halving;
mod qtransform;
mod search;
mod single;

pub use gumbel::{gumbel_top_k, sample_gumbel, top_k_with_noise};
pub use halving::{halving_schedule, survivors_after, Phase};
pub use qtransform::{completed_q, improved_logits, mixed_value, nonroot_select, sigma, MinMax, SigmaConfig};
pub use search::{run_search, Baseline, Expansion, SearchModel, SearchOutput, Transition, Tree, TreeNode};
pub use single::{Evaluator, SinglePlayerModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::MdpError;
use crate::nn::NnError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("search root is terminal")]
    TerminalRoot,
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("{0}")]
    Model(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub n_sim: usize,
    /// Root sample size; `None` considers every feasible action.
    pub m_root: Option<usize>,
    pub c_visit: f64,
    pub c_scale: f64,
    /// Min-max normalise Q-values before σ.
    pub normalize: bool,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { n_sim: 50, m_root: Some(16), c_visit: 50.0, c_scale: 1.0, normalize: false, seed: 0 }
    }
}

impl SearchConfig {
    pub fn sigma(&self) -> SigmaConfig {
        SigmaConfig { c_visit: self.c_visit, c_scale: self.c_scale }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.n_sim == 0 {
            return Err(SearchError::Config("n_sim must be at least 1".into()));
        }
        if self.m_root == Some(0) {
            return Err(SearchError::Config("m_root must be at least 1".into()));
        }
        if !(self.c_visit > 0.0 && self.c_scale > 0.0) {
            return Err(SearchError::Config("c_visit and c_scale must be positive".into()));
        }
        Ok(())
    }
}
