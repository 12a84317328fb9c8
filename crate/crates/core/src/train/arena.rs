use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::Problem;
use crate::mcts::SearchError;
use crate::mdp::RolloutMode;
use crate::nn::{Encode, Network, ParamStore};
use crate::par::{self, Exec};
use crate::ptp::{actor_rollout, NetPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct ArenaResult {
    /// Per-instance `r(θ) − r(θ^B)` of the greedy rollouts.
    pub differences: Vec<f64>,
    pub sum: f64,
    pub replace: bool,
}

/// Replacement rule: strictly positive summed improvement.
pub fn arena_decision(differences: &[f64]) -> bool {
    differences.iter().sum::<f64>() > 0.0
}

/// Greedy-rollout return of `params` on every instance.
pub fn greedy_rewards<P>(
    env: P,
    net: &Network,
    params: &ParamStore,
    instances: &[Arc<P::Instance>],
    exec: Exec,
) -> Result<Vec<f64>, SearchError>
where
    P: Problem,
    P::State: Encode,
{
    let policy = NetPolicy { net, params };
    par::map(exec, instances, |inst| {
        let start = env.initial_state(inst);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        actor_rollout(&env, &policy, &start, RolloutMode::Greedy, &mut rng).map(|p| p.ret)
    })
    .into_iter()
    .collect()
}

/// Pits the greedy rollouts of `theta` against those of `best` on the arena set.
pub fn arena_evaluate<P>(
    env: P,
    net: &Network,
    theta: &ParamStore,
    best: &ParamStore,
    arena: &[Arc<P::Instance>],
    exec: Exec,
) -> Result<ArenaResult, SearchError>
where
    P: Problem,
    P::State: Encode,
{
    let a = greedy_rewards(env, net, theta, arena, exec)?;
    let b = greedy_rewards(env, net, best, arena, exec)?;
    let differences: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let sum = differences.iter().sum();
    Ok(ArenaResult { replace: arena_decision(&differences), differences, sum })
}
