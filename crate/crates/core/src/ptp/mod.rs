//! Two-player self-competition: the learner plays against a greedy rollout
//! of a frozen policy on an identical copy of the instance, and plans with a
//! search whose opponent moves are folded into afterstate edges.

mod episode;
mod model;

pub use episode::{eval_solve, play_episode, EvalMode, EvalResult, GameResult, PtpConfig};
pub use model::{GameCache, GameNode, PtpModel};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mcts::SearchError;
use crate::mdp::{argmax, sample_index, Environment, Policy, RolloutMode};
use crate::nn::{softmax, Encode, Network, ParamStore};

/// Outcome from player 1's perspective: `+1` iff `r1 ≥ r_neg1`.
pub fn game_outcome(r1: f64, r_neg1: f64) -> f64 {
    if r1 >= r_neg1 {
        1.0
    } else {
        -1.0
    }
}

/// How the greedy actor moves inside the learner's search tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeMode {
    /// Sampled from the greedy actor's policy, once per created edge.
    Sampled,
    /// Argmax of the greedy actor's policy.
    Greedy,
}

/// Distribution of an actor over feasible actions.
pub trait ActorPolicy<S> {
    fn distribution(&self, state: &S, actions: &[usize]) -> Result<Vec<f64>, SearchError>;
}

/// `softmax` of a network's policy head.
#[derive(Debug, Clone, Copy)]
pub struct NetPolicy<'a> {
    pub net: &'a Network,
    pub params: &'a ParamStore,
}

impl<S: Encode> ActorPolicy<S> for NetPolicy<'_> {
    fn distribution(&self, state: &S, actions: &[usize]) -> Result<Vec<f64>, SearchError> {
        let e = self.net.evaluate(self.params, state)?;
        if e.logits.len() != actions.len() {
            return Err(SearchError::Model(format!("{} logits for {} actions", e.logits.len(), actions.len())));
        }
        Ok(softmax(&e.logits))
    }
}

/// Adapts an infallible [`Policy`].
#[derive(Debug, Clone, Copy)]
pub struct Plain<P>(pub P);

impl<S, P: Policy<S>> ActorPolicy<S> for Plain<P> {
    fn distribution(&self, state: &S, actions: &[usize]) -> Result<Vec<f64>, SearchError> {
        Ok(self.0.distribution(state, actions))
    }
}

/// States `s_0..s_T`, actions and return of one rollout.
#[derive(Debug, Clone)]
pub struct Path<S> {
    pub states: Vec<S>,
    pub actions: Vec<usize>,
    pub ret: f64,
}

/// Rolls `actor` out from `start`, greedily or by sampling.
pub fn actor_rollout<E, A>(
    env: &E,
    actor: &A,
    start: &E::State,
    mode: RolloutMode,
    rng: &mut impl Rng,
) -> Result<Path<E::State>, SearchError>
where
    E: Environment,
    A: ActorPolicy<E::State> + ?Sized,
{
    let mut states = vec![start.clone()];
    let mut actions = Vec::new();
    let mut ret = 0.0;
    let mut s = start.clone();
    while !env.is_terminal(&s) {
        let feasible = env.feasible_actions(&s);
        let probs = actor.distribution(&s, &feasible)?;
        let i = match mode {
            RolloutMode::Greedy => argmax(&probs).ok_or(SearchError::Model("empty policy".into()))?,
            RolloutMode::Sampled => sample_index(&probs, rng)?,
        };
        ret += env.reward(&s, feasible[i]);
        s = env.step(&s, feasible[i])?;
        actions.push(feasible[i]);
        states.push(s.clone());
    }
    ret += env.terminal_reward(&s)?;
    Ok(Path { states, actions, ret })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn outcome_examples() {
        assert_eq!(game_outcome(-5.0, -5.0), 1.0);
        assert_eq!(game_outcome(-6.0, -5.0), -1.0);
    }

    #[test]
    fn outcome_is_antisymmetric_off_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let (a, b): (f64, f64) = (rng.random_range(-3.0..0.0), rng.random_range(-3.0..0.0));
            if a == b {
                assert_eq!(game_outcome(a, b), 1.0);
            } else {
                assert_eq!(game_outcome(a, b), -game_outcome(b, a));
            }
        }
    }
}
