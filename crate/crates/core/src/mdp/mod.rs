//! Deterministic finite-horizon MDPs, trajectories and rollouts.
//!
//! Actions are plain `usize` identifiers whose meaning is owned by the
//! environment (node id for TSP, job id for JSSP, edge index for toy MDPs).

mod exact;
mod toy;

pub use exact::{exact_paired_values, exact_values, PairedValueTable, ValueTable, ENUMERATION_CAP};
pub use toy::{ToyMdp, ToyMdpBuilder};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("degenerate policy: no probability mass on feasible actions")]
    DegeneratePolicy,
    #[error("MDP too large for exact enumeration ({0} trajectories)")]
    TooLarge(usize),
    #[error("invalid action {action} in state")]
    InvalidAction { action: usize },
    #[error("state is not terminal")]
    NotTerminal,
    #[error("{0}")]
    Env(String),
}

/// A deterministic environment with finite horizon.
///
/// Rewards may be emitted per transition through [`Environment::reward`];
/// the shipped combinatorial environments return zero there and report the
/// whole return at the terminal state.
pub trait Environment {
    type State: Clone;

    /// Feasible actions in ascending id order. Non-empty for non-terminal states.
    fn feasible_actions(&self, state: &Self::State) -> Vec<usize>;

    fn step(&self, state: &Self::State, action: usize) -> Result<Self::State, MdpError>;

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Episodic reward read at a terminal state.
    fn terminal_reward(&self, state: &Self::State) -> Result<f64, MdpError>;

    /// Intermediate reward `r(s, a)`.
    fn reward(&self, _state: &Self::State, _action: usize) -> f64 {
        0.0
    }
}

/// A state-dependent policy: a distribution over `actions` (same order).
pub trait Policy<S> {
    fn distribution(&self, state: &S, actions: &[usize]) -> Vec<f64>;
}

impl<S, F> Policy<S> for F
where
    F: Fn(&S, &[usize]) -> Vec<f64>,
{
    fn distribution(&self, state: &S, actions: &[usize]) -> Vec<f64> {
        self(state, actions)
    }
}

/// Probability vectors indexed by a dense state id.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    pub probs: Vec<Vec<f64>>,
}

impl TabularPolicy {
    /// Fails unless every row is nonnegative and sums to one within 1e-9.
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self, MdpError> {
        for row in &probs {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0 || !p.is_finite()) || (!row.is_empty() && (sum - 1.0).abs() > 1e-9) {
                return Err(MdpError::DegeneratePolicy);
            }
        }
        Ok(Self { probs })
    }

    /// Random policy with strictly positive entries, rows sized by `arity`.
    pub fn random(arity: &[usize], rng: &mut impl Rng) -> Self {
        let probs = arity
            .iter()
            .map(|&k| {
                let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|p| p / s).collect()
            })
            .collect();
        Self { probs }
    }
}

impl Policy<usize> for TabularPolicy {
    fn distribution(&self, state: &usize, actions: &[usize]) -> Vec<f64> {
        let row = &self.probs[*state];
        debug_assert_eq!(row.len(), actions.len());
        row.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    Greedy,
    Sampled,
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub steps: Vec<(S, usize)>,
    pub terminal: S,
    pub ret: f64,
}

impl<S> Trajectory<S> {
    pub fn actions(&self) -> Vec<usize> {
        self.steps.iter().map(|(_, a)| *a).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= *v => {}
            _ if v.is_nan() => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Draws an index from an unnormalized nonnegative weight vector.
pub fn sample_index(weights: &[f64], rng: &mut impl Rng) -> Result<usize, MdpError> {
    let total: f64 = weights.iter().filter(|w| w.is_finite() && **w > 0.0).sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(MdpError::DegeneratePolicy);
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.iter().enumerate() {
        if !(w.is_finite() && *w > 0.0) {
            continue;
        }
        last = i;
        if u < *w {
            return Ok(i);
        }
        u -= w;
    }
    Ok(last)
}

/// Rolls `policy` out from `start` until a terminal state is reached.
pub fn rollout<E, P>(
    env: &E,
    policy: &P,
    start: &E::State,
    mode: RolloutMode,
    seed: u64,
) -> Result<Trajectory<E::State>, MdpError>
where
    E: Environment,
    P: Policy<E::State> + ?Sized,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = start.clone();
    let mut steps = Vec::new();
    let mut ret = 0.0;
    while !env.is_terminal(&state) {
        let actions = env.feasible_actions(&state);
        let probs = policy.distribution(&state, &actions);
        if probs.iter().all(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(MdpError::DegeneratePolicy);
        }
        let idx = match mode {
            RolloutMode::Greedy => argmax(&probs).ok_or(MdpError::DegeneratePolicy)?,
            RolloutMode::Sampled => sample_index(&probs, &mut rng)?,
        };
        let action = actions[idx];
        ret += env.reward(&state, action);
        let next = env.step(&state, action)?;
        steps.push((state, action));
        state = next;
    }
    ret += env.terminal_reward(&state)?;
    Ok(Trajectory { steps, terminal: state, ret })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> ToyMdp {
        // 0 -> {1, 2} -> terminal 3 / 4
        let mut b = ToyMdpBuilder::new();
        let s0 = b.state(0.0);
        let s1 = b.state(0.0);
        let s2 = b.state(0.0);
        let t1 = b.state(1.0);
        let t2 = b.state(-1.0);
        b.edge(s0, s1, 0.0);
        b.edge(s0, s2, 0.0);
        b.edge(s1, t1, 0.0);
        b.edge(s1, t2, 0.0);
        b.edge(s2, t2, 0.0);
        b.build(s0).unwrap()
    }

    #[test]
    fn terminal_start_gives_empty_trajectory() {
        let mdp = chain();
        let uniform = |_: &usize, a: &[usize]| vec![1.0 / a.len() as f64; a.len()];
        let tr = rollout(&mdp, &uniform, &3, RolloutMode::Sampled, 1).unwrap();
        assert!(tr.is_empty());
        assert_eq!(tr.ret, 1.0);
    }

    #[test]
    fn one_hot_policy_same_in_both_modes() {
        let mdp = chain();
        let first = |_: &usize, a: &[usize]| {
            let mut v = vec![0.0; a.len()];
            v[a.len() - 1] = 1.0;
            v
        };
        let g = rollout(&mdp, &first, &0, RolloutMode::Greedy, 3).unwrap();
        let s = rollout(&mdp, &first, &0, RolloutMode::Sampled, 99).unwrap();
        assert_eq!(g.actions(), s.actions());
        assert_eq!(g.terminal, s.terminal);
    }

    #[test]
    fn sampled_rollout_is_seed_deterministic() {
        let mdp = chain();
        let uniform = |_: &usize, a: &[usize]| vec![1.0 / a.len() as f64; a.len()];
        let a = rollout(&mdp, &uniform, &0, RolloutMode::Sampled, 7).unwrap();
        let b = rollout(&mdp, &uniform, &0, RolloutMode::Sampled, 7).unwrap();
        assert_eq!(a.actions(), b.actions());
        assert_eq!(a.ret.to_bits(), b.ret.to_bits());
    }

    #[test]
    fn greedy_ties_break_to_lowest_index() {
        let mdp = chain();
        let uniform = |_: &usize, a: &[usize]| vec![1.0 / a.len() as f64; a.len()];
        let tr = rollout(&mdp, &uniform, &0, RolloutMode::Greedy, 0).unwrap();
        assert_eq!(tr.actions(), vec![0, 0]);
        assert_eq!(tr.ret, 1.0);
    }

    #[test]
    fn zero_mass_policy_is_rejected() {
        let mdp = chain();
        let zero = |_: &usize, a: &[usize]| vec![0.0; a.len()];
        assert_eq!(rollout(&mdp, &zero, &0, RolloutMode::Greedy, 0).unwrap_err(), MdpError::DegeneratePolicy);
    }

    #[test]
    fn trajectory_length_matches_horizon() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mdp = ToyMdp::random(3, 3, 3, &mut rng);
        let uniform = |_: &usize, a: &[usize]| vec![1.0 / a.len() as f64; a.len()];
        for seed in 0..10 {
            let tr = rollout(&mdp, &uniform, &mdp.root(), RolloutMode::Sampled, seed).unwrap();
            assert_eq!(tr.len(), mdp.horizon());
        }
    }
}
