use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{GameCache, GameNode, PtpModel};
use super::{actor_rollout, game_outcome, ActorPolicy, NetPolicy, TreeMode};
use crate::derive_seed;
use crate::env::Problem;
use crate::mcts::{run_search, Baseline, SearchConfig, SearchError};
use crate::mdp::RolloutMode;
use crate::nn::{Encode, Network, ParamStore, PolicySample, ValueInput, ValueSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtpConfig {
    pub mode: TreeMode,
    pub search: SearchConfig,
}

#[derive(Debug, Clone)]
pub struct GameResult<S> {
    pub learner_first: bool,
    /// Outcome from player 1's perspective.
    pub z: f64,
    pub learner_return: f64,
    pub greedy_return: f64,
    pub learner_actions: Vec<usize>,
    pub greedy_actions: Vec<usize>,
    /// `(s_t^l, improved policy)`, one per learner move.
    pub policy_records: Vec<PolicySample<S>>,
    /// `(s_t^1, s_t^-1, z)` and `(s_t^-1, s_{t+1}^1, -z)` for every t.
    pub value_records: Vec<ValueSample<S>>,
    /// Completed Q-value of each chosen action.
    pub root_values: Vec<f64>,
    pub simulations: usize,
    /// Encoder passes, including the greedy-path precompute.
    pub encoder_calls: usize,
}

impl<S> GameResult<S> {
    /// Learner outcome from its own perspective.
    pub fn learner_won(&self) -> bool {
        (self.z > 0.0) == self.learner_first
    }
}

/// Plays one self-competition episode.
///
/// The greedy actor unrolls `actor` greedily on its copy of the instance; the
/// learner (position drawn from `seed` unless forced) chooses each move by a
/// search over [`PtpModel`].
#[allow(clippy::too_many_arguments)]
pub fn play_episode<P, A>(
    env: P,
    instance: &Arc<P::Instance>,
    net: &Network,
    params: &ParamStore,
    actor: &A,
    cfg: &PtpConfig,
    learner_first: Option<bool>,
    seed: u64,
) -> Result<GameResult<P::State>, SearchError>
where
    P: Problem,
    P::State: Encode,
    A: ActorPolicy<P::State>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let learner_first = learner_first.unwrap_or_else(|| rng.random_bool(0.5));
    let start = env.initial_state(instance);
    let path = actor_rollout(&env, actor, &start, RolloutMode::Greedy, &mut rng)?;
    let mut cache = GameCache::precompute(&env, net, params, &path)?;
    let horizon = path.actions.len();

    let mut s = start;
    let mut learner_states = vec![s.clone()];
    let mut learner_actions = Vec::with_capacity(horizon);
    let mut policy_records = Vec::with_capacity(horizon);
    let mut root_values = Vec::with_capacity(horizon);
    let mut simulations = 0;
    let mut encoder_calls = cache.precompute_calls;
    for t in 0..horizon {
        let opponent = path.states[if learner_first { t } else { t + 1 }].clone();
        let search = SearchConfig { seed: derive_seed(seed, 2 * t as u64), ..cfg.search };
        let mut model = PtpModel {
            env,
            net,
            params,
            actor,
            mode: cfg.mode,
            learner_first,
            cache: &mut cache,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 2 * t as u64 + 1)),
            encoder_calls: 0,
        };
        let root = GameNode { learner: s.clone(), opponent };
        let (out, _) = run_search(&mut model, root, &search, &Baseline::Mixed)?;
        encoder_calls += model.encoder_calls;
        simulations += out.simulations;
        root_values.push(out.chosen_q);
        policy_records.push(PolicySample { state: s.clone(), target: out.policy });
        s = env.step(&s, out.chosen)?;
        learner_actions.push(out.chosen);
        learner_states.push(s.clone());
    }
    if !env.is_terminal(&s) {
        return Err(SearchError::Model("learner did not finish within the greedy actor's horizon".into()));
    }
    let learner_return = env.terminal_reward(&s)?;
    let greedy_return = path.ret;
    let (p1, m1) = if learner_first { (&learner_states, &path.states) } else { (&path.states, &learner_states) };
    let (r1, r_neg1) = if learner_first { (learner_return, greedy_return) } else { (greedy_return, learner_return) };
    let z = game_outcome(r1, r_neg1);
    let mut value_records = Vec::with_capacity(2 * horizon);
    for t in 0..horizon {
        value_records.push(ValueSample { input: ValueInput::Pair(p1[t].clone(), m1[t].clone()), target: z });
        value_records.push(ValueSample { input: ValueInput::Pair(m1[t].clone(), p1[t + 1].clone()), target: -z });
    }
    Ok(GameResult {
        learner_first,
        z,
        learner_return,
        greedy_return,
        learner_actions,
        greedy_actions: path.actions,
        policy_records,
        value_records,
        root_values,
        simulations,
        encoder_calls,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Argmax rollout of the learner policy.
    Greedy,
    /// One game as player 1 against the greedy actor, in greedy-tree mode.
    Search(SearchConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// Best return found (scaled reward).
    pub reward: f64,
    /// Raw objective: tour length or makespan.
    pub objective: f64,
    pub actions: Vec<usize>,
    pub simulations: usize,
}

/// Solves `instance` with a trained learner (`params`) and greedy actor
/// (`greedy_params`). In search mode the better of the learner's and greedy
/// actor's trajectories is reported.
pub fn eval_solve<P>(
    env: P,
    instance: &Arc<P::Instance>,
    net: &Network,
    params: &ParamStore,
    greedy_params: &ParamStore,
    mode: EvalMode,
    seed: u64,
) -> Result<EvalResult, SearchError>
where
    P: Problem,
    P::State: Encode,
{
    let (reward, actions, simulations) = match mode {
        EvalMode::Greedy => {
            let start = env.initial_state(instance);
            let policy = NetPolicy { net, params };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let path = actor_rollout(&env, &policy, &start, RolloutMode::Greedy, &mut rng)?;
            (path.ret, path.actions, 0)
        }
        EvalMode::Search(search) => {
            let actor = NetPolicy { net, params: greedy_params };
            let cfg = PtpConfig { mode: TreeMode::Greedy, search };
            let g = play_episode(env, instance, net, params, &actor, &cfg, Some(true), seed)?;
            if g.learner_return >= g.greedy_return {
                (g.learner_return, g.learner_actions, g.simulations)
            } else {
                (g.greedy_return, g.greedy_actions, g.simulations)
            }
        }
    };
    Ok(EvalResult { reward, objective: env.objective(instance, reward), actions, simulations })
}
