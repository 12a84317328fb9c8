//! Single-player comparison algorithms: vanilla and N-step bootstrapped
//! search, a greedy-rollout scalar baseline, and timestep-dependent
//! baselines inside the tree.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::env::Problem;
use crate::mcts::{run_search, Baseline, Evaluator, SearchConfig, SearchError, SinglePlayerModel};
use crate::mdp::RolloutMode;
use crate::nn::{Encode, HeadKind, Network, ParamStore, PolicySample, ValueInput, ValueSample};
use crate::ptp::{actor_rollout, ActorPolicy, TreeMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    PtpSt,
    PtpGt,
    SingleVanilla,
    SingleNStep,
    GreedyScalar,
    TbGreedy,
    TbSampled,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::PtpSt,
        Variant::PtpGt,
        Variant::SingleVanilla,
        Variant::SingleNStep,
        Variant::GreedyScalar,
        Variant::TbGreedy,
        Variant::TbSampled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PtpSt => "ptp_st",
            Variant::PtpGt => "ptp_gt",
            Variant::SingleVanilla => "single_vanilla",
            Variant::SingleNStep => "single_n_step",
            Variant::GreedyScalar => "greedy_scalar",
            Variant::TbGreedy => "tb_greedy",
            Variant::TbSampled => "tb_sampled",
        }
    }

    pub fn head(self) -> HeadKind {
        match self {
            Variant::PtpSt | Variant::PtpGt => HeadKind::Ptp,
            Variant::GreedyScalar => HeadKind::GreedyScalar,
            _ => HeadKind::Single,
        }
    }

    pub fn tree_mode(self) -> Option<TreeMode> {
        match self {
            Variant::PtpSt => Some(TreeMode::Sampled),
            Variant::PtpGt => Some(TreeMode::Greedy),
            _ => None,
        }
    }

    /// Whether a greedy actor (`θ^B`) takes part in episode generation.
    pub fn uses_greedy_actor(self) -> bool {
        !matches!(self, Variant::SingleVanilla | Variant::SingleNStep)
    }

    /// Min-max normalisation of Q-values in search.
    pub fn normalizes(self) -> bool {
        matches!(self, Variant::SingleVanilla | Variant::SingleNStep)
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
            format!("unknown variant {s:?} (expected one of {})", names.join(", "))
        })
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariantConfig {
    pub variant: Variant,
    /// Bootstrap horizon of the N-step variant.
    pub n_step: usize,
    /// Sampled rollouts for the sampled timestep baseline.
    pub tb_samples: usize,
}

impl Default for VariantConfig {
    fn default() -> Self {
        Self { variant: Variant::PtpGt, n_step: 20, tb_samples: 10 }
    }
}

/// Network evaluator for single-player search. With a scalar baseline `R`
/// the value head conditions on `R` and terminal leaves score `±1` by
/// `r ≥ R`; otherwise terminal leaves carry the episodic return.
#[derive(Debug, Clone, Copy)]
pub struct NetEvaluator<'a> {
    pub net: &'a Network,
    pub params: &'a ParamStore,
    pub scalar: Option<f64>,
    pub calls: usize,
}

impl<'a> NetEvaluator<'a> {
    pub fn new(net: &'a Network, params: &'a ParamStore, scalar: Option<f64>) -> Self {
        Self { net, params, scalar, calls: 0 }
    }
}

impl<S: Encode> Evaluator<S> for NetEvaluator<'_> {
    fn evaluate(&mut self, state: &S, actions: &[usize]) -> Result<(Vec<f64>, f64), SearchError> {
        let e = self.net.evaluate(self.params, state)?;
        self.calls += 1;
        if e.logits.len() != actions.len() {
            return Err(SearchError::Model(format!("{} logits for {} actions", e.logits.len(), actions.len())));
        }
        let input = match self.scalar {
            Some(r) => ValueInput::Scalar(e.latent.as_slice(), r),
            None => ValueInput::Single(e.latent.as_slice()),
        };
        let v = self.net.value(self.params, input)?;
        Ok((e.logits, v))
    }

    fn terminal_value(&mut self, _state: &S, env_return: f64) -> Result<f64, SearchError> {
        Ok(match self.scalar {
            Some(r) => scalar_outcome(env_return, r),
            None => env_return,
        })
    }
}

/// `+1` iff `r ≥ baseline`.
pub fn scalar_outcome(r: f64, baseline: f64) -> f64 {
    if r >= baseline {
        1.0
    } else {
        -1.0
    }
}

/// One searched single-player episode.
#[derive(Debug, Clone)]
pub struct SingleRun<S> {
    /// `s_0..s_T`.
    pub states: Vec<S>,
    pub actions: Vec<usize>,
    pub ret: f64,
    pub policy_records: Vec<PolicySample<S>>,
    /// Root mean value of each search.
    pub root_values: Vec<f64>,
    pub simulations: usize,
}

/// Searches every move of one episode. `baselines`, when given, switches the
/// logit update to timestep baselines `b_{t+d}`.
pub fn single_episode<P, V>(
    env: P,
    instance: &Arc<P::Instance>,
    evaluator: &mut V,
    search: &SearchConfig,
    baselines: Option<&[f64]>,
    seed: u64,
) -> Result<SingleRun<P::State>, SearchError>
where
    P: Problem,
    V: Evaluator<P::State>,
{
    let mut s = env.initial_state(instance);
    let mut states = vec![s.clone()];
    let (mut actions, mut policy_records, mut root_values) = (Vec::new(), Vec::new(), Vec::new());
    let mut simulations = 0;
    let mut t = 0;
    while !env.is_terminal(&s) {
        let cfg = SearchConfig { seed: derive_seed(seed, t as u64), ..*search };
        let baseline = match baselines {
            Some(b) => Baseline::Timestep { values: b.to_vec(), start: t },
            None => Baseline::Mixed,
        };
        let mut model = SinglePlayerModel::new(&env, ByRef(&mut *evaluator));
        let (out, _) = run_search(&mut model, s.clone(), &cfg, &baseline)?;
        simulations += out.simulations;
        root_values.push(out.root_value);
        policy_records.push(PolicySample { state: s.clone(), target: out.policy });
        s = env.step(&s, out.chosen)?;
        actions.push(out.chosen);
        states.push(s.clone());
        t += 1;
    }
    let ret = env.terminal_reward(&s)?;
    Ok(SingleRun { states, actions, ret, policy_records, root_values, simulations })
}

struct ByRef<'a, V>(&'a mut V);

impl<S, V: Evaluator<S>> Evaluator<S> for ByRef<'_, V> {
    fn evaluate(&mut self, state: &S, actions: &[usize]) -> Result<(Vec<f64>, f64), SearchError> {
        self.0.evaluate(state, actions)
    }

    fn terminal_value(&mut self, state: &S, env_return: f64) -> Result<f64, SearchError> {
        self.0.terminal_value(state, env_return)
    }
}

/// Records and summary of one single-player-variant episode.
#[derive(Debug, Clone)]
pub struct VariantEpisode<S> {
    pub run: SingleRun<S>,
    pub value_records: Vec<ValueSample<S>>,
    /// Greedy rollout return `R` (greedy scalar only).
    pub baseline_return: Option<f64>,
    pub z: Option<f64>,
}

fn single_value_records<S: Clone>(run: &SingleRun<S>, targets: impl Fn(usize) -> f64) -> Vec<ValueSample<S>> {
    (0..run.actions.len())
        .map(|t| ValueSample { input: ValueInput::Single(run.states[t].clone()), target: targets(t) })
        .collect()
}

/// Vanilla: min-max normalised search, every state targets the final return.
pub fn vanilla_episode<P>(
    env: P,
    instance: &Arc<P::Instance>,
    net: &Network,
    params: &ParamStore,
    search: &SearchConfig,
    seed: u64,
) -> Result<VariantEpisode<P::State>, SearchError>
where
    P: Problem,
    P::State: Encode,
{
    let cfg = SearchConfig { normalize: true, ..*search };
    let run = single_episode(env, instance, &mut NetEvaluator::new(net, params, None), &cfg, None, seed)?;
    let value_records = single_value_records(&run, |_| run.ret);
    Ok(VariantEpisode { run, value_records, baseline_return: None, z: None })
}

/// N-step: the target of `s_t` is the root value of the search at step
/// `t + n`, or the final return once `t + n` reaches the horizon.
pub fn nstep_targets(root_values: &[f64], ret: f64, n: usize) -> Vec<f64> {
    let horizon = root_values.len();
    (0..horizon).map(|t| if t.saturating_add(n) < horizon { root_values[t + n] } else { ret }).collect()
}

pub fn nstep_episode<P>(
    env: P,
    instance: &Arc<P::Instance>,
    net: &Network,
    params: &ParamStore,
    search: &SearchConfig,
    n: usize,
    seed: u64,
) -> Result<VariantEpisode<P::State>, SearchError>
where
    P: Problem,
    P::State: Encode,
{
    if n == 0 {
        return Err(SearchError::Config("n-step horizon must be at least 1".into()));
    }
    let cfg = SearchConfig { normalize: true, ..*search };
    let run = single_episode(env, instance, &mut NetEvaluator::new(net, params, None), &cfg, None, seed)?;
    let targets = nstep_targets(&run.root_values, run.ret, n);
    let value_records = single_value_records(&run, |t| targets[t]);
    Ok(VariantEpisode { run, value_records, baseline_return: None, z: None })
}

/// Greedy scalar: the learner searches against the return `R` of a greedy
/// rollout of `actor`; records are `(s_t, R, z)`.
#[allow(clippy::too_many_arguments)]
pub fn greedy_scalar_episode<P, A>(
    env: P,
    instance: &Arc<P::Instance>,
    net: &Network,
    params: &ParamStore,
    actor: &A,
    search: &SearchConfig,
    seed: u64,
) -> Result<VariantEpisode<P::State>, SearchError>
where
    P: Problem,
    P::State: Encode,
    A: ActorPolicy<P::State>,
{
    let start = env.initial_state(instance);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_greedy = actor_rollout(&env, actor, &start, RolloutMode::Greedy, &mut rng)?.ret;
    let cfg = SearchConfig { normalize: false, ..*search };
    let mut eval = NetEvaluator::new(net, params, Some(r_greedy));
    let run = single_episode(env, instance, &mut eval, &cfg, None, seed)?;
    let z = scalar_outcome(run.ret, r_greedy);
    let value_records = (0..run.actions.len())
        .map(|t| ValueSample { input: ValueInput::Scalar(run.states[t].clone(), r_greedy), target: z })
        .collect();
    Ok(VariantEpisode { run, value_records, baseline_return: Some(r_greedy), z: Some(z) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    Greedy,
    Sampled,
}

/// Timestep baselines `b_0..b_{T-1}`: value-network estimates along one
/// greedy rollout of `actor`, or averaged over `k` sampled rollouts.
#[allow(clippy::too_many_arguments)]
pub fn tb_baselines<P, A>(
    env: P,
    instance: &Arc<P::Instance>,
    actor: &A,
    net: &Network,
    params: &ParamStore,
    mode: BaselineMode,
    k: usize,
    seed: u64,
) -> Result<Vec<f64>, SearchError>
where
    P: Problem,
    P::State: Encode,
    A: ActorPolicy<P::State>,
{
    let (rollout_mode, k) = match mode {
        BaselineMode::Greedy => (RolloutMode::Greedy, 1),
        BaselineMode::Sampled => (RolloutMode::Sampled, k),
    };
    if k == 0 {
        return Err(SearchError::Config("need at least one baseline rollout".into()));
    }
    let start = env.initial_state(instance);
    let horizon = env.horizon(instance);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums = vec![0.0; horizon];
    for _ in 0..k {
        let path = actor_rollout(&env, actor, &start, rollout_mode, &mut rng)?;
        for (t, s) in path.states.iter().take(horizon).enumerate() {
            let latent = net.latent(params, s)?;
            sums[t] += net.value(params, ValueInput::Single(&latent))?;
        }
    }
    Ok(sums.into_iter().map(|x| x / k as f64).collect())
}

/// Timestep-baseline search; records `(s_t, r(ζ))` as in vanilla.
pub fn tb_episode<P>(
    env: P,
    instance: &Arc<P::Instance>,
    net: &Network,
    params: &ParamStore,
    baselines: &[f64],
    search: &SearchConfig,
    seed: u64,
) -> Result<VariantEpisode<P::State>, SearchError>
where
    P: Problem,
    P::State: Encode,
{
    let cfg = SearchConfig { normalize: false, ..*search };
    let mut eval = NetEvaluator::new(net, params, None);
    let run = single_episode(env, instance, &mut eval, &cfg, Some(baselines), seed)?;
    let value_records = single_value_records(&run, |_| run.ret);
    Ok(VariantEpisode { run, value_records, baseline_return: None, z: None })
}
