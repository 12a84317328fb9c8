use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::arena::{arena_evaluate, greedy_rewards};
use super::metrics::{MetricsRow, MetricsWriter};
use super::replay::{Bundle, ReplayBuffer};
use super::{ProblemSpec, RunConfig, TrainError};
use crate::derive_seed;
use crate::env::{JsspEnv, Problem, TspEnv};
use crate::mcts::{SearchConfig, SearchError};
use crate::nn::{loss_and_grad, Adam, AdamConfig, Checkpoint, Encode, NetConfig, Network, NnError, ParamStore};
use crate::par::{self, Exec};
use crate::ptp::{play_episode, NetPolicy, PtpConfig};
use crate::variants::{
    greedy_scalar_episode, nstep_episode, tb_baselines, tb_episode, vanilla_episode, BaselineMode, Variant,
    VariantConfig, VariantEpisode,
};

const TRAIN_STREAM: u64 = 1;
const EPISODE_STREAM: u64 = 2;
const ARENA_STREAM: u64 = 3;
const VALIDATION_STREAM: u64 = 4;
const SAMPLER_STREAM: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub learner_return: f64,
    pub greedy_return: Option<f64>,
    /// Outcome from the learner's perspective.
    pub z: Option<f64>,
    pub simulations: usize,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutput<S> {
    pub bundle: Bundle<S>,
    pub summary: EpisodeSummary,
}

fn from_variant<S>(e: VariantEpisode<S>) -> EpisodeOutput<S> {
    EpisodeOutput {
        summary: EpisodeSummary {
            learner_return: e.run.ret,
            greedy_return: e.baseline_return,
            z: e.z,
            simulations: e.run.simulations,
        },
        bundle: Bundle { policy: e.run.policy_records, value: e.value_records },
    }
}

/// Plays one training episode of `variant` with learner parameters
/// `learner` and greedy-actor parameters `actor`.
#[allow(clippy::too_many_arguments)]
pub fn run_episode<P>(
    env: P,
    instance: &Arc<P::Instance>,
    net: &Network,
    learner: &ParamStore,
    actor: &ParamStore,
    variant: &VariantConfig,
    search: &SearchConfig,
    seed: u64,
) -> Result<EpisodeOutput<P::State>, SearchError>
where
    P: Problem,
    P::State: Encode,
{
    let greedy = NetPolicy { net, params: actor };
    let out = match variant.variant {
        Variant::PtpSt | Variant::PtpGt => {
            let mode = variant.variant.tree_mode().expect("ptp variant has a tree mode");
            let cfg = PtpConfig { mode, search: *search };
            let g = play_episode(env, instance, net, learner, &greedy, &cfg, None, seed)?;
            let z = if g.learner_first { g.z } else { -g.z };
            EpisodeOutput {
                summary: EpisodeSummary {
                    learner_return: g.learner_return,
                    greedy_return: Some(g.greedy_return),
                    z: Some(z),
                    simulations: g.simulations,
                },
                bundle: Bundle { policy: g.policy_records, value: g.value_records },
            }
        }
        Variant::SingleVanilla => from_variant(vanilla_episode(env, instance, net, learner, search, seed)?),
        Variant::SingleNStep => from_variant(nstep_episode(env, instance, net, learner, search, variant.n_step, seed)?),
        Variant::GreedyScalar => {
            from_variant(greedy_scalar_episode(env, instance, net, learner, &greedy, search, seed)?)
        }
        Variant::TbGreedy | Variant::TbSampled => {
            let mode = if variant.variant == Variant::TbGreedy { BaselineMode::Greedy } else { BaselineMode::Sampled };
            let b = tb_baselines(env, instance, &greedy, net, learner, mode, variant.tb_samples, derive_seed(seed, 1))?;
            from_variant(tb_episode(env, instance, net, learner, &b, search, seed)?)
        }
    };
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: NetConfig,
    pub episodes: usize,
    pub steps: u64,
    pub publications: u64,
    pub arena_runs: usize,
    pub arena_replacements: usize,
    /// `(episode, mean greedy validation objective)` at each validation.
    pub validation: Vec<(usize, f64)>,
    pub best_validation: f64,
    pub best_episode: usize,
    /// Learner parameters with the best validation objective.
    pub final_params: ParamStore,
    /// Greedy-actor parameters in force when `final_params` was selected.
    pub final_greedy_params: ParamStore,
    pub metrics_path: PathBuf,
    pub rows: usize,
}

/// Trains according to `cfg`, writing checkpoints and metrics into `out`.
pub fn train(cfg: &RunConfig, out: &Path) -> Result<TrainOutcome, TrainError> {
    match cfg.problem {
        ProblemSpec::Tsp { n } => train_problem(TspEnv, n, cfg, out),
        ProblemSpec::Jssp { jobs, machines } => train_problem(JsspEnv, (jobs, machines), cfg, out),
    }
}

fn instances<P: Problem>(
    env: P,
    size: P::Size,
    count: usize,
    stream: u64,
) -> Result<Vec<Arc<P::Instance>>, TrainError> {
    (0..count).map(|i| Ok(Arc::new(env.generate(size, derive_seed(stream, i as u64))?))).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn train_problem<P>(env: P, size: P::Size, cfg: &RunConfig, out: &Path) -> Result<TrainOutcome, TrainError>
where
    P: Problem,
    P::State: Encode,
{
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let tc = cfg.train;
    let variant = cfg.variant.variant;
    let vname = variant.name();
    let seed = tc.seed;
    let workers = tc.resolved_workers();
    let exec = if workers > 1 { Exec::Parallel } else { Exec::Sequential };
    let ratio = cfg.steps_per_episode();

    let net_cfg = cfg.net_config();
    let (net, mut params) = Network::new(net_cfg.clone())?;
    let mut adam = Adam::new(AdamConfig { lr: tc.learning_rate, ..AdamConfig::default() }, &params);
    let mut published = Arc::new(params.clone());
    let mut best = Arc::new(params.clone());

    let arena = instances(env, size, tc.arena_size, derive_seed(seed, ARENA_STREAM))?;
    let validation = instances(env, size, tc.validation_size, derive_seed(seed, VALIDATION_STREAM))?;
    let train_stream = derive_seed(seed, TRAIN_STREAM);
    let episode_stream = derive_seed(seed, EPISODE_STREAM);
    let mut sampler = ChaCha8Rng::seed_from_u64(derive_seed(seed, SAMPLER_STREAM));

    let mut buffer = ReplayBuffer::new(tc.buffer_capacity);
    let metrics_path = out.join("metrics.csv");
    let mut metrics = MetricsWriter::create(&metrics_path)?;
    let mut val_log = std::io::BufWriter::new(std::fs::File::create(out.join("validation.csv"))?);
    writeln!(val_log, "episode,mean_objective,arena_sum,replaced")?;

    let meta = |role: &str, episode: usize| json!({ "role": role, "episode": episode, "run": cfg });
    let checkpoint = |p: &ParamStore, adam: Option<&Adam>, role: &str, episode: usize| Checkpoint {
        net: net_cfg.clone(),
        params: p.clone(),
        adam: adam.cloned(),
        meta: meta(role, episode),
    };

    let (mut steps, mut publications) = (0u64, 0u64);
    let (mut arena_runs, mut arena_replacements) = (0, 0);
    let mut history = Vec::new();
    let mut selected: Option<(f64, usize, ParamStore, ParamStore)> = None;
    let mut ep = 0usize;
    while ep < tc.episodes {
        let until_arena = tc.arena_period - ep % tc.arena_period;
        let n = workers.min(tc.episodes - ep).min(until_arena);
        let (learner, current_best) = (published.clone(), best.clone());
        let results = par::map_range(exec, n, |i| {
            let e = (ep + i) as u64;
            let inst = Arc::new(env.generate(size, derive_seed(train_stream, e))?);
            let eseed = derive_seed(episode_stream, e);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(eseed, 0x6761));
            let actor = if tc.gamma > 0.0 && rng.random::<f64>() < tc.gamma { &learner } else { &current_best };
            let search = SearchConfig { seed: eseed, ..cfg.search };
            run_episode(env, &inst, &net, &learner, actor, &cfg.variant, &search, eseed)
                .map(|o| (env.objective(&inst, o.summary.learner_return), o))
                .map_err(TrainError::from)
        });
        for (i, r) in results.into_iter().enumerate() {
            let (objective, o) = r?;
            let s = o.summary;
            metrics.write(&MetricsRow::episode(
                (ep + i) as u64,
                vname,
                s.learner_return,
                s.greedy_return,
                s.z,
                s.simulations,
                objective,
            ))?;
            buffer.push(o.bundle);
        }
        ep += n;

        let target = (ep as f64 * ratio).round() as u64;
        while steps < target {
            let batch = buffer.sample(&env, tc.batch_size, tc.augment, &mut sampler)?;
            let (stats, grads) = match loss_and_grad(&net, &params, &batch.policy, &batch.value, exec) {
                Err(NnError::NonFinite(_)) => {
                    return Err(TrainError::NonFiniteLoss {
                        step: steps,
                        episode: ep,
                        policy: f64::NAN,
                        value: f64::NAN,
                    })
                }
                r => r?,
            };
            if !(stats.policy.is_finite() && stats.value.is_finite()) {
                return Err(TrainError::NonFiniteLoss {
                    step: steps,
                    episode: ep,
                    policy: stats.policy,
                    value: stats.value,
                });
            }
            let norm = adam.step(&mut params, &grads)?;
            metrics.write(&MetricsRow::step(steps, vname, stats.policy, stats.value, norm))?;
            steps += 1;
            if steps % tc.publish_period as u64 == 0 {
                published = Arc::new(params.clone());
                publications += 1;
            }
        }

        if ep.is_multiple_of(tc.arena_period) || ep == tc.episodes {
            let (mut arena_sum, mut replaced) = (f64::NAN, false);
            if variant.uses_greedy_actor() {
                let r = arena_evaluate(env, &net, &params, &best, &arena, exec)?;
                arena_runs += 1;
                arena_sum = r.sum;
                if r.replace {
                    best = Arc::new(params.clone());
                    arena_replacements += 1;
                    replaced = true;
                }
            }
            let rewards = greedy_rewards(env, &net, &params, &validation, exec)?;
            let objectives: Vec<f64> = validation.iter().zip(&rewards).map(|(i, r)| env.objective(i, *r)).collect();
            let m = mean(&objectives);
            writeln!(val_log, "{ep},{m},{arena_sum},{replaced}")?;
            history.push((ep, m));
            if selected.as_ref().is_none_or(|(b, ..)| m < *b) {
                selected = Some((m, ep, params.clone(), (*best).clone()));
            }
            metrics.flush()?;
            val_log.flush()?;
        }
    }
    metrics.flush()?;
    val_log.flush()?;

    let (best_validation, best_episode, final_params, final_greedy_params) =
        selected.expect("at least one validation runs");
    checkpoint(&params, Some(&adam), "learner", ep).save(&out.join("learner.ckpt"))?;
    checkpoint(&best, None, "greedy", ep).save(&out.join("greedy.ckpt"))?;
    checkpoint(&final_params, None, "final", best_episode).save(&out.join("final.ckpt"))?;
    checkpoint(&final_greedy_params, None, "final_greedy", best_episode).save(&out.join("final_greedy.ckpt"))?;

    Ok(TrainOutcome {
        net: net_cfg,
        episodes: ep,
        steps,
        publications,
        arena_runs,
        arena_replacements,
        validation: history,
        best_validation,
        best_episode,
        final_params,
        final_greedy_params,
        metrics_path,
        rows: metrics.rows(),
    })
}
