use std::collections::VecDeque;

use rand::seq::index;
use rand::RngCore;

use super::TrainError;
use crate::env::Problem;
use crate::nn::{PolicySample, ValueInput, ValueSample};

/// Training records of one episode.
#[derive(Debug, Clone)]
pub struct Bundle<S> {
    pub policy: Vec<PolicySample<S>>,
    pub value: Vec<ValueSample<S>>,
}

#[derive(Debug, Clone)]
pub struct Batch<S> {
    pub policy: Vec<PolicySample<S>>,
    pub value: Vec<ValueSample<S>>,
}

/// Policy and value buffers holding the records of the latest `capacity`
/// episodes. Older episodes are evicted whole, oldest first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<S> {
    capacity: usize,
    episodes: VecDeque<(u64, Bundle<S>)>,
    pushed: u64,
}

impl<S: Clone> ReplayBuffer<S> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, episodes: VecDeque::with_capacity(capacity.min(4096)), pushed: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stored episodes.
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Ids (push order, from 0) of the stored episodes, oldest first.
    pub fn episode_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.episodes.iter().map(|(id, _)| *id)
    }

    pub fn policy_len(&self) -> usize {
        self.episodes.iter().map(|(_, b)| b.policy.len()).sum()
    }

    pub fn value_len(&self) -> usize {
        self.episodes.iter().map(|(_, b)| b.value.len()).sum()
    }

    pub fn push(&mut self, bundle: Bundle<S>) {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back((self.pushed, bundle));
        self.pushed += 1;
    }

    /// Draws up to `batch` records from each buffer uniformly without
    /// replacement. With `augment`, every sampled record gets its own random
    /// instance transformation.
    pub fn sample<P>(&self, env: &P, batch: usize, augment: bool, rng: &mut dyn RngCore) -> Result<Batch<S>, TrainError>
    where
        P: Problem<State = S>,
    {
        let (np, nv) = (self.policy_len(), self.value_len());
        if np + nv == 0 {
            return Err(TrainError::EmptyBuffer);
        }
        let policy_ends = prefix(self.episodes.iter().map(|(_, b)| b.policy.len()));
        let value_ends = prefix(self.episodes.iter().map(|(_, b)| b.value.len()));
        let policy = index::sample(rng, np, batch.min(np))
            .into_iter()
            .map(|i| {
                let (e, j) = locate(&policy_ends, i);
                let rec = &self.episodes[e].1.policy[j];
                if augment {
                    augment_policy(env, rec, rng)
                } else {
                    rec.clone()
                }
            })
            .collect();
        let value = index::sample(rng, nv, batch.min(nv))
            .into_iter()
            .map(|i| {
                let (e, j) = locate(&value_ends, i);
                let rec = &self.episodes[e].1.value[j];
                if augment {
                    augment_value(env, rec, rng)
                } else {
                    rec.clone()
                }
            })
            .collect();
        Ok(Batch { policy, value })
    }
}

fn prefix(lens: impl Iterator<Item = usize>) -> Vec<usize> {
    lens.scan(0, |acc, l| {
        *acc += l;
        Some(*acc)
    })
    .collect()
}

/// Episode and offset of the `i`-th record given cumulative episode ends.
fn locate(ends: &[usize], i: usize) -> (usize, usize) {
    let e = ends.partition_point(|&end| end <= i);
    let start = if e == 0 { 0 } else { ends[e - 1] };
    (e, i - start)
}

/// Transforms the state; targets are per-action probabilities and stay as they are.
pub fn augment_policy<P: Problem>(
    env: &P,
    rec: &PolicySample<P::State>,
    rng: &mut dyn RngCore,
) -> PolicySample<P::State> {
    let aug = env.sample_augmentation(env.instance(&rec.state), rng);
    PolicySample { state: env.apply_augmentation(&rec.state, &aug), target: rec.target.clone() }
}

/// Transforms every state of the record with one augmentation. Returns
/// scale with the instance, so return-valued quantities (single-state value
/// targets and the scalar baseline input) are multiplied by the
/// augmentation's scale factor; game outcomes are left alone.
pub fn augment_value<P: Problem>(env: &P, rec: &ValueSample<P::State>, rng: &mut dyn RngCore) -> ValueSample<P::State> {
    let first = match &rec.input {
        ValueInput::Pair(a, _) | ValueInput::Scalar(a, _) | ValueInput::Single(a) => a,
    };
    let aug = env.sample_augmentation(env.instance(first), rng);
    let c = env.augmentation_scale(&aug);
    let app = |s: &P::State| env.apply_augmentation(s, &aug);
    match &rec.input {
        ValueInput::Pair(a, b) => ValueSample { input: ValueInput::Pair(app(a), app(b)), target: rec.target },
        ValueInput::Scalar(a, r) => ValueSample { input: ValueInput::Scalar(app(a), r * c), target: rec.target },
        ValueInput::Single(a) => ValueSample { input: ValueInput::Single(app(a)), target: rec.target * c },
    }
}
