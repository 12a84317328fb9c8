//! Combinatorial optimisation environments.

pub mod jssp;
pub mod taillard;
pub mod tsp;

use std::fmt::Debug;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::mdp::Environment;

pub use jssp::{JsspEnv, JsspInstance, JsspState};
pub use tsp::{TspEnv, TspInstance, TspState};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("truncated: {0}")]
    Truncated(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An environment over generated problem instances, as needed by search,
/// encoders and training.
///
/// States own a shared handle to their instance so that augmentation can
/// produce self-contained transformed views.
pub trait Problem:
    Environment<State: Clone + Debug + Send + Sync + 'static> + Default + Clone + Copy + Send + Sync + 'static
{
    type Instance: Debug + Send + Sync + 'static;
    type Size: Copy + Debug + Send + Sync;
    type Augmentation: Debug;

    const NAME: &'static str;

    fn generate(&self, size: Self::Size, seed: u64) -> Result<Self::Instance, EnvError>;

    fn initial_state(&self, instance: &Arc<Self::Instance>) -> Self::State;

    fn instance<'a>(&self, state: &'a Self::State) -> &'a Arc<Self::Instance>;

    /// Number of actions in every episode on `instance`.
    fn horizon(&self, instance: &Self::Instance) -> usize;

    /// Divisor applied to raw objectives when emitting rewards.
    fn objective_scale(&self, instance: &Self::Instance) -> f64;

    /// Number of decisions taken so far.
    fn step_index(&self, state: &Self::State) -> usize;

    /// Actions taken so far, identifying the state within its episode.
    fn history<'a>(&self, state: &'a Self::State) -> &'a [usize];

    fn sample_augmentation(&self, instance: &Self::Instance, rng: &mut dyn rand::RngCore) -> Self::Augmentation;

    fn apply_augmentation(&self, state: &Self::State, aug: &Self::Augmentation) -> Self::State;

    /// Factor by which objectives of augmented states are scaled.
    fn augmentation_scale(&self, aug: &Self::Augmentation) -> f64;

    /// Raw objective (tour length, makespan) for a scaled reward.
    fn objective(&self, instance: &Self::Instance, reward: f64) -> f64 {
        -reward * self.objective_scale(instance)
    }
}

pub(crate) fn uniform_open01(rng: &mut (impl Rng + ?Sized)) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
