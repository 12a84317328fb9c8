use super::search::{Expansion, SearchModel, Transition};
use super::SearchError;
use crate::mdp::Environment;

/// Prior and value estimates for a single-player search.
pub trait Evaluator<S> {
    /// Logits over `actions` (same order) and a value estimate of `state`.
    fn evaluate(&mut self, state: &S, actions: &[usize]) -> Result<(Vec<f64>, f64), SearchError>;

    /// Leaf value of a terminal state whose episodic reward is `env_return`.
    fn terminal_value(&mut self, _state: &S, env_return: f64) -> Result<f64, SearchError> {
        Ok(env_return)
    }
}

impl<S, F> Evaluator<S> for F
where
    F: FnMut(&S, &[usize]) -> Result<(Vec<f64>, f64), SearchError>,
{
    fn evaluate(&mut self, state: &S, actions: &[usize]) -> Result<(Vec<f64>, f64), SearchError> {
        self(state, actions)
    }
}

/// Search over an [`Environment`] where only the searching player moves.
pub struct SinglePlayerModel<'a, E, V> {
    pub env: &'a E,
    pub evaluator: V,
}

impl<'a, E, V> SinglePlayerModel<'a, E, V> {
    pub fn new(env: &'a E, evaluator: V) -> Self {
        Self { env, evaluator }
    }
}

impl<E, V> SearchModel for SinglePlayerModel<'_, E, V>
where
    E: Environment,
    V: Evaluator<E::State>,
{
    type Node = E::State;

    fn expand(&mut self, node: &E::State) -> Result<Expansion, SearchError> {
        if self.env.is_terminal(node) {
            let r = self.env.terminal_reward(node)?;
            let value = self.evaluator.terminal_value(node, r)?;
            return Ok(Expansion { actions: Vec::new(), logits: Vec::new(), value, terminal: true });
        }
        let actions = self.env.feasible_actions(node);
        let (logits, value) = self.evaluator.evaluate(node, &actions)?;
        if logits.len() != actions.len() {
            return Err(SearchError::Model(format!("{} logits for {} actions", logits.len(), actions.len())));
        }
        Ok(Expansion { actions, logits, value, terminal: false })
    }

    fn child(&mut self, node: &E::State, action: usize) -> Result<Transition<E::State>, SearchError> {
        let reward = self.env.reward(node, action);
        Ok(Transition { node: self.env.step(node, action)?, reward, afterstate: None })
    }
}
