use std::collections::HashMap;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::{game_outcome, ActorPolicy, Path, TreeMode};
use crate::env::Problem;
use crate::mcts::{Expansion, SearchError, SearchModel, Transition};
use crate::mdp::{argmax, sample_index};
use crate::nn::{Encode, Network, ParamStore, ValueInput};

/// Learner-to-move game position: the learner's own state and the greedy
/// actor's state, already advanced past every move the greedy actor has made.
#[derive(Debug, Clone)]
pub struct GameNode<S> {
    pub learner: S,
    pub opponent: S,
}

/// Per-episode caches keyed by the greedy actor's action history. Valid while
/// the learner and greedy-actor parameters stay fixed.
#[derive(Debug, Default)]
pub struct GameCache {
    /// Learner-network latents of greedy-actor states.
    pub latents: HashMap<Vec<usize>, Arc<Vec<f64>>>,
    /// Greedy-actor distributions (sampled-tree mode).
    pub mu: HashMap<Vec<usize>, Vec<f64>>,
    /// Greedy-actor path the real game follows.
    pub greedy_actions: Vec<usize>,
    /// Encoder passes spent filling the cache up front.
    pub precompute_calls: usize,
}

impl GameCache {
    /// Encodes every state of the greedy actor's rollout once.
    pub fn precompute<P>(
        env: &P,
        net: &Network,
        params: &ParamStore,
        path: &Path<P::State>,
    ) -> Result<Self, SearchError>
    where
        P: Problem,
        P::State: Encode,
    {
        let mut cache = GameCache { greedy_actions: path.actions.clone(), ..Default::default() };
        for s in &path.states {
            let latent = net.latent(params, s)?;
            cache.latents.insert(env.history(s).to_vec(), Arc::new(latent));
            cache.precompute_calls += 1;
        }
        Ok(cache)
    }
}

/// Search model of the self-competition game from the learner's seat.
///
/// Every learner move is followed on the same edge by the greedy actor's move
/// (if it has one left), so all tree nodes are learner-to-move. Node values are
/// `V(s_learner, s_opponent)` from the learner network; terminal nodes carry
/// the exact game outcome from the learner's perspective.
pub struct PtpModel<'a, P, A> {
    pub env: P,
    pub net: &'a Network,
    pub params: &'a ParamStore,
    pub actor: &'a A,
    pub mode: TreeMode,
    /// Whether the learner is player 1.
    pub learner_first: bool,
    pub cache: &'a mut GameCache,
    pub rng: ChaCha8Rng,
    /// Encoder passes spent during this search.
    pub encoder_calls: usize,
}

impl<'a, P, A> PtpModel<'a, P, A>
where
    P: Problem,
    P::State: Encode,
    A: ActorPolicy<P::State>,
{
    fn opponent_latent(&mut self, s: &P::State) -> Result<Arc<Vec<f64>>, SearchError> {
        let key = self.env.history(s);
        if let Some(l) = self.cache.latents.get(key) {
            return Ok(l.clone());
        }
        let l = Arc::new(self.net.latent(self.params, s)?);
        self.encoder_calls += 1;
        self.cache.latents.insert(key.to_vec(), l.clone());
        Ok(l)
    }

    fn opponent_move(&mut self, s: &P::State) -> Result<usize, SearchError> {
        let history = self.env.history(s);
        let t = history.len();
        if self.mode == TreeMode::Greedy && self.cache.greedy_actions.get(..t) == Some(history) {
            if let Some(&a) = self.cache.greedy_actions.get(t) {
                return Ok(a);
            }
        }
        let actions = self.env.feasible_actions(s);
        let probs = match self.cache.mu.get(history) {
            Some(p) => p.clone(),
            None => {
                let p = self.actor.distribution(s, &actions)?;
                self.cache.mu.insert(history.to_vec(), p.clone());
                p
            }
        };
        let i = match self.mode {
            TreeMode::Greedy => argmax(&probs).ok_or(SearchError::Model("empty greedy-actor policy".into()))?,
            TreeMode::Sampled => sample_index(&probs, &mut self.rng)?,
        };
        Ok(actions[i])
    }

    /// Game outcome from the learner's perspective at a terminal position.
    fn outcome(&self, node: &GameNode<P::State>) -> Result<f64, SearchError> {
        let rl = self.env.terminal_reward(&node.learner)?;
        let ro = self.env.terminal_reward(&node.opponent)?;
        Ok(if self.learner_first { game_outcome(rl, ro) } else { -game_outcome(ro, rl) })
    }
}

impl<P, A> SearchModel for PtpModel<'_, P, A>
where
    P: Problem,
    P::State: Encode,
    A: ActorPolicy<P::State>,
{
    type Node = GameNode<P::State>;

    fn expand(&mut self, node: &Self::Node) -> Result<Expansion, SearchError> {
        if self.env.is_terminal(&node.learner) {
            let value = self.outcome(node)?;
            return Ok(Expansion { actions: Vec::new(), logits: Vec::new(), value, terminal: true });
        }
        let actions = self.env.feasible_actions(&node.learner);
        let e = self.net.evaluate(self.params, &node.learner)?;
        self.encoder_calls += 1;
        let opp = self.opponent_latent(&node.opponent)?;
        let value = self.net.value(self.params, ValueInput::Pair(&e.latent, &opp))?;
        if e.logits.len() != actions.len() {
            return Err(SearchError::Model(format!("{} logits for {} actions", e.logits.len(), actions.len())));
        }
        Ok(Expansion { actions, logits: e.logits, value, terminal: false })
    }

    fn child(&mut self, node: &Self::Node, action: usize) -> Result<Transition<Self::Node>, SearchError> {
        let learner = self.env.step(&node.learner, action)?;
        let (opponent, afterstate) = if self.env.is_terminal(&node.opponent) {
            (node.opponent.clone(), None)
        } else {
            let a = self.opponent_move(&node.opponent)?;
            (self.env.step(&node.opponent, a)?, Some(a))
        };
        if self.env.is_terminal(&learner) && !self.env.is_terminal(&opponent) {
            return Err(SearchError::Model("learner finished before the greedy actor".into()));
        }
        Ok(Transition { node: GameNode { learner, opponent }, reward: 0.0, afterstate })
    }
}
