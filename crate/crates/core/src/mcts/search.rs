use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gumbel::gumbel_top_k;
use super::halving::{halving_schedule, survivors_after};
use super::qtransform::{completed_q, improved_logits, mixed_value, nonroot_select, MinMax};
use super::{SearchConfig, SearchError};
use crate::nn::softmax;

/// Result of evaluating a freshly created node.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    /// Feasible actions in ascending id order; empty at terminal nodes.
    pub actions: Vec<usize>,
    /// Prior logits aligned with `actions`.
    pub logits: Vec<f64>,
    /// Value estimate, or the exact outcome at terminal nodes.
    pub value: f64,
    pub terminal: bool,
}

/// Edge taken from a learner node.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<N> {
    pub node: N,
    pub reward: f64,
    /// Opponent move applied on the edge (afterstate), if any.
    pub afterstate: Option<usize>,
}

/// Dynamics and evaluation seen by the search. All values are from the
/// searching player's perspective.
pub trait SearchModel {
    type Node: Clone;

    fn expand(&mut self, node: &Self::Node) -> Result<Expansion, SearchError>;

    fn child(&mut self, node: &Self::Node, action: usize) -> Result<Transition<Self::Node>, SearchError>;
}

/// Reference value subtracted from completed Q-values in the logit update.
/// Unvisited actions are always completed with the mixed value.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Baseline {
    /// The node's mixed value estimate.
    #[default]
    Mixed,
    /// `b[start + depth]`, clamped at the last entry.
    Timestep { values: Vec<f64>, start: usize },
}

impl Baseline {
    pub fn at(&self, depth: usize, mixed: f64) -> f64 {
        match self {
            Baseline::Mixed => mixed,
            Baseline::Timestep { values, start } => values[(start + depth).min(values.len() - 1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode<N> {
    pub state: N,
    pub depth: usize,
    /// Reward on the edge leading into this node.
    pub reward: f64,
    pub afterstate: Option<usize>,
    pub actions: Vec<usize>,
    pub logits: Vec<f64>,
    pub value: f64,
    pub terminal: bool,
    pub children: Vec<Option<usize>>,
    pub visits: Vec<u32>,
    pub value_sum: Vec<f64>,
}

impl<N> TreeNode<N> {
    fn new(state: N, depth: usize, reward: f64, afterstate: Option<usize>, e: Expansion) -> Self {
        let k = e.actions.len();
        Self {
            state,
            depth,
            reward,
            afterstate,
            actions: e.actions,
            logits: e.logits,
            value: e.value,
            terminal: e.terminal,
            children: vec![None; k],
            visits: vec![0; k],
            value_sum: vec![0.0; k],
        }
    }

    pub fn q(&self) -> Vec<f64> {
        self.visits.iter().zip(&self.value_sum).map(|(&n, &w)| if n > 0 { w / n as f64 } else { 0.0 }).collect()
    }

    pub fn total_visits(&self) -> u32 {
        self.visits.iter().sum()
    }

    /// `(V + Σ W) / (1 + Σ N)`.
    pub fn mean_value(&self) -> f64 {
        (self.value + self.value_sum.iter().sum::<f64>()) / (1.0 + self.total_visits() as f64)
    }
}

/// Arena of search nodes; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree<N> {
    pub nodes: Vec<TreeNode<N>>,
    pub minmax: MinMax,
}

impl<N> Tree<N> {
    /// Completed Q-values and the baseline for node `id`, normalised if requested.
    fn completed(&self, id: usize, cfg: &SearchConfig, baseline: &Baseline) -> (Vec<f64>, f64) {
        let n = &self.nodes[id];
        let q = n.q();
        let mixed = mixed_value(n.value, &softmax(&n.logits), &q, &n.visits);
        let base = baseline.at(n.depth, mixed);
        let completed = completed_q(&q, &n.visits, mixed);
        if cfg.normalize {
            (completed.iter().map(|&x| self.minmax.normalize(x)).collect(), self.minmax.normalize(base))
        } else {
            (completed, base)
        }
    }

    pub fn improved_logits(&self, id: usize, cfg: &SearchConfig, baseline: &Baseline) -> Vec<f64> {
        let (completed, base) = self.completed(id, cfg, baseline);
        let n = &self.nodes[id];
        let max_n = n.visits.iter().copied().max().unwrap_or(0);
        improved_logits(&n.logits, &completed, base, max_n, cfg.sigma())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutput {
    /// Root actions, ascending.
    pub actions: Vec<usize>,
    /// Improved policy over `actions`.
    pub policy: Vec<f64>,
    pub chosen: usize,
    pub chosen_index: usize,
    pub root_value: f64,
    /// Completed Q-value of the chosen action (unnormalised).
    pub chosen_q: f64,
    pub visits: Vec<u32>,
    pub simulations: usize,
    /// Non-root nodes created (one model evaluation each).
    pub expansions: usize,
}

struct Search<'a, M: SearchModel> {
    model: &'a mut M,
    cfg: &'a SearchConfig,
    baseline: &'a Baseline,
    tree: Tree<M::Node>,
    expansions: usize,
}

impl<M: SearchModel> Search<'_, M> {
    fn simulate(&mut self, root_index: usize) -> Result<(), SearchError> {
        let mut path = Vec::new();
        let (mut node, mut idx) = (0, root_index);
        let leaf_value = loop {
            path.push((node, idx));
            match self.tree.nodes[node].children[idx] {
                Some(c) => {
                    if self.tree.nodes[c].terminal {
                        break self.tree.nodes[c].value;
                    }
                    let probs = softmax(&self.tree.improved_logits(c, self.cfg, self.baseline));
                    node = c;
                    idx = nonroot_select(&probs, &self.tree.nodes[c].visits);
                }
                None => {
                    let parent = &self.tree.nodes[node];
                    let depth = parent.depth + 1;
                    let action = parent.actions[idx];
                    let tr = self.model.child(&parent.state, action)?;
                    let e = self.model.expand(&tr.node)?;
                    if !e.value.is_finite() || e.logits.iter().any(|l| l.is_nan()) {
                        return Err(SearchError::Model("non-finite evaluation".into()));
                    }
                    self.expansions += 1;
                    let value = e.value;
                    self.tree.minmax.update(value);
                    let child = TreeNode::new(tr.node, depth, tr.reward, tr.afterstate, e);
                    self.tree.nodes.push(child);
                    let c = self.tree.nodes.len() - 1;
                    self.tree.nodes[node].children[idx] = Some(c);
                    break value;
                }
            }
        };
        let mut g = leaf_value;
        for &(node, idx) in path.iter().rev() {
            let c = self.tree.nodes[node].children[idx].expect("child on path");
            g += self.tree.nodes[c].reward;
            let n = &mut self.tree.nodes[node];
            n.visits[idx] += 1;
            n.value_sum[idx] += g;
            self.tree.minmax.update(g);
        }
        Ok(())
    }
}

/// Runs one Gumbel search from `root`.
///
/// Samples `min(m_root, feasible)` root actions with Gumbel-Top-k, allocates
/// `n_sim` simulations by sequential halving, descends with deterministic
/// non-root selection and creates one node per simulation. Returns the
/// improved root policy and the final survivor along with the tree.
pub fn run_search<M: SearchModel>(
    model: &mut M,
    root: M::Node,
    cfg: &SearchConfig,
    baseline: &Baseline,
) -> Result<(SearchOutput, Tree<M::Node>), SearchError> {
    cfg.validate()?;
    if let Baseline::Timestep { values, .. } = baseline {
        if values.is_empty() {
            return Err(SearchError::Config("empty timestep baseline".into()));
        }
    }
    let e = model.expand(&root)?;
    if e.terminal || e.actions.is_empty() {
        return Err(SearchError::TerminalRoot);
    }
    if e.actions.len() != e.logits.len() {
        return Err(SearchError::Model(format!("{} actions but {} logits", e.actions.len(), e.logits.len())));
    }
    if !e.value.is_finite() {
        return Err(SearchError::Model("non-finite root value".into()));
    }
    let mut minmax = MinMax::default();
    minmax.update(e.value);
    let mut s = Search {
        model,
        cfg,
        baseline,
        tree: Tree { nodes: vec![TreeNode::new(root, 0, 0.0, None, e)], minmax },
        expansions: 0,
    };
    let k = s.tree.nodes[0].actions.len();
    let finite = s.tree.nodes[0].logits.iter().filter(|l| l.is_finite()).count();
    let mut simulations = 0;

    if finite == 1 {
        let i = s.tree.nodes[0].logits.iter().position(|l| l.is_finite()).unwrap_or(0);
        let mut policy = vec![0.0; k];
        policy[i] = 1.0;
        let root = &s.tree.nodes[0];
        let out = SearchOutput {
            actions: root.actions.clone(),
            policy,
            chosen: root.actions[i],
            chosen_index: i,
            root_value: root.value,
            chosen_q: root.value,
            visits: root.visits.clone(),
            simulations,
            expansions: 0,
        };
        return Ok((out, s.tree));
    }

    let m = cfg.m_root.unwrap_or(k).min(finite);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut survivors, noise) = gumbel_top_k(&s.tree.nodes[0].logits, m, &mut rng)?;
    for phase in halving_schedule(cfg.n_sim, m) {
        debug_assert_eq!(phase.actions, survivors.len());
        for j in 0..phase.sims {
            s.simulate(survivors[j % survivors.len()])?;
            simulations += 1;
        }
        if survivors.len() > 1 {
            let imp = s.tree.improved_logits(0, cfg, baseline);
            survivors.sort_by(|&a, &b| (noise[b] + imp[b]).total_cmp(&(noise[a] + imp[a])).then(a.cmp(&b)));
            survivors.truncate(survivors_after(survivors.len()));
        }
    }

    let chosen_index = survivors[0];
    let policy = softmax(&s.tree.improved_logits(0, cfg, baseline));
    let root = &s.tree.nodes[0];
    let q = root.q();
    let mixed = mixed_value(root.value, &softmax(&root.logits), &q, &root.visits);
    let chosen_q = if root.visits[chosen_index] > 0 { q[chosen_index] } else { mixed };
    let out = SearchOutput {
        actions: root.actions.clone(),
        policy,
        chosen: root.actions[chosen_index],
        chosen_index,
        root_value: root.mean_value(),
        chosen_q,
        visits: root.visits.clone(),
        simulations,
        expansions: s.expansions,
    };
    Ok((out, s.tree))
}
