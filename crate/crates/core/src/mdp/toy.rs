use rand::Rng;

use super::{Environment, MdpError};

#[derive(Debug, Clone)]
struct ToyState {
    terminal_reward: f64,
    /// (successor, transition reward) per action.
    edges: Vec<(usize, f64)>,
}

/// A small enumerable deterministic MDP over dense state ids.
///
/// States without outgoing edges are terminal.
#[derive(Debug, Clone)]
pub struct ToyMdp {
    states: Vec<ToyState>,
    root: usize,
    horizon: usize,
}

#[derive(Debug, Default)]
pub struct ToyMdpBuilder {
    states: Vec<ToyState>,
}

impl ToyMdpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a state; `terminal_reward` is only read if the state ends up terminal.
    pub fn state(&mut self, terminal_reward: f64) -> usize {
        self.states.push(ToyState { terminal_reward, edges: Vec::new() });
        self.states.len() - 1
    }

    /// Adds an action from `from` to `to`; action ids follow insertion order.
    pub fn edge(&mut self, from: usize, to: usize, reward: f64) {
        self.states[from].edges.push((to, reward));
    }

    pub fn build(self, root: usize) -> Result<ToyMdp, MdpError> {
        let mut mdp = ToyMdp { states: self.states, root, horizon: 0 };
        let mut depth = vec![usize::MAX; mdp.states.len()];
        mdp.horizon = mdp.depth_from(root, &mut depth)?;
        Ok(mdp)
    }
}

impl ToyMdp {
    /// Layered random MDP: `depth` decisions, `width` states per inner layer and
    /// between 1 and `max_branch` actions per non-terminal state. Transition
    /// and terminal rewards are uniform in [-1, 1].
    pub fn random(depth: usize, width: usize, max_branch: usize, rng: &mut impl Rng) -> Self {
        assert!(depth >= 1 && width >= 1 && max_branch >= 1);
        let mut b = ToyMdpBuilder::new();
        let root = b.state(rng.random_range(-1.0..1.0));
        let mut layer = vec![root];
        for _ in 0..depth {
            let next: Vec<usize> = (0..width).map(|_| b.state(rng.random_range(-1.0..1.0))).collect();
            for &s in &layer {
                let k = rng.random_range(1..=max_branch.min(width));
                let mut targets = next.clone();
                for i in 0..k {
                    let j = rng.random_range(i..targets.len());
                    targets.swap(i, j);
                    b.edge(s, targets[i], rng.random_range(-1.0..1.0));
                }
            }
            layer = next;
        }
        b.build(root).expect("layered construction has a uniform horizon")
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Number of actions per state id.
    pub fn arity(&self) -> Vec<usize> {
        self.states.iter().map(|s| s.edges.len()).collect()
    }

    /// All states reachable from the root, in discovery order.
    pub fn reachable(&self) -> Vec<usize> {
        let mut seen = vec![false; self.states.len()];
        let mut order = vec![self.root];
        seen[self.root] = true;
        let mut i = 0;
        while i < order.len() {
            for &(t, _) in &self.states[order[i]].edges {
                if !seen[t] {
                    seen[t] = true;
                    order.push(t);
                }
            }
            i += 1;
        }
        order
    }

    fn depth_from(&self, s: usize, memo: &mut [usize]) -> Result<usize, MdpError> {
        if memo[s] != usize::MAX {
            return Ok(memo[s]);
        }
        let edges = &self.states[s].edges;
        let d = if edges.is_empty() {
            0
        } else {
            let mut d0 = None;
            for &(t, _) in edges {
                let d = self.depth_from(t, memo)?;
                if *d0.get_or_insert(d) != d {
                    return Err(MdpError::Env("toy MDP has non-uniform horizon".into()));
                }
            }
            d0.unwrap() + 1
        };
        memo[s] = d;
        Ok(d)
    }
}

impl Environment for ToyMdp {
    type State = usize;

    fn feasible_actions(&self, state: &usize) -> Vec<usize> {
        (0..self.states[*state].edges.len()).collect()
    }

    fn step(&self, state: &usize, action: usize) -> Result<usize, MdpError> {
        self.states[*state].edges.get(action).map(|e| e.0).ok_or(MdpError::InvalidAction { action })
    }

    fn is_terminal(&self, state: &usize) -> bool {
        self.states[*state].edges.is_empty()
    }

    fn terminal_reward(&self, state: &usize) -> Result<f64, MdpError> {
        if !self.is_terminal(state) {
            return Err(MdpError::NotTerminal);
        }
        Ok(self.states[*state].terminal_reward)
    }

    fn reward(&self, state: &usize, action: usize) -> f64 {
        self.states[*state].edges.get(action).map_or(0.0, |e| e.1)
    }
}
