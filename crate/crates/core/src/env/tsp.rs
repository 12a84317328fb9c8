//! Euclidean TSP in the unit square.
//!
//! The first action fixes the tour's start; each later action appends an
//! unvisited node. The closed tour length is reported at the terminal state.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvError, Problem};
use crate::mdp::{Environment, MdpError};

#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    pub nodes: Vec<[f64; 2]>,
    pub seed: Option<u64>,
}

impl TspInstance {
    pub fn new(nodes: Vec<[f64; 2]>) -> Result<Self, EnvError> {
        if nodes.len() < 2 {
            return Err(EnvError::Invalid(format!("TSP needs at least 2 nodes, got {}", nodes.len())));
        }
        for (i, p) in nodes.iter().enumerate() {
            if !p.iter().all(|c| (0.0..=1.0).contains(c)) {
                return Err(EnvError::Invalid(format!(
                    "node {i} at ({}, {}) lies outside the unit square",
                    p[0], p[1]
                )));
            }
        }
        Ok(Self { nodes, seed: None })
    }

    pub fn generate(n: usize, seed: u64) -> Result<Self, EnvError> {
        if n < 2 {
            return Err(EnvError::Invalid(format!("TSP needs at least 2 nodes, got {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        Ok(Self { nodes, seed: Some(seed) })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn dist(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.nodes[a], self.nodes[b]);
        (p[0] - q[0]).hypot(p[1] - q[1])
    }

    /// Length of the closed tour visiting `order`.
    pub fn tour_length(&self, order: &[usize]) -> f64 {
        if order.len() < 2 {
            return 0.0;
        }
        let open: f64 = order.windows(2).map(|w| self.dist(w[0], w[1])).sum();
        open + self.dist(order[order.len() - 1], order[0])
    }

    /// `√2 · n`, the reward divisor.
    pub fn scale(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.n() as f64
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n());
        for p in &self.nodes {
            // Shortest round-trip representation of each coordinate.
            let _ = writeln!(out, "{:?} {:?}", p[0], p[1]);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (ln, header) = lines.next().ok_or_else(|| EnvError::Truncated("empty TSP file".into()))?;
        let n: usize = header
            .trim()
            .parse()
            .map_err(|_| EnvError::Parse { line: ln + 1, msg: format!("expected node count, got {header:?}") })?;
        let mut nodes = Vec::with_capacity(n);
        for (ln, line) in lines {
            if nodes.len() == n {
                return Err(EnvError::Parse { line: ln + 1, msg: "more node lines than declared".into() });
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(EnvError::Parse { line: ln + 1, msg: format!("expected \"x y\", got {line:?}") });
            }
            let mut p = [0.0; 2];
            for (c, f) in p.iter_mut().zip(&fields) {
                *c = f.parse().map_err(|_| EnvError::Parse { line: ln + 1, msg: format!("bad coordinate {f:?}") })?;
                if !(0.0..=1.0).contains(c) {
                    return Err(EnvError::Parse { line: ln + 1, msg: format!("coordinate {c} outside [0, 1]") });
                }
            }
            nodes.push(p);
        }
        if nodes.len() < n {
            return Err(EnvError::Truncated(format!("declared {n} nodes, found {}", nodes.len())));
        }
        Self::new(nodes)
    }

    pub fn read(path: &Path) -> Result<Self, EnvError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), EnvError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TspState {
    pub instance: Arc<TspInstance>,
    /// Length of the open path visited so far, unscaled.
    pub length: f64,
    /// Most recently visited node.
    pub start: Option<usize>,
    /// First visited node, where the tour closes.
    pub end: Option<usize>,
    /// Unvisited nodes in ascending id order.
    pub unvisited: Vec<usize>,
    /// Visited nodes in visit order.
    pub tour: Vec<usize>,
}

impl TspState {
    pub fn initial(instance: Arc<TspInstance>) -> Self {
        let unvisited = (0..instance.n()).collect();
        Self { instance, length: 0.0, start: None, end: None, unvisited, tour: Vec::new() }
    }

    pub fn t(&self) -> usize {
        self.tour.len()
    }

    pub fn is_terminal(&self) -> bool {
        self.unvisited.is_empty()
    }

    pub fn step(&self, node: usize) -> Result<Self, MdpError> {
        let pos = self.unvisited.binary_search(&node).map_err(|_| MdpError::InvalidAction { action: node })?;
        let mut next = self.clone();
        next.unvisited.remove(pos);
        match self.start {
            Some(s) => next.length += self.instance.dist(s, node),
            None => next.end = Some(node),
        }
        next.start = Some(node);
        next.tour.push(node);
        Ok(next)
    }

    /// Closed tour length at a terminal state.
    pub fn tour_length(&self) -> Result<f64, MdpError> {
        if !self.is_terminal() {
            return Err(MdpError::NotTerminal);
        }
        let closing = match (self.start, self.end) {
            (Some(s), Some(e)) => self.instance.dist(s, e),
            _ => 0.0,
        };
        Ok(self.length + closing)
    }
}

/// Element of the square's symmetry group followed by a scale about the centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TspAugmentation {
    /// Quarter turns, 0..4.
    pub rotation: u8,
    pub reflect: bool,
    /// Scale factor in (0.5, 1].
    pub scale: f64,
}

impl TspAugmentation {
    pub const IDENTITY: Self = Self { rotation: 0, reflect: false, scale: 1.0 };

    pub fn sample(rng: &mut (impl Rng + ?Sized)) -> Self {
        let e = rng.random_range(0..8u8);
        Self { rotation: e & 3, reflect: e >= 4, scale: 1.0 - 0.5 * rng.random::<f64>() }
    }

    pub fn apply_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (mut u, mut v) = (p[0] - 0.5, p[1] - 0.5);
        if self.reflect {
            u = -u;
        }
        for _ in 0..self.rotation {
            (u, v) = (-v, u);
        }
        [(0.5 + self.scale * u).clamp(0.0, 1.0), (0.5 + self.scale * v).clamp(0.0, 1.0)]
    }

    pub fn apply_instance(&self, inst: &TspInstance) -> TspInstance {
        TspInstance { nodes: inst.nodes.iter().map(|p| self.apply_point(*p)).collect(), seed: inst.seed }
    }

    pub fn apply(&self, state: &TspState) -> TspState {
        let mut s = state.clone();
        s.instance = Arc::new(self.apply_instance(&state.instance));
        s.length *= self.scale;
        s
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct TspEnv;

impl Environment for TspEnv {
    type State = TspState;

    fn feasible_actions(&self, state: &TspState) -> Vec<usize> {
        state.unvisited.clone()
    }

    fn step(&self, state: &TspState, action: usize) -> Result<TspState, MdpError> {
        state.step(action)
    }

    fn is_terminal(&self, state: &TspState) -> bool {
        state.is_terminal()
    }

    fn terminal_reward(&self, state: &TspState) -> Result<f64, MdpError> {
        Ok(-state.tour_length()? / state.instance.scale())
    }
}

impl Problem for TspEnv {
    type Instance = TspInstance;
    type Size = usize;
    type Augmentation = TspAugmentation;

    const NAME: &'static str = "tsp";

    fn generate(&self, n: usize, seed: u64) -> Result<TspInstance, EnvError> {
        TspInstance::generate(n, seed)
    }

    fn initial_state(&self, instance: &Arc<TspInstance>) -> TspState {
        TspState::initial(instance.clone())
    }

    fn instance<'a>(&self, state: &'a TspState) -> &'a Arc<TspInstance> {
        &state.instance
    }

    fn horizon(&self, instance: &TspInstance) -> usize {
        instance.n()
    }

    fn objective_scale(&self, instance: &TspInstance) -> f64 {
        instance.scale()
    }

    fn step_index(&self, state: &TspState) -> usize {
        state.t()
    }

    fn history<'a>(&self, state: &'a TspState) -> &'a [usize] {
        &state.tour
    }

    fn sample_augmentation(&self, _: &TspInstance, rng: &mut dyn rand::RngCore) -> TspAugmentation {
        TspAugmentation::sample(rng)
    }

    fn apply_augmentation(&self, state: &TspState, aug: &TspAugmentation) -> TspState {
        aug.apply(state)
    }

    fn augmentation_scale(&self, aug: &TspAugmentation) -> f64 {
        aug.scale
    }
}
