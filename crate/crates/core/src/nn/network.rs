//! Transformer state encoders with pointing policy head and value heads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{Grads, Init, NnError, ParamId, ParamStore};
use super::tape::{NodeId, SpatialBias, Tape};
use crate::env::{JsspState, TspState};
use crate::par::{self, Exec};

/// Logit bound of the pointing head.
pub const POINTER_CLIP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Pairwise value head on two latent states, attention-refined pointer query.
    Ptp,
    /// Value head on a latent state and a scalar baseline.
    GreedyScalar,
    /// Value head on one latent state with unbounded output.
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Tsp,
    Jssp { machines: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub encoder: EncoderKind,
    pub head: HeadKind,
    pub dim: usize,
    pub heads: usize,
    /// Blocks of the TSP encoder or of the JSSP state encoder.
    pub blocks: usize,
    /// Blocks of the JSSP per-job encoder.
    pub job_blocks: usize,
    pub seed: u64,
}

impl NetConfig {
    pub fn new(encoder: EncoderKind, head: HeadKind) -> Self {
        Self { encoder, head, dim: 32, heads: 2, blocks: 2, job_blocks: 2, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Lin {
    w: ParamId,
    b: Option<ParamId>,
}

#[derive(Debug, Clone, Copy)]
enum NormKind {
    Layer,
    Instance,
}

#[derive(Debug, Clone)]
struct Block {
    norm: NormKind,
    n1: (ParamId, ParamId),
    q: Lin,
    k: Lin,
    v: Lin,
    o: Lin,
    n2: (ParamId, ParamId),
    ff1: Lin,
    ff2: Lin,
    spatial: Option<(ParamId, ParamId)>,
}

#[derive(Debug, Clone)]
struct TspEncoder {
    token: ParamId,
    start: ParamId,
    end: ParamId,
    start_ind: ParamId,
    end_ind: ParamId,
    len: Lin,
    num: Lin,
    node: Lin,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone)]
struct JsspEncoder {
    machines: usize,
    p_machine: ParamId,
    p_op: ParamId,
    job_token: ParamId,
    op: Lin,
    m_avail: Lin,
    j_avail: Lin,
    job_blocks: Vec<Block>,
    token: ParamId,
    num: Lin,
    len: Lin,
    job: Lin,
    m_avail2: Lin,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone)]
enum Encoder {
    Tsp(TspEncoder),
    Jssp(JsspEncoder),
}

#[derive(Debug, Clone)]
struct PolicyHead {
    /// Single-head attention and feed-forward refining the query (PTP only).
    refine: Option<(Lin, Lin, Lin, Lin, Lin, Lin)>,
    wq: Lin,
    wk: Lin,
}

/// Network structure; parameters live in a separate [`ParamStore`] so that
/// snapshots can be shared between workers while the learner updates its own copy.
#[derive(Debug, Clone)]
pub struct Network {
    pub config: NetConfig,
    encoder: Encoder,
    policy: PolicyHead,
    value: Vec<Lin>,
}

/// Encoder outputs on a tape: the state token and one token per feasible action.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    pub state: NodeId,
    pub actions: Option<NodeId>,
}

/// Input of the value head, matching [`HeadKind`].
#[derive(Debug, Clone, Copy)]
pub enum ValueInput<T> {
    Pair(T, T),
    Scalar(T, f64),
    Single(T),
}

/// A state that can be encoded by a [`Network`].
pub trait Encode {
    fn encode(&self, net: &Network, tape: &mut Tape) -> Result<Encoded, NnError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Logits over feasible actions in ascending action-id order; empty at terminal states.
    pub logits: Vec<f64>,
    pub latent: Vec<f64>,
}

struct Builder<'a> {
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    fn p(&mut self, name: &str, rows: usize, cols: usize, init: Init) -> ParamId {
        self.store.add(name, rows, cols, init, &mut self.rng)
    }

    fn lin(&mut self, name: &str, din: usize, dout: usize, bias: bool) -> Lin {
        let w = self.p(&format!("{name}.w"), din, dout, Init::FanIn(din));
        let b = bias.then(|| self.p(&format!("{name}.b"), 1, dout, Init::FanIn(din)));
        Lin { w, b }
    }

    fn zero_lin(&mut self, name: &str, din: usize, dout: usize) -> Lin {
        let w = self.p(&format!("{name}.w"), din, dout, Init::Zeros);
        let b = Some(self.p(&format!("{name}.b"), 1, dout, Init::Zeros));
        Lin { w, b }
    }

    fn emb(&mut self, name: &str, rows: usize, d: usize) -> ParamId {
        self.p(name, rows, d, Init::FanIn(1))
    }

    fn norm(&mut self, name: &str, d: usize) -> (ParamId, ParamId) {
        (self.p(&format!("{name}.g"), 1, d, Init::Ones), self.p(&format!("{name}.b"), 1, d, Init::Zeros))
    }

    fn block(&mut self, name: &str, d: usize, heads: usize, norm: NormKind, spatial: bool) -> Block {
        Block {
            norm,
            n1: self.norm(&format!("{name}.norm1"), d),
            q: self.lin(&format!("{name}.q"), d, d, true),
            k: self.lin(&format!("{name}.k"), d, d, true),
            v: self.lin(&format!("{name}.v"), d, d, true),
            o: self.lin(&format!("{name}.o"), d, d, true),
            n2: self.norm(&format!("{name}.norm2"), d),
            ff1: self.lin(&format!("{name}.ff1"), d, 4 * d, true),
            ff2: self.lin(&format!("{name}.ff2"), 4 * d, d, true),
            spatial: spatial.then(|| {
                (
                    self.p(&format!("{name}.spatial.w"), 1, heads, Init::FanIn(1)),
                    self.p(&format!("{name}.spatial.b"), 1, heads, Init::FanIn(1)),
                )
            }),
        }
    }
}

impl Network {
    pub fn new(config: NetConfig) -> Result<(Self, ParamStore), NnError> {
        let d = config.dim;
        if d == 0 || config.heads == 0 || !d.is_multiple_of(config.heads) {
            return Err(NnError::Shape(format!("dim {d} must be a positive multiple of heads {}", config.heads)));
        }
        let mut store = ParamStore::default();
        let mut b = Builder { store: &mut store, rng: ChaCha8Rng::seed_from_u64(config.seed) };
        let h = config.heads;
        let encoder = match config.encoder {
            EncoderKind::Tsp => Encoder::Tsp(TspEncoder {
                token: b.emb("tsp.token", 1, d),
                start: b.emb("tsp.start", 1, d),
                end: b.emb("tsp.end", 1, d),
                start_ind: b.emb("tsp.start_ind", 1, d),
                end_ind: b.emb("tsp.end_ind", 1, d),
                len: b.lin("tsp.len", 1, d, true),
                num: b.lin("tsp.num", 1, d, true),
                node: b.lin("tsp.node", 2, d, true),
                blocks: (0..config.blocks)
                    .map(|i| b.block(&format!("tsp.block{i}"), d, h, NormKind::Layer, true))
                    .collect(),
            }),
            EncoderKind::Jssp { machines: m } => {
                if m == 0 {
                    return Err(NnError::Shape("JSSP encoder needs at least one machine".into()));
                }
                Encoder::Jssp(JsspEncoder {
                    machines: m,
                    p_machine: b.emb("jssp.p_machine", m, d),
                    p_op: b.emb("jssp.p_op", m, d),
                    job_token: b.emb("jssp.job_token", 1, d),
                    op: b.lin("jssp.op", 2 * d + 1, d, true),
                    m_avail: b.lin("jssp.m_avail", m, d, true),
                    j_avail: b.lin("jssp.j_avail", 1, d, true),
                    job_blocks: (0..config.job_blocks)
                        .map(|i| b.block(&format!("jssp.job_block{i}"), d, h, NormKind::Instance, false))
                        .collect(),
                    token: b.emb("jssp.token", 1, d),
                    num: b.lin("jssp.num", 1, d, true),
                    len: b.lin("jssp.len", 1, d, true),
                    job: b.lin("jssp.job", d, d, true),
                    m_avail2: b.lin("jssp.m_avail2", m, d, true),
                    blocks: (0..config.blocks)
                        .map(|i| b.block(&format!("jssp.block{i}"), d, h, NormKind::Instance, false))
                        .collect(),
                })
            }
        };
        let refine = (config.head == HeadKind::Ptp).then(|| {
            (
                b.lin("policy.sha.q", d, d, true),
                b.lin("policy.sha.k", d, d, true),
                b.lin("policy.sha.v", d, d, true),
                b.lin("policy.sha.o", d, d, true),
                b.lin("policy.ff1", d, 4 * d, true),
                b.lin("policy.ff2", 4 * d, d, true),
            )
        });
        let policy = PolicyHead { refine, wq: b.lin("policy.wq", d, d, false), wk: b.lin("policy.wk", d, d, false) };

        let din = match config.head {
            HeadKind::Ptp => 2 * d,
            HeadKind::GreedyScalar => d + 1,
            HeadKind::Single => d,
        };
        let (depth, width) = match config.encoder {
            EncoderKind::Tsp => (2, d),
            EncoderKind::Jssp { .. } => (3, 2 * d),
        };
        let mut value = Vec::with_capacity(depth + 1);
        let mut prev = din;
        for i in 0..depth {
            value.push(b.lin(&format!("value.hidden{i}"), prev, width, true));
            prev = width;
        }
        value.push(b.zero_lin("value.out", prev, 1));
        Ok((Self { config, encoder, policy, value }, store))
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    fn linear(&self, t: &mut Tape, x: NodeId, l: Lin) -> NodeId {
        t.linear(x, l.w, l.b)
    }

    fn block(&self, t: &mut Tape, x: NodeId, blk: &Block, geometry: Option<(&[f64], &[bool])>) -> NodeId {
        let norm = |t: &mut Tape, x, (g, b): (ParamId, ParamId)| match blk.norm {
            NormKind::Layer => t.layer_norm(x, g, b),
            NormKind::Instance => t.instance_norm(x, g, b),
        };
        let h = norm(t, x, blk.n1);
        let q = self.linear(t, h, blk.q);
        let k = self.linear(t, h, blk.k);
        let v = self.linear(t, h, blk.v);
        let bias = match (blk.spatial, geometry) {
            (Some((w, b)), Some((dist, spatial))) => {
                Some(SpatialBias { dist: dist.to_vec(), spatial: spatial.to_vec(), w, b })
            }
            _ => None,
        };
        let a = t.attention(q, k, v, self.config.heads, bias);
        let a = self.linear(t, a, blk.o);
        let x = t.add(x, a);
        let h = norm(t, x, blk.n2);
        let f = self.linear(t, h, blk.ff1);
        let f = t.gelu(f);
        let f = self.linear(t, f, blk.ff2);
        t.add(x, f)
    }

    fn scalar_embed(&self, t: &mut Tape, x: f64, l: Lin) -> NodeId {
        let i = t.input(1, 1, vec![x]);
        self.linear(t, i, l)
    }

    pub fn encode_tsp(&self, t: &mut Tape, s: &TspState) -> Result<Encoded, NnError> {
        let Encoder::Tsp(e) = &self.encoder else {
            return Err(NnError::Encode("network has a JSSP encoder".into()));
        };
        let inst = &s.instance;
        let n = inst.n();
        let mut parts = vec![t.param_row(e.token, 0)];
        parts.push(self.scalar_embed(t, s.length, e.len));
        parts.push(self.scalar_embed(t, (n - s.t()) as f64, e.num));
        let mut coords: Vec<Option<[f64; 2]>> = vec![None, None, None];
        match (s.start, s.end) {
            (Some(a), Some(z)) => {
                for (node, ind) in [(a, e.start_ind), (z, e.end_ind)] {
                    let x = t.input(1, 2, inst.nodes[node].to_vec());
                    let x = self.linear(t, x, e.node);
                    let i = t.param_row(ind, 0);
                    parts.push(t.add(x, i));
                    coords.push(Some(inst.nodes[node]));
                }
            }
            _ => {
                parts.push(t.param_row(e.start, 0));
                parts.push(t.param_row(e.end, 0));
                coords.extend([None, None]);
            }
        }
        let m = s.unvisited.len();
        if m > 0 {
            let xs: Vec<f64> = s.unvisited.iter().flat_map(|&u| inst.nodes[u]).collect();
            let x = t.input(m, 2, xs);
            parts.push(self.linear(t, x, e.node));
            coords.extend(s.unvisited.iter().map(|&u| Some(inst.nodes[u])));
        }
        let len = coords.len();
        let spatial: Vec<bool> = coords.iter().map(Option::is_some).collect();
        let mut dist = vec![0.0; len * len];
        for i in 0..len {
            for j in 0..len {
                if let (Some(p), Some(q)) = (coords[i], coords[j]) {
                    dist[i * len + j] = (p[0] - q[0]).hypot(p[1] - q[1]);
                }
            }
        }
        let mut x = t.concat_rows(&parts);
        for blk in &e.blocks {
            x = self.block(t, x, blk, Some((&dist, &spatial)));
        }
        let state = t.slice_rows(x, 0, 1);
        let actions = (m > 0).then(|| t.slice_rows(x, 5, m));
        Ok(Encoded { state, actions })
    }

    pub fn encode_jssp(&self, t: &mut Tape, s: &JsspState) -> Result<Encoded, NnError> {
        let Encoder::Jssp(e) = &self.encoder else {
            return Err(NnError::Encode("network has a TSP encoder".into()));
        };
        let inst = &s.instance;
        let m = inst.machines();
        if m != e.machines {
            return Err(NnError::Encode(format!("instance has {m} machines, network expects {}", e.machines)));
        }
        let c_min = s.min_machine_avail();
        let rel_avail: Vec<f64> = s.machine_avail.iter().map(|c| c - c_min).collect();
        let avail_in = t.input(1, m, rel_avail);
        let m_avail = self.linear(t, avail_in, e.m_avail);

        let jobs = s.unfinished();
        let mut latents = Vec::with_capacity(jobs.len());
        for &j in &jobs {
            let mut ops = Vec::with_capacity(m - s.next_op[j]);
            for l in s.next_op[j]..m {
                let pm = t.param_row(e.p_machine, inst.machine(j, l));
                let po = t.param_row(e.p_op, l);
                let p = t.input(1, 1, vec![inst.times[j][l]]);
                ops.push(t.concat_cols(&[pm, po, p]));
            }
            let ops = t.concat_rows(&ops);
            let ops = self.linear(t, ops, e.op);
            let tok = t.param_row(e.job_token, 0);
            let ja = self.scalar_embed(t, (s.job_avail[j] - c_min).max(0.0), e.j_avail);
            let mut x = t.concat_rows(&[tok, m_avail, ja, ops]);
            for blk in &e.job_blocks {
                x = self.block(t, x, blk, None);
            }
            latents.push(t.slice_rows(x, 0, 1));
        }

        let mut parts = vec![t.param_row(e.token, 0)];
        parts.push(self.scalar_embed(t, jobs.len() as f64, e.num));
        parts.push(self.scalar_embed(t, c_min, e.len));
        parts.push(self.linear(t, avail_in, e.m_avail2));
        if !latents.is_empty() {
            let l = t.concat_rows(&latents);
            parts.push(self.linear(t, l, e.job));
        }
        let mut x = t.concat_rows(&parts);
        for blk in &e.blocks {
            x = self.block(t, x, blk, None);
        }
        let state = t.slice_rows(x, 0, 1);
        let actions = (!jobs.is_empty()).then(|| t.slice_rows(x, 4, jobs.len()));
        Ok(Encoded { state, actions })
    }

    /// Pointing logits `10·tanh(qᵀk/√d)` over the action tokens, `1 × m`.
    pub fn policy_on(&self, t: &mut Tape, enc: Encoded) -> Result<NodeId, NnError> {
        let actions = enc.actions.ok_or(NnError::AllMasked)?;
        let mut query = enc.state;
        if let Some((q, k, v, o, ff1, ff2)) = self.policy.refine {
            let qq = self.linear(t, enc.state, q);
            let kk = self.linear(t, actions, k);
            let vv = self.linear(t, actions, v);
            let y = t.attention(qq, kk, vv, 1, None);
            let y = self.linear(t, y, o);
            let f = self.linear(t, y, ff1);
            let f = t.gelu(f);
            let f = self.linear(t, f, ff2);
            query = t.add(f, y);
        }
        let q = self.linear(t, query, self.policy.wq);
        let k = self.linear(t, actions, self.policy.wk);
        let u = t.matmul_t(q, k);
        let u = t.scale(u, 1.0 / (self.dim() as f64).sqrt());
        let u = t.tanh(u);
        Ok(t.scale(u, POINTER_CLIP))
    }

    /// Value head on latent-state nodes; output is `1 × 1`.
    pub fn value_on(&self, t: &mut Tape, input: ValueInput<NodeId>) -> Result<NodeId, NnError> {
        let x = match (self.config.head, input) {
            (HeadKind::Ptp, ValueInput::Pair(a, b)) => t.concat_cols(&[a, b]),
            (HeadKind::GreedyScalar, ValueInput::Scalar(a, r)) => {
                let r = t.input(1, 1, vec![r]);
                t.concat_cols(&[a, r])
            }
            (HeadKind::Single, ValueInput::Single(a)) => a,
            (HeadKind::Ptp, _) => return Err(NnError::Arity("PTP value head takes a pair of states")),
            (HeadKind::GreedyScalar, _) => {
                return Err(NnError::Arity("greedy-scalar value head takes a state and a baseline"))
            }
            (HeadKind::Single, _) => return Err(NnError::Arity("single value head takes one state")),
        };
        let mut h = x;
        let last = self.value.len() - 1;
        for (i, l) in self.value.iter().enumerate() {
            h = self.linear(t, h, *l);
            if i < last {
                h = t.gelu(h);
            }
        }
        Ok(match self.config.head {
            HeadKind::Single => h,
            _ => t.tanh(h),
        })
    }

    /// Encodes `state` and evaluates the policy head (skipped at terminal states).
    pub fn evaluate<S: Encode + ?Sized>(&self, params: &ParamStore, state: &S) -> Result<Evaluation, NnError> {
        let mut t = Tape::new(params);
        let enc = state.encode(self, &mut t)?;
        let latent = t.value(enc.state).to_vec();
        let logits = match enc.actions {
            Some(_) => {
                let u = self.policy_on(&mut t, enc)?;
                t.value(u).to_vec()
            }
            None => Vec::new(),
        };
        if latent.iter().chain(&logits).any(|x| !x.is_finite()) {
            return Err(NnError::NonFinite("encoder"));
        }
        Ok(Evaluation { logits, latent })
    }

    /// Latent state vector without the policy head.
    pub fn latent<S: Encode + ?Sized>(&self, params: &ParamStore, state: &S) -> Result<Vec<f64>, NnError> {
        let mut t = Tape::new(params);
        let enc = state.encode(self, &mut t)?;
        Ok(t.value(enc.state).to_vec())
    }

    /// Value head applied to precomputed latent vectors.
    pub fn value(&self, params: &ParamStore, input: ValueInput<&[f64]>) -> Result<f64, NnError> {
        let mut t = Tape::new(params);
        let d = self.dim();
        let node = |t: &mut Tape, v: &[f64]| t.input(1, d, v.to_vec());
        let input = match input {
            ValueInput::Pair(a, b) => ValueInput::Pair(node(&mut t, a), node(&mut t, b)),
            ValueInput::Scalar(a, r) => ValueInput::Scalar(node(&mut t, a), r),
            ValueInput::Single(a) => ValueInput::Single(node(&mut t, a)),
        };
        let v = self.value_on(&mut t, input)?;
        let v = t.scalar(v);
        if !v.is_finite() {
            return Err(NnError::NonFinite("value head"));
        }
        Ok(v)
    }
}

impl Encode for TspState {
    fn encode(&self, net: &Network, tape: &mut Tape) -> Result<Encoded, NnError> {
        net.encode_tsp(tape, self)
    }
}

impl Encode for JsspState {
    fn encode(&self, net: &Network, tape: &mut Tape) -> Result<Encoded, NnError> {
        net.encode_jssp(tape, self)
    }
}

/// Sets entries whose mask is false to `-inf`.
pub fn mask_logits(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, NnError> {
    if logits.len() != mask.len() {
        return Err(NnError::Shape(format!("{} logits but {} mask entries", logits.len(), mask.len())));
    }
    if !mask.iter().any(|m| *m) {
        return Err(NnError::AllMasked);
    }
    Ok(logits.iter().zip(mask).map(|(l, m)| if *m { *l } else { f64::NEG_INFINITY }).collect())
}

#[derive(Debug, Clone)]
pub struct PolicySample<S> {
    pub state: S,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ValueSample<S> {
    pub input: ValueInput<S>,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub policy: f64,
    pub value: f64,
}

impl LossStats {
    pub fn total(&self) -> f64 {
        self.policy + self.value
    }
}

const GRAD_CHUNK: usize = 16;

/// Builds the weighted loss term of sample `i` (policy samples first).
fn sample_loss<S: Encode>(
    net: &Network,
    t: &mut Tape,
    policy: &[PolicySample<S>],
    value: &[ValueSample<S>],
    i: usize,
    stats: &mut LossStats,
) -> Result<NodeId, NnError> {
    let (np, nv) = (policy.len(), value.len());
    let root = if i < np {
        let s = &policy[i];
        let enc = s.state.encode(net, t)?;
        let u = net.policy_on(t, enc)?;
        if s.target.len() != t.shape(u).1 {
            return Err(NnError::Shape(format!(
                "policy target has {} entries, state has {} actions",
                s.target.len(),
                t.shape(u).1
            )));
        }
        let kl = t.kl(u, &s.target);
        stats.policy += t.scalar(kl) / np as f64;
        t.scale(kl, 1.0 / np as f64)
    } else {
        let s = &value[i - np];
        let enc = |t: &mut Tape, x: &S| x.encode(net, t).map(|e| e.state);
        let input = match &s.input {
            ValueInput::Pair(a, b) => ValueInput::Pair(enc(t, a)?, enc(t, b)?),
            ValueInput::Scalar(a, r) => ValueInput::Scalar(enc(t, a)?, *r),
            ValueInput::Single(a) => ValueInput::Single(enc(t, a)?),
        };
        let v = net.value_on(t, input)?;
        let e = t.mse(v, s.target);
        stats.value += t.scalar(e) / nv as f64;
        t.scale(e, 1.0 / nv as f64)
    };
    if !t.scalar(root).is_finite() {
        return Err(NnError::NonFinite("loss"));
    }
    Ok(root)
}

/// Mean KL over policy samples plus mean squared error over value samples,
/// with gradients for every parameter.
///
/// Samples are processed in fixed chunks summed in order, so the result does
/// not depend on the execution mode.
pub fn loss_and_grad<S: Encode + Sync>(
    net: &Network,
    params: &ParamStore,
    policy: &[PolicySample<S>],
    value: &[ValueSample<S>],
    exec: Exec,
) -> Result<(LossStats, Grads), NnError> {
    let total = policy.len() + value.len();
    if total == 0 {
        return Err(NnError::EmptyBatch);
    }
    let chunks = total.div_ceil(GRAD_CHUNK);
    let results = par::map_range(exec, chunks, |c| -> Result<(LossStats, Grads), NnError> {
        let mut grads = params.zeros_like();
        let mut stats = LossStats::default();
        for i in c * GRAD_CHUNK..((c + 1) * GRAD_CHUNK).min(total) {
            let mut t = Tape::new(params);
            let root = sample_loss(net, &mut t, policy, value, i, &mut stats)?;
            t.backward(root, &mut grads);
        }
        Ok((stats, grads))
    });
    let mut stats = LossStats::default();
    let mut grads = params.zeros_like();
    for r in results {
        let (s, g) = r?;
        stats.policy += s.policy;
        stats.value += s.value;
        grads.add_assign(&g);
    }
    Ok((stats, grads))
}

/// Forward-only counterpart of [`loss_and_grad`].
pub fn loss<S: Encode>(
    net: &Network,
    params: &ParamStore,
    policy: &[PolicySample<S>],
    value: &[ValueSample<S>],
) -> Result<LossStats, NnError> {
    let total = policy.len() + value.len();
    if total == 0 {
        return Err(NnError::EmptyBatch);
    }
    let mut stats = LossStats::default();
    for i in 0..total {
        let mut t = Tape::new(params);
        sample_loss(net, &mut t, policy, value, i, &mut stats)?;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::env::{JsspInstance, TspInstance};

    fn net(encoder: EncoderKind, head: HeadKind, dim: usize) -> (Network, ParamStore) {
        Network::new(NetConfig { dim, seed: 7, ..NetConfig::new(encoder, head) }).unwrap()
    }

    fn tsp_state(inst: TspInstance, tour: &[usize]) -> TspState {
        tour.iter().fold(TspState::initial(Arc::new(inst)), |s, &a| s.step(a).unwrap())
    }

    fn jssp_state(inst: JsspInstance, seq: &[usize]) -> JsspState {
        seq.iter().fold(JsspState::initial(Arc::new(inst)), |s, &a| s.step(a).unwrap())
    }

    #[test]
    fn tsp_token_count_matches_unvisited() {
        let (n, p) = net(EncoderKind::Tsp, HeadKind::Single, 16);
        for t in 0..=7 {
            let order: Vec<usize> = (0..t).collect();
            let s = tsp_state(TspInstance::generate(7, 1).unwrap(), &order);
            let mut tape = Tape::new(&p);
            let enc = s.encode(&n, &mut tape).unwrap();
            assert_eq!(enc.actions.map_or(0, |a| tape.shape(a).0), 7 - t);
            assert!(tape.value(enc.state).iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn tsp_encoder_is_permutation_equivariant() {
        let (n, p) = net(EncoderKind::Tsp, HeadKind::Ptp, 16);
        let inst = TspInstance::generate(8, 3).unwrap();
        let perm = [5, 2, 7, 0, 3, 6, 1, 4];
        let mut nodes = vec![[0.0; 2]; 8];
        for i in 0..8 {
            nodes[perm[i]] = inst.nodes[i];
        }
        let tour = [3, 6];
        let a = tsp_state(inst, &tour);
        let b = tsp_state(TspInstance::new(nodes).unwrap(), &tour.map(|x| perm[x]));
        let ea = n.evaluate(&p, &a).unwrap();
        let eb = n.evaluate(&p, &b).unwrap();
        for (x, y) in ea.latent.iter().zip(&eb.latent) {
            assert!((x - y).abs() < 1e-6);
        }
        for (i, &u) in a.unvisited.iter().enumerate() {
            let j = b.unvisited.iter().position(|&v| v == perm[u]).unwrap();
            assert!((ea.logits[i] - eb.logits[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn jssp_encoder_is_permutation_equivariant() {
        let (n, p) = net(EncoderKind::Jssp { machines: 3 }, HeadKind::Single, 16);
        let inst = JsspInstance::generate(4, 3, 5).unwrap();
        let perm = [2, 0, 3, 1];
        let mut order = vec![Vec::new(); 4];
        let mut times = vec![Vec::new(); 4];
        for i in 0..4 {
            order[perm[i]] = inst.machine_order[i].clone();
            times[perm[i]] = inst.times[i].clone();
        }
        let seq = [0, 0, 2, 1, 0];
        let a = jssp_state(inst, &seq);
        let b = jssp_state(JsspInstance::new(order, times).unwrap(), &seq.map(|j| perm[j]));
        let ea = n.evaluate(&p, &a).unwrap();
        let eb = n.evaluate(&p, &b).unwrap();
        for (x, y) in ea.latent.iter().zip(&eb.latent) {
            assert!((x - y).abs() < 1e-6);
        }
        let (ua, ub) = (a.unfinished(), b.unfinished());
        for (i, &j) in ua.iter().enumerate() {
            let k = ub.iter().position(|&v| v == perm[j]).unwrap();
            assert!((ea.logits[i] - eb.logits[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn jssp_token_count_matches_unfinished_jobs() {
        let (n, p) = net(EncoderKind::Jssp { machines: 2 }, HeadKind::Ptp, 8);
        let s = jssp_state(JsspInstance::generate(3, 2, 0).unwrap(), &[1, 1]);
        let e = n.evaluate(&p, &s).unwrap();
        assert_eq!(e.logits.len(), 2);
        let done = jssp_state(JsspInstance::generate(1, 2, 0).unwrap(), &[0, 0]);
        assert!(n.evaluate(&p, &done).unwrap().logits.is_empty());
    }

    #[test]
    fn logits_are_bounded_and_symmetric() {
        let (n, mut p) = net(EncoderKind::Tsp, HeadKind::Single, 8);
        for t in &mut p.tensors {
            t.data.iter_mut().for_each(|x| *x *= 30.0);
        }
        let inst = TspInstance::new(vec![[0.1, 0.2], [0.7, 0.7], [0.7, 0.7], [0.3, 0.9]]).unwrap();
        let e = n.evaluate(&p, &tsp_state(inst, &[0])).unwrap();
        assert!(e.logits.iter().all(|u| u.abs() <= POINTER_CLIP));
        assert_eq!(e.logits[0], e.logits[1]);
    }

    #[test]
    fn masked_actions_get_no_mass() {
        let l = mask_logits(&[1.0, 2.0, 3.0], &[true, false, true]).unwrap();
        assert_eq!(crate::nn::softmax(&l)[1], 0.0);
        assert_eq!(mask_logits(&[1.0], &[false]).unwrap_err(), NnError::AllMasked);
    }

    #[test]
    fn zero_initialised_value_head_outputs_zero() {
        for head in [HeadKind::Ptp, HeadKind::GreedyScalar, HeadKind::Single] {
            let (n, p) = net(EncoderKind::Tsp, head, 8);
            let l = [0.3; 8];
            let input = match head {
                HeadKind::Ptp => ValueInput::Pair(&l[..], &l[..]),
                HeadKind::GreedyScalar => ValueInput::Scalar(&l[..], -0.4),
                HeadKind::Single => ValueInput::Single(&l[..]),
            };
            assert_eq!(n.value(&p, input).unwrap(), 0.0);
        }
    }

    #[test]
    fn bounded_and_unbounded_value_heads() {
        let (n, mut p) = net(EncoderKind::Tsp, HeadKind::Ptp, 8);
        let (ns, mut ps) = net(EncoderKind::Tsp, HeadKind::Single, 8);
        for t in p.tensors.iter_mut().chain(ps.tensors.iter_mut()) {
            t.data.iter_mut().enumerate().for_each(|(i, x)| *x = 3.0 + (i % 3) as f64);
        }
        let l = vec![1.0; 8];
        let v = n.value(&p, ValueInput::Pair(&l, &l)).unwrap();
        assert!((-1.0..=1.0).contains(&v));
        assert!(ns.value(&ps, ValueInput::Single(&l)).unwrap() > 1.0);
    }

    #[test]
    fn value_arity_is_checked() {
        let (n, p) = net(EncoderKind::Tsp, HeadKind::Ptp, 8);
        let l = vec![0.0; 8];
        assert!(matches!(n.value(&p, ValueInput::Single(&l)), Err(NnError::Arity(_))));
    }

    #[test]
    fn matching_targets_give_zero_loss() {
        let (n, p) = net(EncoderKind::Tsp, HeadKind::Single, 8);
        let s = tsp_state(TspInstance::generate(5, 2).unwrap(), &[1]);
        let e = n.evaluate(&p, &s).unwrap();
        let policy = vec![PolicySample { state: s.clone(), target: crate::nn::softmax(&e.logits) }];
        let value = vec![ValueSample { input: ValueInput::Single(s), target: 0.0 }];
        let stats = loss(&n, &p, &policy, &value).unwrap();
        assert!(stats.policy.abs() < 1e-12);
        assert_eq!(stats.value, 0.0);
        let none: [PolicySample<TspState>; 0] = [];
        let nov: [ValueSample<TspState>; 0] = [];
        assert_eq!(loss(&n, &p, &none, &nov).unwrap_err(), NnError::EmptyBatch);
    }

    #[test]
    fn batch_gradient_is_independent_of_execution_mode() {
        let (n, p) = net(EncoderKind::Tsp, HeadKind::Ptp, 8);
        let states: Vec<TspState> =
            (0..20).map(|i| tsp_state(TspInstance::generate(5, i).unwrap(), &[0, 1][..(i % 3) as usize])).collect();
        let policy: Vec<_> = states
            .iter()
            .map(|s| PolicySample { state: s.clone(), target: vec![1.0 / s.unvisited.len() as f64; s.unvisited.len()] })
            .collect();
        let value: Vec<_> = states
            .windows(2)
            .map(|w| ValueSample { input: ValueInput::Pair(w[0].clone(), w[1].clone()), target: 1.0 })
            .collect();
        let a = loss_and_grad(&n, &p, &policy, &value, Exec::Sequential).unwrap();
        let b = loss_and_grad(&n, &p, &policy, &value, Exec::Parallel).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
    }
}
