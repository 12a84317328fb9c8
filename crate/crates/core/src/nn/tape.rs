//! Reverse-mode differentiation over row-major matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Parameters are
//! referenced by id and never copied for matrix products; their gradients
//! are accumulated into a [`Grads`] buffer by [`Tape::backward`].

use super::params::{Grads, ParamId, ParamStore};

pub type NodeId = usize;

const NORM_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Learnable attention bias `w_h · d_ij + b_h` on pairs of tokens that are
/// both marked as spatial.
#[derive(Debug, Clone)]
pub struct SpatialBias {
    /// Pairwise distances, `n × n` over the attended sequence.
    pub dist: Vec<f64>,
    pub spatial: Vec<bool>,
    /// `1 × heads` slopes and offsets.
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    ParamRow(ParamId, usize),
    Linear { x: NodeId, w: ParamId, b: Option<ParamId> },
    Add(NodeId, NodeId),
    ConcatRows(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    SliceRows { x: NodeId, start: usize },
    Norm { x: NodeId, g: ParamId, b: ParamId, per_row: bool, xhat: Vec<f64>, inv_std: Vec<f64> },
    Gelu(NodeId),
    Tanh(NodeId),
    Scale(NodeId, f64),
    Attention { q: NodeId, k: NodeId, v: NodeId, heads: usize, probs: Vec<f64>, bias: Option<SpatialBias> },
    MatMulT(NodeId, NodeId),
    Kl { logits: NodeId, target: Vec<f64>, probs: Vec<f64> },
    Mse { x: NodeId, target: f64 },
    WeightedSum(Vec<(NodeId, f64)>),
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self { params, nodes: Vec::with_capacity(256) }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        (self.nodes[id].rows, self.nodes[id].cols)
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id].value.len(), 1);
        self.nodes[id].value[0]
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op, needs_grad: bool) -> NodeId {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node { rows, cols, value, op, needs_grad });
        self.nodes.len() - 1
    }

    fn ng(&self, id: NodeId) -> bool {
        self.nodes[id].needs_grad
    }

    /// Constant input, no gradient.
    pub fn input(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> NodeId {
        self.push(rows, cols, value, Op::Input, false)
    }

    /// Whole parameter tensor as a node.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        let t = &self.params.tensors[id];
        self.push(t.rows, t.cols, t.data.clone(), Op::Param(id), true)
    }

    /// One row of a parameter matrix (lookup embedding).
    pub fn param_row(&mut self, id: ParamId, row: usize) -> NodeId {
        let t = &self.params.tensors[id];
        let v = t.data[row * t.cols..(row + 1) * t.cols].to_vec();
        self.push(1, t.cols, v, Op::ParamRow(id, row), true)
    }

    /// `x W + b` with `W` of shape `in × out`.
    pub fn linear(&mut self, x: NodeId, w: ParamId, b: Option<ParamId>) -> NodeId {
        let (rows, din) = self.shape(x);
        let wt = &self.params.tensors[w];
        assert_eq!(wt.rows, din, "linear {}: input width {} != {}", wt.name, din, wt.rows);
        let dout = wt.cols;
        let mut y = vec![0.0; rows * dout];
        let xv = &self.nodes[x].value;
        for r in 0..rows {
            let yr = &mut y[r * dout..(r + 1) * dout];
            if let Some(b) = b {
                yr.copy_from_slice(self.params.get(b));
            }
            for i in 0..din {
                let xi = xv[r * din + i];
                if xi != 0.0 {
                    let wr = &wt.data[i * dout..(i + 1) * dout];
                    for (yo, wo) in yr.iter_mut().zip(wr) {
                        *yo += xi * wo;
                    }
                }
            }
        }
        self.push(rows, dout, y, Op::Linear { x, w, b }, true)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let v: Vec<f64> = self.nodes[a].value.iter().zip(&self.nodes[b].value).map(|(x, y)| x + y).collect();
        let (r, c) = self.shape(a);
        let ng = self.ng(a) || self.ng(b);
        self.push(r, c, v, Op::Add(a, b), ng)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        let cols = self.nodes[parts[0]].cols;
        let mut v = Vec::new();
        let mut rows = 0;
        for &p in parts {
            assert_eq!(self.nodes[p].cols, cols, "concat_rows width mismatch");
            v.extend_from_slice(&self.nodes[p].value);
            rows += self.nodes[p].rows;
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(rows, cols, v, Op::ConcatRows(parts.to_vec()), ng)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let rows = self.nodes[parts[0]].rows;
        let cols: usize = parts.iter().map(|&p| self.nodes[p].cols).sum();
        let mut v = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let n = &self.nodes[p];
                assert_eq!(n.rows, rows, "concat_cols height mismatch");
                v.extend_from_slice(&n.value[r * n.cols..(r + 1) * n.cols]);
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(rows, cols, v, Op::ConcatCols(parts.to_vec()), ng)
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let cols = self.nodes[x].cols;
        assert!(start + len <= self.nodes[x].rows);
        let v = self.nodes[x].value[start * cols..(start + len) * cols].to_vec();
        let ng = self.ng(x);
        self.push(len, cols, v, Op::SliceRows { x, start }, ng)
    }

    /// Layer normalisation over each row (features of one token).
    pub fn layer_norm(&mut self, x: NodeId, g: ParamId, b: ParamId) -> NodeId {
        self.norm(x, g, b, true)
    }

    /// Instance normalisation over each column (one feature across tokens).
    pub fn instance_norm(&mut self, x: NodeId, g: ParamId, b: ParamId) -> NodeId {
        self.norm(x, g, b, false)
    }

    fn norm(&mut self, x: NodeId, g: ParamId, b: ParamId, per_row: bool) -> NodeId {
        let (rows, cols) = self.shape(x);
        let xv = &self.nodes[x].value;
        let (groups, len) = if per_row { (rows, cols) } else { (cols, rows) };
        let idx = |gi: usize, j: usize| if per_row { gi * cols + j } else { j * cols + gi };
        let mut xhat = vec![0.0; rows * cols];
        let mut inv_std = vec![0.0; groups];
        for gi in 0..groups {
            let mean = (0..len).map(|j| xv[idx(gi, j)]).sum::<f64>() / len as f64;
            let var = (0..len).map(|j| (xv[idx(gi, j)] - mean).powi(2)).sum::<f64>() / len as f64;
            let inv = 1.0 / (var + NORM_EPS).sqrt();
            inv_std[gi] = inv;
            for j in 0..len {
                xhat[idx(gi, j)] = (xv[idx(gi, j)] - mean) * inv;
            }
        }
        let (gv, bv) = (self.params.get(g), self.params.get(b));
        let mut y = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                y[r * cols + c] = gv[c] * xhat[r * cols + c] + bv[c];
            }
        }
        self.push(rows, cols, y, Op::Norm { x, g, b, per_row, xhat, inv_std }, true)
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let v =
            self.nodes[x].value.iter().map(|&z| 0.5 * z * (1.0 + (GELU_C * (z + GELU_A * z * z * z)).tanh())).collect();
        let (r, c) = self.shape(x);
        let ng = self.ng(x);
        self.push(r, c, v, Op::Gelu(x), ng)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x].value.iter().map(|z| z.tanh()).collect();
        let (r, c) = self.shape(x);
        let ng = self.ng(x);
        self.push(r, c, v, Op::Tanh(x), ng)
    }

    pub fn scale(&mut self, x: NodeId, s: f64) -> NodeId {
        let v = self.nodes[x].value.iter().map(|z| z * s).collect();
        let (r, c) = self.shape(x);
        let ng = self.ng(x);
        self.push(r, c, v, Op::Scale(x, s), ng)
    }

    /// Multi-head scaled dot-product attention core (projections excluded).
    /// `q` is `n_q × d`, `k` and `v` are `n_k × d`; heads split `d` evenly.
    pub fn attention(&mut self, q: NodeId, k: NodeId, v: NodeId, heads: usize, bias: Option<SpatialBias>) -> NodeId {
        let (nq, d) = self.shape(q);
        let (nk, dk) = self.shape(k);
        assert_eq!(d, dk);
        assert_eq!(self.shape(v), (nk, d));
        assert_eq!(d % heads, 0, "dimension {d} not divisible by {heads} heads");
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (qv, kv, vv) = (&self.nodes[q].value, &self.nodes[k].value, &self.nodes[v].value);
        let (bw, bb) = match &bias {
            Some(sb) => {
                assert_eq!(nq, nk, "spatial bias needs self-attention");
                (Some(self.params.get(sb.w)), Some(self.params.get(sb.b)))
            }
            None => (None, None),
        };
        let mut probs = vec![0.0; heads * nq * nk];
        let mut out = vec![0.0; nq * d];
        let mut row = vec![0.0; nk];
        for h in 0..heads {
            let off = h * dh;
            for i in 0..nq {
                let qi = &qv[i * d + off..i * d + off + dh];
                let mut mx = f64::NEG_INFINITY;
                for j in 0..nk {
                    let kj = &kv[j * d + off..j * d + off + dh];
                    let mut s = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
                    if let (Some(sb), Some(w), Some(b)) = (&bias, bw, bb) {
                        if sb.spatial[i] && sb.spatial[j] {
                            s += w[h] * sb.dist[i * nk + j] + b[h];
                        }
                    }
                    row[j] = s;
                    mx = mx.max(s);
                }
                let mut z = 0.0;
                for s in row.iter_mut() {
                    *s = (*s - mx).exp();
                    z += *s;
                }
                let p = &mut probs[(h * nq + i) * nk..(h * nq + i + 1) * nk];
                for (pj, s) in p.iter_mut().zip(&row) {
                    *pj = s / z;
                }
                let oi = &mut out[i * d + off..i * d + off + dh];
                for j in 0..nk {
                    let vj = &vv[j * d + off..j * d + off + dh];
                    for (o, x) in oi.iter_mut().zip(vj) {
                        *o += p[j] * x;
                    }
                }
            }
        }
        self.push(nq, d, out, Op::Attention { q, k, v, heads, probs, bias }, true)
    }

    /// `a bᵀ` for `a: r × d`, `b: s × d`.
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (r, d) = self.shape(a);
        let (s, db) = self.shape(b);
        assert_eq!(d, db);
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        let mut y = vec![0.0; r * s];
        for i in 0..r {
            for j in 0..s {
                y[i * s + j] = av[i * d..(i + 1) * d].iter().zip(&bv[j * d..(j + 1) * d]).map(|(x, z)| x * z).sum();
            }
        }
        let ng = self.ng(a) || self.ng(b);
        self.push(r, s, y, Op::MatMulT(a, b), ng)
    }

    /// `KL(target ‖ softmax(logits))` for a single logit row, with `0·log 0 = 0`.
    pub fn kl(&mut self, logits: NodeId, target: &[f64]) -> NodeId {
        let lv = &self.nodes[logits].value;
        assert_eq!(lv.len(), target.len());
        let mx = lv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = lv.iter().map(|l| (l - mx).exp()).sum();
        let log_z = mx + z.ln();
        let probs: Vec<f64> = lv.iter().map(|l| (l - log_z).exp()).collect();
        let loss: f64 = target.iter().zip(lv).filter(|(t, _)| **t > 0.0).map(|(t, l)| t * (t.ln() - (l - log_z))).sum();
        let ng = self.ng(logits);
        self.push(1, 1, vec![loss], Op::Kl { logits, target: target.to_vec(), probs }, ng)
    }

    /// Squared error of a scalar node against `target`.
    pub fn mse(&mut self, x: NodeId, target: f64) -> NodeId {
        let d = self.scalar(x) - target;
        let ng = self.ng(x);
        self.push(1, 1, vec![d * d], Op::Mse { x, target }, ng)
    }

    pub fn weighted_sum(&mut self, terms: &[(NodeId, f64)]) -> NodeId {
        let v = terms.iter().map(|&(n, w)| self.scalar(n) * w).sum();
        let ng = terms.iter().any(|&(n, _)| self.ng(n));
        self.push(1, 1, vec![v], Op::WeightedSum(terms.to_vec()), ng)
    }

    /// Back-propagates from the scalar node `root`, accumulating into `grads`.
    pub fn backward(&self, root: NodeId, grads: &mut Grads) {
        let mut g: Vec<Vec<f64>> = (0..self.nodes.len()).map(|_| Vec::new()).collect();
        g[root] = vec![1.0; self.nodes[root].value.len()];
        for id in (0..=root).rev() {
            if g[id].is_empty() || !self.nodes[id].needs_grad {
                continue;
            }
            let gy = std::mem::take(&mut g[id]);
            self.backward_node(id, &gy, &mut g, grads);
        }
    }

    fn backward_node(&self, id: NodeId, gy: &[f64], g: &mut [Vec<f64>], grads: &mut Grads) {
        let node = &self.nodes[id];
        let (rows, cols) = (node.rows, node.cols);
        match &node.op {
            Op::Input => {}
            Op::Param(p) => axpy(&mut grads.data[*p], gy, 1.0),
            Op::ParamRow(p, r) => {
                let gp = &mut grads.data[*p][r * cols..(r + 1) * cols];
                axpy(gp, gy, 1.0);
            }
            Op::Linear { x, w, b } => {
                let xn = &self.nodes[*x];
                let din = xn.cols;
                let wv = self.params.get(*w);
                {
                    let gw = &mut grads.data[*w];
                    for r in 0..rows {
                        let gr = &gy[r * cols..(r + 1) * cols];
                        for i in 0..din {
                            let xi = xn.value[r * din + i];
                            if xi != 0.0 {
                                axpy(&mut gw[i * cols..(i + 1) * cols], gr, xi);
                            }
                        }
                    }
                }
                if let Some(b) = b {
                    let gb = &mut grads.data[*b];
                    for r in 0..rows {
                        axpy(gb, &gy[r * cols..(r + 1) * cols], 1.0);
                    }
                }
                if xn.needs_grad {
                    let gx = grad_buf(g, *x, rows * din);
                    for r in 0..rows {
                        let gr = &gy[r * cols..(r + 1) * cols];
                        for i in 0..din {
                            gx[r * din + i] += dot(gr, &wv[i * cols..(i + 1) * cols]);
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for p in [*a, *b] {
                    if self.ng(p) {
                        axpy(grad_buf(g, p, gy.len()), gy, 1.0);
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.nodes[p].value.len();
                    if self.ng(p) {
                        axpy(grad_buf(g, p, len), &gy[off..off + len], 1.0);
                    }
                    off += len;
                }
            }
            Op::ConcatCols(parts) => {
                let mut coff = 0;
                for &p in parts {
                    let pc = self.nodes[p].cols;
                    if self.ng(p) {
                        let gp = grad_buf(g, p, rows * pc);
                        for r in 0..rows {
                            axpy(&mut gp[r * pc..(r + 1) * pc], &gy[r * cols + coff..r * cols + coff + pc], 1.0);
                        }
                    }
                    coff += pc;
                }
            }
            Op::SliceRows { x, start } => {
                let len = self.nodes[*x].value.len();
                let gx = grad_buf(g, *x, len);
                axpy(&mut gx[start * cols..start * cols + gy.len()], gy, 1.0);
            }
            Op::Norm { x, g: gp, b: bp, per_row, xhat, inv_std } => {
                let gamma = self.params.get(*gp);
                {
                    let gg = &mut grads.data[*gp];
                    for r in 0..rows {
                        for c in 0..cols {
                            gg[c] += gy[r * cols + c] * xhat[r * cols + c];
                        }
                    }
                }
                {
                    let gb = &mut grads.data[*bp];
                    for r in 0..rows {
                        axpy(gb, &gy[r * cols..(r + 1) * cols], 1.0);
                    }
                }
                if self.ng(*x) {
                    let (groups, len) = if *per_row { (rows, cols) } else { (cols, rows) };
                    let idx = |gi: usize, j: usize| if *per_row { gi * cols + j } else { j * cols + gi };
                    let feat = |gi: usize, j: usize| if *per_row { j } else { gi };
                    let gx = grad_buf(g, *x, rows * cols);
                    let n = len as f64;
                    for gi in 0..groups {
                        let mut s1 = 0.0;
                        let mut s2 = 0.0;
                        for j in 0..len {
                            let k = idx(gi, j);
                            let dxh = gy[k] * gamma[feat(gi, j)];
                            s1 += dxh;
                            s2 += dxh * xhat[k];
                        }
                        for j in 0..len {
                            let k = idx(gi, j);
                            let dxh = gy[k] * gamma[feat(gi, j)];
                            gx[k] += inv_std[gi] / n * (n * dxh - s1 - xhat[k] * s2);
                        }
                    }
                }
            }
            Op::Gelu(x) => {
                let xv = &self.nodes[*x].value;
                let gx = grad_buf(g, *x, gy.len());
                for i in 0..gy.len() {
                    let z = xv[i];
                    let t = (GELU_C * (z + GELU_A * z * z * z)).tanh();
                    let d = 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * z * z);
                    gx[i] += gy[i] * d;
                }
            }
            Op::Tanh(x) => {
                let yv = &node.value;
                let gx = grad_buf(g, *x, gy.len());
                for i in 0..gy.len() {
                    gx[i] += gy[i] * (1.0 - yv[i] * yv[i]);
                }
            }
            Op::Scale(x, s) => axpy(grad_buf(g, *x, gy.len()), gy, *s),
            Op::Attention { q, k, v, heads, probs, bias } => {
                let (nq, d) = (rows, cols);
                let nk = self.nodes[*k].rows;
                let dh = d / heads;
                let scale = 1.0 / (dh as f64).sqrt();
                let (qv, kv, vv) = (&self.nodes[*q].value, &self.nodes[*k].value, &self.nodes[*v].value);
                let mut gq = vec![0.0; nq * d];
                let mut gk = vec![0.0; nk * d];
                let mut gv = vec![0.0; nk * d];
                let mut dp = vec![0.0; nk];
                for h in 0..*heads {
                    let off = h * dh;
                    for i in 0..nq {
                        let p = &probs[(h * nq + i) * nk..(h * nq + i + 1) * nk];
                        let go = &gy[i * d + off..i * d + off + dh];
                        let mut s = 0.0;
                        for j in 0..nk {
                            let vj = &vv[j * d + off..j * d + off + dh];
                            dp[j] = dot(go, vj);
                            s += p[j] * dp[j];
                            axpy(&mut gv[j * d + off..j * d + off + dh], go, p[j]);
                        }
                        for j in 0..nk {
                            let dl = p[j] * (dp[j] - s);
                            if dl == 0.0 {
                                continue;
                            }
                            if let Some(sb) = bias {
                                if sb.spatial[i] && sb.spatial[j] {
                                    grads.data[sb.w][h] += dl * sb.dist[i * nk + j];
                                    grads.data[sb.b][h] += dl;
                                }
                            }
                            let c = dl * scale;
                            axpy(&mut gq[i * d + off..i * d + off + dh], &kv[j * d + off..j * d + off + dh], c);
                            axpy(&mut gk[j * d + off..j * d + off + dh], &qv[i * d + off..i * d + off + dh], c);
                        }
                    }
                }
                for (n, gn) in [(*q, gq), (*k, gk), (*v, gv)] {
                    if self.ng(n) {
                        let len = gn.len();
                        axpy(grad_buf(g, n, len), &gn, 1.0);
                    }
                }
            }
            Op::MatMulT(a, b) => {
                let (r, dd) = self.shape(*a);
                let s = self.nodes[*b].rows;
                let (av, bv) = (&self.nodes[*a].value, &self.nodes[*b].value);
                if self.ng(*a) {
                    let ga = grad_buf(g, *a, r * dd);
                    for i in 0..r {
                        for j in 0..s {
                            axpy(&mut ga[i * dd..(i + 1) * dd], &bv[j * dd..(j + 1) * dd], gy[i * s + j]);
                        }
                    }
                }
                if self.ng(*b) {
                    let gb = grad_buf(g, *b, s * dd);
                    for i in 0..r {
                        for j in 0..s {
                            axpy(&mut gb[j * dd..(j + 1) * dd], &av[i * dd..(i + 1) * dd], gy[i * s + j]);
                        }
                    }
                }
            }
            Op::Kl { logits, target, probs } => {
                let gl = grad_buf(g, *logits, probs.len());
                for i in 0..probs.len() {
                    gl[i] += gy[0] * (probs[i] - target[i]);
                }
            }
            Op::Mse { x, target } => {
                let d = self.scalar(*x) - target;
                grad_buf(g, *x, 1)[0] += gy[0] * 2.0 * d;
            }
            Op::WeightedSum(terms) => {
                for &(n, w) in terms {
                    if self.ng(n) {
                        grad_buf(g, n, 1)[0] += gy[0] * w;
                    }
                }
            }
        }
    }
}

fn grad_buf(g: &mut [Vec<f64>], id: NodeId, len: usize) -> &mut Vec<f64> {
    if g[id].is_empty() {
        g[id] = vec![0.0; len];
    }
    &mut g[id]
}

#[inline]
fn axpy(y: &mut [f64], x: &[f64], a: f64) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
