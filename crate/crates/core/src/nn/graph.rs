//! Reverse-mode tape over dense matrices.
//!
//! Every node stores its forward value; [`Graph::backward`] walks the tape
//! in reverse and accumulates gradients into each operand. Tensors of any
//! rank are viewed as matrices (`rows() × cols()`).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{self, dot};
use super::params::ParamId;
use super::MASK_BIAS;
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Geometry of a batched attention call.
///
/// Queries are `batch * query_len` rows, keys and values are
/// `batch * key_len` rows; sequence `b` owns a contiguous block of each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionShape {
    pub batch: usize,
    pub query_len: usize,
    pub key_len: usize,
    pub heads: usize,
}

impl AttentionShape {
    pub fn self_attention(batch: usize, len: usize, heads: usize) -> Self {
        Self {
            batch,
            query_len: len,
            key_len: len,
            heads,
        }
    }
}

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Scale {
        x: Var,
        factors: Vec<f64>,
    },
    MaskRows {
        x: Var,
        keep: Vec<bool>,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normed: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Attention {
        q: Var,
        k: Var,
        v: Var,
        shape: AttentionShape,
        key_mask: Vec<bool>,
        query_mask: Vec<bool>,
        probs: Vec<f64>,
    },
    Softmax(Var),
    CrossEntropy {
        probs: Var,
        targets: Vec<Option<usize>>,
        floor: f64,
        count: usize,
    },
    ConcatRows(Vec<Var>),
    ConcatCols(Var, Var),
    Gather {
        x: Var,
        rows: Vec<Option<usize>>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// A recorded forward computation.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node of a graph.
pub struct Gradients {
    nodes: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
    params: Vec<(ParamId, usize)>,
}

impl Gradients {
    /// Gradient for a node, zero-filled when the scalar does not depend on it.
    pub fn wrt(&self, v: Var) -> Tensor {
        let shape = &self.shapes[v.0];
        match &self.nodes[v.0] {
            Some(g) => Tensor::new(shape.clone(), g.clone()).expect("gradient shape"),
            None => Tensor::zeros(shape),
        }
    }

    /// Gradient for a parameter, summed over every leaf bound to it.
    pub fn param(&self, id: ParamId) -> Option<Tensor> {
        let mut acc: Option<Tensor> = None;
        for &(pid, node) in &self.params {
            if pid != id {
                continue;
            }
            let g = self.wrt(Var(node));
            acc = Some(match acc {
                None => g,
                Some(mut a) => {
                    for (x, y) in a.data_mut().iter_mut().zip(g.data()) {
                        *x += y;
                    }
                    a
                }
            });
        }
        acc
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.params.iter().map(|(id, _)| *id)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Constant input; gradients are still recorded and readable via [`Gradients::wrt`].
    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, "leaf")
    }

    pub fn param(&mut self, id: ParamId, value: Tensor) -> Result<Var> {
        self.push(value, Op::Param(id), "param")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (n, k) = (av.rows(), av.cols());
        let (k2, m) = (bv.rows(), bv.cols());
        if k != k2 {
            return Err(shape_err("matmul", format!("{}x{} * {}x{}", n, k, k2, m)));
        }
        let out = kernels::matmul(av.data(), bv.data(), n, k, m);
        self.push(Tensor::new(vec![n, m], out)?, Op::MatMul(a, b), "matmul")
    }

    /// Adds a row vector to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        let c = xv.cols();
        if bv.len() != c {
            return Err(shape_err("add_row", format!("width {} vs bias {}", c, bv.len())));
        }
        let mut out = xv.clone();
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(x, bias), "add_row")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("add", format!("{:?} vs {:?}", av.shape(), bv.shape())));
        }
        let mut out = av.clone();
        for (o, y) in out.data_mut().iter_mut().zip(bv.data()) {
            *o += y;
        }
        self.push(out, Op::Add(a, b), "add")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.push(out, Op::Relu(x), "relu")
    }

    /// Elementwise multiplication by constant factors (dropout masks).
    pub fn scale(&mut self, x: Var, factors: Vec<f64>) -> Result<Var> {
        let xv = self.value(x);
        if factors.len() != xv.len() {
            return Err(shape_err("scale", "factor count differs from element count"));
        }
        let mut out = xv.clone();
        for (o, f) in out.data_mut().iter_mut().zip(&factors) {
            *o *= f;
        }
        self.push(out, Op::Scale { x, factors }, "scale")
    }

    /// Zeroes every row whose `keep` flag is false.
    pub fn mask_rows(&mut self, x: Var, keep: Vec<bool>) -> Result<Var> {
        let xv = self.value(x);
        if keep.len() != xv.rows() {
            return Err(shape_err("mask_rows", "mask length differs from row count"));
        }
        let mut out = xv.clone();
        for (r, &k) in keep.iter().enumerate() {
            if !k {
                out.row_mut(r).fill(0.0);
            }
        }
        self.push(out, Op::MaskRows { x, keep }, "mask_rows")
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (xv, gv, bv) = (self.value(x), self.value(gamma), self.value(beta));
        let c = xv.cols();
        if gv.len() != c || bv.len() != c {
            return Err(shape_err("layer_norm", "gamma/beta width differs from input"));
        }
        let rows = xv.rows();
        let mut out = Tensor::zeros(xv.shape());
        let mut normed = vec![0.0; xv.len()];
        let mut inv_std = vec![0.0; rows];
        for r in 0..rows {
            inv_std[r] = kernels::layer_norm_row(
                xv.row(r),
                gv.data(),
                bv.data(),
                eps,
                &mut normed[r * c..(r + 1) * c],
                out.row_mut(r),
            );
        }
        let op = Op::LayerNorm {
            x,
            gamma,
            beta,
            normed,
            inv_std,
        };
        self.push(out, op, "layer_norm")
    }

    /// Batched multi-head scaled dot-product attention.
    ///
    /// Masked keys get [`MASK_BIAS`] as logit, so their weight is exactly
    /// zero. Rows whose `query_mask` flag is false produce zero output.
    pub fn attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        shape: AttentionShape,
        key_mask: Vec<bool>,
        query_mask: Vec<bool>,
    ) -> Result<Var> {
        let AttentionShape {
            batch,
            query_len,
            key_len,
            heads,
        } = shape;
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let width = qv.cols();
        if heads == 0 || width % heads != 0 {
            return Err(shape_err("attention", format!("width {} not divisible by {} heads", width, heads)));
        }
        if kv.cols() != width || vv.cols() != width {
            return Err(shape_err("attention", "query/key/value widths differ"));
        }
        if qv.rows() != batch * query_len || kv.rows() != batch * key_len || vv.rows() != batch * key_len {
            return Err(shape_err("attention", "row counts disagree with attention shape"));
        }
        if key_mask.len() != batch * key_len || query_mask.len() != batch * query_len {
            return Err(shape_err("attention", "mask length disagrees with attention shape"));
        }
        for b in 0..batch {
            if !key_mask[b * key_len..(b + 1) * key_len].iter().any(|&m| m) {
                return Err(Error::EmptyAttention { sequence: b });
            }
        }
        let dh = width / heads;
        let scale = 1.0 / libm::sqrt(dh as f64);
        let mut probs = vec![0.0; batch * heads * query_len * key_len];
        let mut out = Tensor::zeros(&[batch * query_len, width]);
        let mut logits = vec![0.0; key_len];
        for b in 0..batch {
            for h in 0..heads {
                let cols = h * dh..(h + 1) * dh;
                for i in 0..query_len {
                    let qi = b * query_len + i;
                    if !query_mask[qi] {
                        continue;
                    }
                    let q_row = &qv.row(qi)[cols.clone()];
                    for (j, logit) in logits.iter_mut().enumerate() {
                        let kj = b * key_len + j;
                        *logit = if key_mask[kj] {
                            dot(q_row, &kv.row(kj)[cols.clone()]) * scale
                        } else {
                            MASK_BIAS
                        };
                    }
                    kernels::softmax_in_place(&mut logits);
                    let base = ((b * heads + h) * query_len + i) * key_len;
                    probs[base..base + key_len].copy_from_slice(&logits);
                    let o = &mut out.row_mut(qi)[cols.clone()];
                    for (j, &p) in logits.iter().enumerate() {
                        if p == 0.0 {
                            continue;
                        }
                        for (ov, vj) in o.iter_mut().zip(&vv.row(b * key_len + j)[cols.clone()]) {
                            *ov += p * vj;
                        }
                    }
                }
            }
        }
        let op = Op::Attention {
            q,
            k,
            v,
            shape,
            key_mask,
            query_mask,
            probs,
        };
        self.push(out, op, "attention")
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let mut out = self.value(x).clone();
        if out.cols() == 0 {
            return Err(shape_err("softmax", "empty rows"));
        }
        for r in 0..out.rows() {
            kernels::softmax_in_place(out.row_mut(r));
        }
        self.push(out, Op::Softmax(x), "softmax")
    }

    /// Mean negative log-probability of the target class over rows with a target.
    pub fn cross_entropy(&mut self, probs: Var, targets: Vec<Option<usize>>, floor: f64) -> Result<Var> {
        let pv = self.value(probs);
        if targets.len() != pv.rows() {
            return Err(shape_err("cross_entropy", "target count differs from row count"));
        }
        let c = pv.cols();
        let mut sum = 0.0;
        let mut count = 0usize;
        for (r, t) in targets.iter().enumerate() {
            if let Some(t) = *t {
                if t >= c {
                    return Err(Error::OutOfRange { index: t, len: c });
                }
                sum -= libm::log(pv.row(r)[t].max(floor));
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::NoLabels);
        }
        let loss = Tensor::new(vec![1], vec![sum / count as f64])?;
        let op = Op::CrossEntropy {
            probs,
            targets,
            floor,
            count,
        };
        self.push(loss, op, "cross_entropy")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let width = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.cols() != width {
                return Err(shape_err("concat_rows", "widths differ"));
            }
            rows += pv.rows();
            data.extend_from_slice(pv.data());
        }
        let out = Tensor::new(vec![rows, width], data)?;
        self.push(out, Op::ConcatRows(parts.to_vec()), "concat_rows")
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(shape_err("concat_cols", "row counts differ"));
        }
        let (ca, cb) = (av.cols(), bv.cols());
        let mut data = Vec::with_capacity(av.len() + bv.len());
        for r in 0..av.rows() {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let out = Tensor::new(vec![av.rows(), ca + cb], data)?;
        self.push(out, Op::ConcatCols(a, b), "concat_cols")
    }

    /// Builds a matrix whose row `i` is row `rows[i]` of `x`, or zeros for `None`.
    pub fn gather(&mut self, x: Var, rows: Vec<Option<usize>>) -> Result<Var> {
        let xv = self.value(x);
        let c = xv.cols();
        let mut out = Tensor::zeros(&[rows.len(), c]);
        for (i, r) in rows.iter().enumerate() {
            if let Some(r) = *r {
                if r >= xv.rows() {
                    return Err(Error::OutOfRange { index: r, len: xv.rows() });
                }
                out.row_mut(i).copy_from_slice(xv.row(r));
            }
        }
        self.push(out, Op::Gather { x, rows }, "gather")
    }

    /// Gradients of the scalar node `output` with respect to every node.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if self.value(output).len() != 1 {
            return Err(shape_err("backward", "output is not a scalar"));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        grads[output.0] = Some(vec![1.0]);

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf | Op::Param(_) => {}
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (rows, k, m) = (av.rows(), av.cols(), bv.cols());
                    let ga = kernels::matmul_bt(&g, bv.data(), rows, m, k);
                    let gb = kernels::matmul_at(av.data(), &g, rows, k, m);
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::AddRow(x, bias) => {
                    let c = node.value.cols();
                    let mut gb = vec![0.0; c];
                    for row in g.chunks(c) {
                        for (acc, v) in gb.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    accumulate(&mut grads, *x, &g);
                    accumulate(&mut grads, *bias, &gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Relu(x) => {
                    let gx: Vec<f64> = g
                        .iter()
                        .zip(self.value(*x).data())
                        .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Scale { x, factors } => {
                    let gx: Vec<f64> = g.iter().zip(factors).map(|(g, f)| g * f).collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::MaskRows { x, keep } => {
                    let c = node.value.cols();
                    let mut gx = g.clone();
                    for (r, &k) in keep.iter().enumerate() {
                        if !k {
                            gx[r * c..(r + 1) * c].fill(0.0);
                        }
                    }
                    accumulate(&mut grads, *x, &gx);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    normed,
                    inv_std,
                } => {
                    let c = node.value.cols();
                    let gv = self.value(*gamma).data();
                    let mut gx = vec![0.0; g.len()];
                    let mut gg = vec![0.0; c];
                    let mut gbeta = vec![0.0; c];
                    let mut dxhat = vec![0.0; c];
                    for (r, &istd) in inv_std.iter().enumerate() {
                        let gy = &g[r * c..(r + 1) * c];
                        let xh = &normed[r * c..(r + 1) * c];
                        for i in 0..c {
                            gg[i] += gy[i] * xh[i];
                            gbeta[i] += gy[i];
                            dxhat[i] = gy[i] * gv[i];
                        }
                        let mean_d = dxhat.iter().sum::<f64>() / c as f64;
                        let mean_dx = dot(&dxhat, xh) / c as f64;
                        for i in 0..c {
                            gx[r * c + i] = istd * (dxhat[i] - mean_d - xh[i] * mean_dx);
                        }
                    }
                    accumulate(&mut grads, *x, &gx);
                    accumulate(&mut grads, *gamma, &gg);
                    accumulate(&mut grads, *beta, &gbeta);
                }
                Op::Attention {
                    q,
                    k,
                    v,
                    shape,
                    key_mask,
                    query_mask,
                    probs,
                } => {
                    let (gq, gk, gv) = self.attention_backward(&g, *q, *k, *v, shape, key_mask, query_mask, probs);
                    accumulate(&mut grads, *q, &gq);
                    accumulate(&mut grads, *k, &gk);
                    accumulate(&mut grads, *v, &gv);
                }
                Op::Softmax(x) => {
                    let c = node.value.cols();
                    let mut gx = vec![0.0; g.len()];
                    for (r, p) in node.value.data().chunks(c).enumerate() {
                        let gy = &g[r * c..(r + 1) * c];
                        let s = dot(p, gy);
                        for i in 0..c {
                            gx[r * c + i] = p[i] * (gy[i] - s);
                        }
                    }
                    accumulate(&mut grads, *x, &gx);
                }
                Op::CrossEntropy {
                    probs,
                    targets,
                    floor,
                    count,
                } => {
                    let pv = self.value(*probs);
                    let c = pv.cols();
                    let mut gp = vec![0.0; pv.len()];
                    let w = g[0] / *count as f64;
                    for (r, t) in targets.iter().enumerate() {
                        if let Some(t) = *t {
                            let p = pv.row(r)[t];
                            if p > *floor {
                                gp[r * c + t] = -w / p;
                            }
                        }
                    }
                    accumulate(&mut grads, *probs, &gp);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        accumulate(&mut grads, p, &g[offset..offset + len]);
                        offset += len;
                    }
                }
                Op::ConcatCols(a, b) => {
                    let (ca, cb) = (self.value(*a).cols(), self.value(*b).cols());
                    let mut ga = Vec::with_capacity(self.value(*a).len());
                    let mut gb = Vec::with_capacity(self.value(*b).len());
                    for row in g.chunks(ca + cb) {
                        ga.extend_from_slice(&row[..ca]);
                        gb.extend_from_slice(&row[ca..]);
                    }
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::Gather { x, rows } => {
                    let xv = self.value(*x);
                    let c = xv.cols();
                    let mut gx = vec![0.0; xv.len()];
                    for (i, r) in rows.iter().enumerate() {
                        if let Some(r) = *r {
                            for (acc, v) in gx[r * c..(r + 1) * c].iter_mut().zip(&g[i * c..(i + 1) * c]) {
                                *acc += v;
                            }
                        }
                    }
                    accumulate(&mut grads, *x, &gx);
                }
            }
            if matches!(node.op, Op::Leaf | Op::Param(_)) {
                grads[idx] = Some(g);
            } else if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { op: "backward" });
            }
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(id) => Some((id, i)),
                _ => None,
            })
            .collect();
        // Interior gradients are consumed during the sweep; only leaves keep theirs.
        Ok(Gradients {
            nodes: grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
            params,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn attention_backward(
        &self,
        g: &[f64],
        q: Var,
        k: Var,
        v: Var,
        shape: &AttentionShape,
        key_mask: &[bool],
        query_mask: &[bool],
        probs: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let width = qv.cols();
        let AttentionShape {
            batch,
            query_len,
            key_len,
            heads,
        } = *shape;
        let dh = width / heads;
        let scale = 1.0 / libm::sqrt(dh as f64);
        let mut gq = vec![0.0; qv.len()];
        let mut gk = vec![0.0; kv.len()];
        let mut gv = vec![0.0; vv.len()];
        let mut dp = vec![0.0; key_len];
        for b in 0..batch {
            for h in 0..heads {
                let off = h * dh;
                for i in 0..query_len {
                    let qi = b * query_len + i;
                    if !query_mask[qi] {
                        continue;
                    }
                    let base = ((b * heads + h) * query_len + i) * key_len;
                    let p = &probs[base..base + key_len];
                    let go = &g[qi * width + off..qi * width + off + dh];
                    let mut s = 0.0;
                    for j in 0..key_len {
                        let kj = b * key_len + j;
                        dp[j] = if key_mask[kj] {
                            dot(go, &vv.data()[kj * width + off..kj * width + off + dh])
                        } else {
                            0.0
                        };
                        s += p[j] * dp[j];
                    }
                    let q_row = &qv.data()[qi * width + off..qi * width + off + dh];
                    for j in 0..key_len {
                        let kj = b * key_len + j;
                        if p[j] == 0.0 {
                            continue;
                        }
                        let ds = p[j] * (dp[j] - s) * scale;
                        let k_row = &kv.data()[kj * width + off..kj * width + off + dh];
                        for t in 0..dh {
                            gq[qi * width + off + t] += ds * k_row[t];
                            gk[kj * width + off + t] += ds * q_row[t];
                            gv[kj * width + off + t] += p[j] * go[t];
                        }
                    }
                }
            }
        }
        (gq, gk, gv)
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, x) in acc.iter_mut().zip(g) {
                *a += x;
            }
        }
        slot @ None => *slot = Some(g.to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let w = g.leaf(t(&[1, 1], &[3.0])).unwrap();
        let y = g.matmul(w, w).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.wrt(w).data(), &[6.0]);
    }

    #[test]
    fn unused_input_has_zero_gradient() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[1, 2], &[1.0, 2.0])).unwrap();
        let unused = g.leaf(t(&[1, 2], &[5.0, 5.0])).unwrap();
        let w = g.leaf(t(&[2, 1], &[1.0, 1.0])).unwrap();
        let y = g.matmul(a, w).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.wrt(unused).data(), &[0.0, 0.0]);
        assert_eq!(grads.wrt(a).data(), &[1.0, 1.0]);
    }

    #[test]
    fn all_masked_sequence_is_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[2, 2])).unwrap();
        let err = g
            .attention(x, x, x, AttentionShape::self_attention(1, 2, 1), vec![false, false], vec![true, true])
            .unwrap_err();
        assert_eq!(err, Error::EmptyAttention { sequence: 0 });
    }

    #[test]
    fn non_finite_values_name_the_op() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[1, 1], &[1e200])).unwrap();
        let err = g.matmul(a, a).unwrap_err();
        assert_eq!(err, Error::NonFinite { op: "matmul" });
    }

    #[test]
    fn gather_scatters_gradient_back() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[2, 1], &[1.0, 2.0])).unwrap();
        let y = g.gather(x, vec![Some(1), None, Some(1), Some(0)]).unwrap();
        let ones = g.leaf(t(&[1, 4], &[1.0, 1.0, 1.0, 1.0])).unwrap();
        let s = g.matmul(ones, y).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(x).data(), &[1.0, 2.0]);
    }
}
