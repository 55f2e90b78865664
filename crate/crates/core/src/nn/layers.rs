//! Layer parameter bundles and the graph builders that apply them.
//!
//! Bundles are generic over the handle type: `ParamId` inside a model,
//! `Var` once bound to a tape, `Tensor` for standalone use.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use super::graph::{AttentionShape, Graph, Var};
use super::init::glorot_init;
use super::params::{ParamId, ParamStore};
use super::LAYER_NORM_EPS;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Affine map `x·W + b` with `W` stored as `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T = ParamId> {
    pub weight: T,
    pub bias: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormParams<T = ParamId> {
    pub gamma: T,
    pub beta: T,
}

/// Post-norm transformer block: attention, add, norm, MLP, add, norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<T = ParamId> {
    pub query: Linear<T>,
    pub key: Linear<T>,
    pub value: Linear<T>,
    pub output: Linear<T>,
    pub norm1: NormParams<T>,
    pub mlp_in: Linear<T>,
    pub mlp_out: Linear<T>,
    pub norm2: NormParams<T>,
}

impl<T> Linear<T> {
    pub fn try_map<U, E>(&self, f: &mut impl FnMut(&T) -> Result<U, E>) -> Result<Linear<U>, E> {
        Ok(Linear {
            weight: f(&self.weight)?,
            bias: f(&self.bias)?,
        })
    }
}

impl<T> NormParams<T> {
    pub fn try_map<U, E>(&self, f: &mut impl FnMut(&T) -> Result<U, E>) -> Result<NormParams<U>, E> {
        Ok(NormParams {
            gamma: f(&self.gamma)?,
            beta: f(&self.beta)?,
        })
    }
}

impl<T> BlockParams<T> {
    pub fn try_map<U, E>(&self, f: &mut impl FnMut(&T) -> Result<U, E>) -> Result<BlockParams<U>, E> {
        Ok(BlockParams {
            query: self.query.try_map(f)?,
            key: self.key.try_map(f)?,
            value: self.value.try_map(f)?,
            output: self.output.try_map(f)?,
            norm1: self.norm1.try_map(f)?,
            mlp_in: self.mlp_in.try_map(f)?,
            mlp_out: self.mlp_out.try_map(f)?,
            norm2: self.norm2.try_map(f)?,
        })
    }
}

impl Linear<Tensor> {
    pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            weight: glorot_init(fan_in, fan_out, rng)?,
            bias: Tensor::zeros(&[fan_out]),
        })
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[fan_in, fan_out]),
            bias: Tensor::zeros(&[fan_out]),
        }
    }
}

impl NormParams<Tensor> {
    pub fn identity(width: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[width], 1.0),
            beta: Tensor::zeros(&[width]),
        }
    }
}

impl BlockParams<Tensor> {
    /// Glorot-initialized weights, zero biases, unit norms.
    pub fn glorot<R: Rng + ?Sized>(width: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            query: Linear::glorot(width, width, rng)?,
            key: Linear::glorot(width, width, rng)?,
            value: Linear::glorot(width, width, rng)?,
            output: Linear::glorot(width, width, rng)?,
            norm1: NormParams::identity(width),
            mlp_in: Linear::glorot(width, hidden, rng)?,
            mlp_out: Linear::glorot(hidden, width, rng)?,
            norm2: NormParams::identity(width),
        })
    }

    /// Registers every tensor in `store` under `prefix`.
    pub fn register(self, store: &mut ParamStore, prefix: &str) -> BlockParams<ParamId> {
        let mut lin = |name: &str, l: Linear<Tensor>| Linear {
            weight: store.add(format!("{prefix}.{name}.weight"), l.weight),
            bias: store.add(format!("{prefix}.{name}.bias"), l.bias),
        };
        let query = lin("query", self.query);
        let key = lin("key", self.key);
        let value = lin("value", self.value);
        let output = lin("output", self.output);
        let mlp_in = lin("mlp_in", self.mlp_in);
        let mlp_out = lin("mlp_out", self.mlp_out);
        let mut norm = |name: &str, n: NormParams<Tensor>| NormParams {
            gamma: store.add(format!("{prefix}.{name}.gamma"), n.gamma),
            beta: store.add(format!("{prefix}.{name}.beta"), n.beta),
        };
        let norm1 = norm("norm1", self.norm1);
        let norm2 = norm("norm2", self.norm2);
        BlockParams {
            query,
            key,
            value,
            output,
            norm1,
            mlp_in,
            mlp_out,
            norm2,
        }
    }

    pub fn width(&self) -> usize {
        self.query.weight.rows()
    }

    pub fn hidden(&self) -> usize {
        self.mlp_in.weight.cols()
    }
}

impl Linear<ParamId> {
    pub fn register(l: Linear<Tensor>, store: &mut ParamStore, prefix: &str) -> Self {
        Linear {
            weight: store.add(format!("{prefix}.weight"), l.weight),
            bias: store.add(format!("{prefix}.bias"), l.bias),
        }
    }
}

/// Training-time dropout source.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut dyn RngCore,
}

impl Dropout<'_> {
    /// Inverted-dropout factors for `n` elements.
    pub fn factors(&mut self, n: usize) -> Result<Vec<f64>> {
        dropout_factors(self.rate, n, self.rng)
    }
}

pub(crate) fn dropout_factors(rate: f64, n: usize, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
    }
    let keep = 1.0 / (1.0 - rate);
    Ok((0..n)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

pub fn linear(g: &mut Graph, x: Var, p: &Linear<Var>) -> Result<Var> {
    let y = g.matmul(x, p.weight)?;
    g.add_row(y, p.bias)
}

/// `W2·relu(W1·x + b1) + b2`, with dropout on the hidden activation.
pub fn mlp(
    g: &mut Graph,
    x: Var,
    first: &Linear<Var>,
    second: &Linear<Var>,
    dropout: Option<&mut Dropout<'_>>,
) -> Result<Var> {
    let h = linear(g, x, first)?;
    let mut h = g.relu(h)?;
    if let Some(d) = dropout {
        if d.rate > 0.0 {
            let n = g.value(h).len();
            let f = d.factors(n)?;
            h = g.scale(h, f)?;
        }
    }
    linear(g, h, second)
}

/// Attention sub-layer without residual or norm: `Wo·MHA(Wq·x, Wk·c, Wv·c)`.
pub fn attention_sublayer(
    g: &mut Graph,
    queries: Var,
    context: Var,
    shape: AttentionShape,
    key_mask: Vec<bool>,
    query_mask: Vec<bool>,
    p: &BlockParams<Var>,
) -> Result<Var> {
    let q = linear(g, queries, &p.query)?;
    let k = linear(g, context, &p.key)?;
    let v = linear(g, context, &p.value)?;
    let a = g.attention(q, k, v, shape, key_mask, query_mask)?;
    linear(g, a, &p.output)
}

/// Transformer block where `queries` attend over `context`.
///
/// With `queries == context` this is ordinary self-attention. Passing a
/// subset of rows as `queries` yields exactly those rows of the full block
/// output, since everything after attention acts row by row.
#[allow(clippy::too_many_arguments)]
pub fn block(
    g: &mut Graph,
    queries: Var,
    context: Var,
    shape: AttentionShape,
    key_mask: Vec<bool>,
    query_mask: Vec<bool>,
    p: &BlockParams<Var>,
    dropout: Option<&mut Dropout<'_>>,
) -> Result<Var> {
    let attn = attention_sublayer(g, queries, context, shape, key_mask, query_mask, p)?;
    let h = g.add(queries, attn)?;
    let h = g.layer_norm(h, p.norm1.gamma, p.norm1.beta, LAYER_NORM_EPS)?;
    let m = mlp(g, h, &p.mlp_in, &p.mlp_out, dropout)?;
    let out = g.add(h, m)?;
    g.layer_norm(out, p.norm2.gamma, p.norm2.beta, LAYER_NORM_EPS)
}

/// Self-attention transformer block over `batch` sequences of length `len`.
pub fn self_block(
    g: &mut Graph,
    x: Var,
    batch: usize,
    heads: usize,
    mask: Vec<bool>,
    p: &BlockParams<Var>,
    dropout: Option<&mut Dropout<'_>>,
) -> Result<Var> {
    let len = mask.len() / batch.max(1);
    let shape = AttentionShape::self_attention(batch, len, heads);
    block(g, x, x, shape, mask.clone(), mask, p, dropout)
}

pub fn bind_block(g: &mut Graph, p: &BlockParams<Tensor>) -> Result<BlockParams<Var>> {
    p.try_map(&mut |t: &Tensor| g.leaf(t.clone()))
}

pub fn bind_params(g: &mut Graph, store: &ParamStore, p: &BlockParams<ParamId>) -> Result<BlockParams<Var>> {
    p.try_map(&mut |id: &ParamId| store.bind(g, *id))
}

pub fn bind_linear(g: &mut Graph, store: &ParamStore, p: &Linear<ParamId>) -> Result<Linear<Var>> {
    p.try_map(&mut |id: &ParamId| store.bind(g, *id))
}
