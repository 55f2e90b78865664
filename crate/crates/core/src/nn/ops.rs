//! Standalone forms of the network operations, on plain tensors.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use super::graph::{AttentionShape, Graph};
use super::kernels;
use super::layers::{self, bind_block, BlockParams, Linear};
use super::LOG_FLOOR;
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::InvalidArgument("softmax of an empty vector".into()));
    }
    let mut out = logits.to_vec();
    kernels::softmax_in_place(&mut out);
    Ok(out)
}

pub fn layer_norm(x: &[f64], gamma: &[f64], beta: &[f64], eps: f64) -> Result<Vec<f64>> {
    if x.len() != gamma.len() || x.len() != beta.len() {
        return Err(shape_err("layer_norm", "x, gamma and beta lengths differ"));
    }
    if x.is_empty() {
        return Err(Error::InvalidArgument("layer_norm of an empty vector".into()));
    }
    let mut normed = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    kernels::layer_norm_row(x, gamma, beta, eps, &mut normed, &mut out);
    Ok(out)
}

/// Weights of a two-layer perceptron; matrices are `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp2Weights {
    pub first: Linear<Tensor>,
    pub second: Linear<Tensor>,
}

pub fn mlp2(x: &[f64], w: &Mlp2Weights) -> Result<Vec<f64>> {
    if w.first.weight.rows() != x.len() || w.second.weight.rows() != w.first.weight.cols() {
        return Err(shape_err("mlp2", "layer dimensions do not chain"));
    }
    let mut g = Graph::new();
    let xv = g.leaf(Tensor::new(vec![1, x.len()], x.to_vec())?)?;
    let first = w.first.try_map(&mut |t: &Tensor| g.leaf(t.clone()))?;
    let second = w.second.try_map(&mut |t: &Tensor| g.leaf(t.clone()))?;
    let y = layers::mlp(&mut g, xv, &first, &second, None)?;
    Ok(g.value(y).data().to_vec())
}

/// Inverted dropout; identity when not training.
pub fn dropout(x: &Tensor, rate: f64, rng: &mut dyn RngCore, training: bool) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(alloc::format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let f = layers::dropout_factors(rate, x.len(), rng)?;
    let mut out = x.clone();
    for (v, f) in out.data_mut().iter_mut().zip(f) {
        *v *= f;
    }
    Ok(out)
}

fn check_tokens(tokens: &Tensor, mask: &[bool], params: &BlockParams<Tensor>) -> Result<()> {
    if mask.len() != tokens.rows() {
        return Err(shape_err("masked_mha", "mask length differs from sequence length"));
    }
    if params.width() != tokens.cols() {
        return Err(shape_err("masked_mha", "token width differs from parameter width"));
    }
    Ok(())
}

/// Multi-head self-attention sub-layer (projections and output projection)
/// over one sequence of `rows × width` tokens.
pub fn masked_mha(tokens: &Tensor, mask: &[bool], params: &BlockParams<Tensor>, heads: usize) -> Result<Tensor> {
    check_tokens(tokens, mask, params)?;
    let mut g = Graph::new();
    let x = g.leaf(tokens.clone())?;
    let p = bind_block(&mut g, params)?;
    let shape = AttentionShape::self_attention(1, mask.len(), heads);
    let y = layers::attention_sublayer(&mut g, x, x, shape, mask.to_vec(), mask.to_vec(), &p)?;
    Ok(g.value(y).clone())
}

/// Full post-norm transformer block over one sequence, inference mode.
pub fn transformer_block(tokens: &Tensor, mask: &[bool], params: &BlockParams<Tensor>, heads: usize) -> Result<Tensor> {
    check_tokens(tokens, mask, params)?;
    let mut g = Graph::new();
    let x = g.leaf(tokens.clone())?;
    let p = bind_block(&mut g, params)?;
    let y = layers::self_block(&mut g, x, 1, heads, mask.to_vec(), &p, None)?;
    Ok(g.value(y).clone())
}

/// Mean negative log-likelihood of the true class over masked-in rows.
pub fn cross_entropy(probs: &Tensor, labels: &[usize], label_mask: &[bool]) -> Result<f64> {
    if labels.len() != probs.rows() || label_mask.len() != probs.rows() {
        return Err(shape_err("cross_entropy", "label count differs from row count"));
    }
    for r in 0..probs.rows() {
        let s: f64 = probs.row(r).iter().sum();
        if libm::fabs(s - 1.0) > 1e-6 {
            return Err(Error::InvalidArgument(alloc::format!("row {r} sums to {s}, not 1")));
        }
    }
    let targets = labels
        .iter()
        .zip(label_mask)
        .map(|(&l, &m)| m.then_some(l))
        .collect();
    let mut g = Graph::new();
    let p = g.leaf(probs.clone())?;
    let loss = g.cross_entropy(p, targets, LOG_FLOOR)?;
    Ok(g.value(loss).data()[0])
}
