//! Dense neural-network kernel: tensors on a reverse-mode tape, transformer
//! building blocks, initialization, and the AdamW optimizer.

pub mod graph;
pub mod init;
pub mod kernels;
pub mod layers;
pub mod ops;
pub mod optim;
pub mod params;

pub use graph::{AttentionShape, Gradients, Graph, Var};
pub use init::glorot_init;
pub use layers::{BlockParams, Dropout, Linear, NormParams};
pub use ops::{
    cross_entropy, dropout, layer_norm, masked_mha, mlp2, softmax, transformer_block, Mlp2Weights,
};
pub use optim::{adamw_step, cosine_lr, AdamConfig, OptimizerState};
pub use params::{ParamId, ParamStore};

/// Additive bias applied to masked attention logits.
pub const MASK_BIAS: f64 = -1e9;
/// Epsilon inside layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-5;
/// Probability floor inside the cross-entropy logarithm.
pub const LOG_FLOOR: f64 = 1e-12;
