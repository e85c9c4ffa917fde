//! Attentive-probe aggregation and the MLP prediction head.
//!
//! Forward pass for one clip `X` (P×D):
//!
//! ```text
//! A = softmax_rows(Q Xᵀ / √D)          M×P
//! F = A (X W)                          M×d, flattened row-major to M·d
//! h1 = drop(gelu(LN1(F W1 + b1)))      hidden
//! h2 = drop(gelu(LN2(h1 W2 + b2)))     hidden
//! p = sigmoid(h2 w3 + b3)
//! ```
//!
//! Without the probe, the clip is mean-pooled over patches and fed to a single
//! affine layer. Gradients are hand-derived reverse-mode passes through the same
//! graph.

mod activation;
mod checkpoint;
mod forward;
mod params;

pub use activation::{gelu, gelu_grad, normal_cdf, sigmoid};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
};
pub use forward::{
    attentive_pool, head_backward, head_forward, softmax_rows, Dropout, DropoutMasks, ForwardPass,
};
pub use params::{Affine, HeadConfig, HeadMode, HeadParams, HiddenLayers, LayerNorm, ProbeParams};
