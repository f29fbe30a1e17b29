//! Frame scorer: a two-layer MLP with a shared hidden layer. Each class gets a
//! sigmoid score `f_c(x)` and the same logits feed a per-frame softmax
//! `p(c | x)`. Gradients are derived by hand.

mod loss;
mod mlp;
mod pretrain;

pub use loss::{cross_entropy_loss, diversity_loss, total_loss, LossGrad, DEFAULT_BETA};
pub use mlp::{
    backward, forward, forward_pass, log_sigmoid, sgd_step, sigmoid, ForwardPass, FrameScores, LrSchedule, MlpGrads,
    MlpParams, DEFAULT_HIDDEN,
};
pub use pretrain::{mil_loss, mil_pretrain, predict_presence};

/// Clamp applied to probabilities before taking logs.
pub const PROB_EPS: f64 = 1e-12;
