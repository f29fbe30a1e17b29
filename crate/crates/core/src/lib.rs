//! Set-supervised temporal action segmentation.
//!
//! Training videos carry only the set of actions they contain. An HMM with
//! Poisson lengths sits on top of a two-layer frame scorer; the scorer is
//! trained on pseudo-labels from an anchor-constrained Viterbi pass, and
//! test videos are segmented by aligning Monte-Carlo sampled action orders.

pub mod acv;
pub mod cli;
pub mod data;
pub mod domain;
pub mod error;
pub mod eval;
pub mod hmm;
pub mod infer;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod scorer;
pub mod train;

pub use domain::{
    expand_segmentation, validate_segmentation, ActionId, ActionSet, FrameFeatures, FrameLabeling, Segmentation,
    Vocabulary,
};
pub use error::{Error, Result};
pub use model::Model;
