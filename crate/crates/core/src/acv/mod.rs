//! Anchor-constrained Viterbi: pseudo-ground truth for a training video from
//! its action set alone.
//!
//! 1. Windowed saliency of every action of the set, from the sigmoid scores.
//! 2. One anchor interval per action around its most salient frame.
//! 3. A segmentation graph whose paths contain every anchor in exactly one
//!    segment, labeled with the anchor's action.
//! 4. Segmental Viterbi over that graph.
//!
//! Every path of the graph covers the whole set, so the output always contains
//! all ground-truth actions.

mod anchors;
mod graph;
mod saliency;
mod viterbi;

pub use anchors::{select_anchors, Anchor, AnchorSet, DEFAULT_ALPHA};
pub use graph::{build_graph, AnchorGraph};
pub use saliency::{compute_saliency, saliency_backward, SaliencyMatrix, DEFAULT_TAU};
pub use viterbi::{constrained_viterbi, ScoredSegmentation, ViterbiOptions, ViterbiResult, PRUNE_FACTOR};
