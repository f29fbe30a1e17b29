use std::ops::RangeInclusive;

use crate::acv::{Anchor, AnchorSet};
use crate::error::{Error, Result};

/// Segmentation graph constrained by anchors.
///
/// Segment `n` carries the action of anchor `n` and must contain that anchor
/// entirely, so every path has exactly one segment per anchor. A cut between
/// segments `n` and `n + 1` is identified by the first frame of segment
/// `n + 1`, which ranges over `end_n + 1 ..= start_{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorGraph {
    anchors: Vec<Anchor>,
    frames: usize,
    cuts: Vec<RangeInclusive<usize>>,
}

impl AnchorGraph {
    pub fn new(mut anchors: Vec<Anchor>, frames: usize) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::InvalidInput("graph needs at least one anchor".into()));
        }
        anchors.sort_by_key(|a| a.center);
        for a in &anchors {
            if a.start > a.center || a.center > a.end || a.end >= frames {
                return Err(Error::InvalidInput(format!(
                    "anchor {:?} invalid for a video of {frames} frames",
                    a
                )));
            }
        }
        let mut cuts = Vec::with_capacity(anchors.len() - 1);
        for w in anchors.windows(2) {
            if w[0].end >= w[1].start {
                return Err(Error::InvalidInput(format!(
                    "anchors {:?} and {:?} overlap or are out of order",
                    w[0], w[1]
                )));
            }
            cuts.push(w[0].end + 1..=w[1].start);
        }
        Ok(Self { anchors, frames, cuts })
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Legal start frames of segment `n + 1`, for `n = 0..M-1`.
    pub fn cuts(&self) -> &[RangeInclusive<usize>] {
        &self.cuts
    }

    pub fn n_segments(&self) -> usize {
        self.anchors.len()
    }

    /// Number of distinct paths, saturating at `u128::MAX`.
    pub fn path_count(&self) -> u128 {
        self.cuts
            .iter()
            .fold(1u128, |acc, r| acc.saturating_mul((r.end() + 1 - r.start()) as u128))
    }
}

pub fn build_graph(anchors: &AnchorSet, frames: usize) -> Result<AnchorGraph> {
    AnchorGraph::new(anchors.anchors.clone(), frames)
}
