//! Shared domain types: label vocabulary, action sets, per-frame features and
//! segmentations.
//!
//! Labels are dense integer ids. Names only appear at I/O boundaries, through
//! [`Vocabulary`]. Frames are indexed from 0 throughout the crate; a segment
//! covering frames `start..end` is half-open.

use std::collections::HashMap;
use std::fmt;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Dense index of an action class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bijection between action names and dense ids `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, ActionId>,
}

impl Vocabulary {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::InvalidInput("vocabulary is empty".into()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::InvalidInput(format!(
                    "action name {name:?} must be non-empty and contain no whitespace"
                )));
            }
            if index.insert(name.clone(), ActionId(i)).is_some() {
                return Err(Error::InvalidInput(format!("duplicate action name {name:?}")));
            }
        }
        Ok(Self { names, index })
    }

    /// Vocabulary with generated names `a0, a1, ...`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| format!("a{i}")))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ActionId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ActionId) -> Option<&str> {
        self.names.get(id.0).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> impl Iterator<Item = ActionId> + '_ {
        (0..self.names.len()).map(ActionId)
    }
}

/// Set-level ground truth of a video: which actions occur, in no particular
/// order. Stored sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionSet {
    labels: Vec<ActionId>,
}

impl ActionSet {
    pub fn new<I: IntoIterator<Item = ActionId>>(labels: I) -> Result<Self> {
        let mut labels: Vec<ActionId> = labels.into_iter().collect();
        labels.sort_unstable();
        let before = labels.len();
        labels.dedup();
        if labels.is_empty() {
            return Err(Error::InvalidInput("action set is empty".into()));
        }
        if labels.len() != before {
            return Err(Error::InvalidInput("action set contains duplicates".into()));
        }
        Ok(Self { labels })
    }

    /// Checks that every label exists in `vocab`.
    pub fn check_vocabulary(&self, vocab: &Vocabulary) -> Result<()> {
        match self.labels.iter().find(|c| c.0 >= vocab.len()) {
            Some(c) => Err(Error::InvalidInput(format!(
                "action id {c} outside vocabulary of {} classes",
                vocab.len()
            ))),
            None => Ok(()),
        }
    }

    pub fn labels(&self) -> &[ActionId] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, c: ActionId) -> bool {
        self.labels.binary_search(&c).is_ok()
    }

    /// Row position of `c` inside this set (sorted order).
    pub fn position(&self, c: ActionId) -> Option<usize> {
        self.labels.binary_search(&c).ok()
    }
}

/// `T x D` matrix of per-frame descriptors for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures {
    values: Array2<f64>,
}

impl FrameFeatures {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (t, d) = values.dim();
        if t == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "feature matrix must be non-empty, got {t}x{d}"
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "feature at frame {}, dim {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { values })
    }

    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn frame(&self, t: usize) -> ArrayView1<'_, f64> {
        self.values.row(t)
    }
}

/// An ordered action sequence with integer lengths.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segmentation {
    actions: Vec<ActionId>,
    lengths: Vec<usize>,
}

impl Segmentation {
    pub fn new(actions: Vec<ActionId>, lengths: Vec<usize>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::InvalidInput("segmentation has no segments".into()));
        }
        if actions.len() != lengths.len() {
            return Err(Error::InvalidInput(format!(
                "{} actions but {} lengths",
                actions.len(),
                lengths.len()
            )));
        }
        if lengths.contains(&0) {
            return Err(Error::InvalidInput("segment of length 0".into()));
        }
        Ok(Self { actions, lengths })
    }

    /// Builds a segmentation from cut positions. `bounds` holds the start of
    /// every segment after the first; segment `n` spans `bounds[n-1]..bounds[n]`.
    pub fn from_bounds(actions: Vec<ActionId>, bounds: &[usize], frames: usize) -> Result<Self> {
        if bounds.len() + 1 != actions.len() {
            return Err(Error::InvalidInput(format!(
                "{} cuts for {} actions",
                bounds.len(),
                actions.len()
            )));
        }
        let mut lengths = Vec::with_capacity(actions.len());
        let mut prev = 0usize;
        for &b in bounds.iter().chain(std::iter::once(&frames)) {
            if b <= prev {
                return Err(Error::InvalidInput(format!("cut {b} not after {prev}")));
            }
            lengths.push(b - prev);
            prev = b;
        }
        Self::new(actions, lengths)
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_frames(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// `(action, start, end)` for every segment, `end` exclusive.
    pub fn segments(&self) -> impl Iterator<Item = (ActionId, usize, usize)> + '_ {
        self.actions
            .iter()
            .zip(&self.lengths)
            .scan(0usize, |start, (&c, &l)| {
                let s = *start;
                *start += l;
                Some((c, s, s + l))
            })
    }

    /// Start frame of every segment after the first.
    pub fn bounds(&self) -> Vec<usize> {
        self.segments().skip(1).map(|(_, s, _)| s).collect()
    }

    pub fn expand(&self) -> FrameLabeling {
        expand_segmentation(self)
    }
}

/// One label per frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrameLabeling {
    labels: Vec<ActionId>,
}

impl FrameLabeling {
    pub fn new(labels: Vec<ActionId>) -> Self {
        Self { labels }
    }

    pub fn labels(&self) -> &[ActionId] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Run-length encoding. Consecutive equal labels merge into one segment.
    pub fn run_lengths(&self) -> Result<Segmentation> {
        let mut actions = Vec::new();
        let mut lengths: Vec<usize> = Vec::new();
        for &c in &self.labels {
            match actions.last() {
                Some(&last) if last == c => *lengths.last_mut().unwrap() += 1,
                _ => {
                    actions.push(c);
                    lengths.push(1);
                }
            }
        }
        Segmentation::new(actions, lengths)
    }
}

/// Frame `t` receives the label of the segment containing `t`.
pub fn expand_segmentation(seg: &Segmentation) -> FrameLabeling {
    let mut labels = Vec::with_capacity(seg.total_frames());
    for (&c, &l) in seg.actions.iter().zip(&seg.lengths) {
        labels.extend(std::iter::repeat_n(c, l));
    }
    FrameLabeling { labels }
}

/// True iff the lengths tile `frames` exactly and every action of `set`
/// occurs at least once.
pub fn validate_segmentation(seg: &Segmentation, frames: usize, set: &ActionSet) -> bool {
    seg.lengths.iter().all(|&l| l >= 1)
        && seg.total_frames() == frames
        && set.labels().iter().all(|c| seg.actions.contains(c))
}
