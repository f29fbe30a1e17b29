//! Test-time inference. Candidate action orders are sampled from action sets,
//! each is aligned to the video by a segmental DP, and the highest-scoring
//! alignment wins.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::acv::ScoredSegmentation;
use crate::domain::{ActionId, ActionSet, FrameFeatures, Segmentation};
use crate::error::{Error, Result};
use crate::hmm::{FrameLogLikelihoods, HmmParams, LengthTable};
use crate::model::Model;

/// Default number of sampled candidates per video.
pub const DEFAULT_K: usize = 1000;

/// Total draws `sample_sequences` may spend before giving up.
pub const SAMPLING_CAP: usize = 1_000_000;

/// An action order sampled from a set: covers the set, and its expected
/// length first exceeds `T` at the last element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CandidateSequence {
    actions: Vec<ActionId>,
    set: ActionSet,
}

impl CandidateSequence {
    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn set(&self) -> &ActionSet {
        &self.set
    }

    /// Checks every invariant a sampled candidate must satisfy.
    pub fn is_valid(&self, lambdas: &[f64], frames: usize) -> bool {
        let Some(&last) = self.actions.last() else { return false };
        let total: f64 = self.actions.iter().map(|c| lambdas[c.0]).sum();
        let covers = self.set.labels().iter().all(|c| self.actions.contains(c));
        let from_set = self.actions.iter().all(|&c| self.set.contains(c));
        let no_repeats = self.set.len() == 1 || self.actions.windows(2).all(|w| w[0] != w[1]);
        covers
            && from_set
            && no_repeats
            && total > frames as f64
            && total - lambdas[last.0] <= frames as f64
    }

    /// The order with immediate repeats collapsed. Only singleton sets
    /// produce repeats; they describe one long segment.
    pub fn merged(&self) -> Vec<ActionId> {
        let mut out: Vec<ActionId> = Vec::with_capacity(self.actions.len());
        for &c in &self.actions {
            if out.last() != Some(&c) {
                out.push(c);
            }
        }
        out
    }
}

/// Whether sequential sampling can ever cover `set` before the expected
/// length passes `frames`: every class but the longest must fit.
pub fn is_feasible(set: &ActionSet, lambdas: &[f64], frames: usize) -> bool {
    let ls = set.labels().iter().map(|c| lambdas[c.0]);
    let total: f64 = ls.clone().sum();
    let max = ls.fold(f64::NEG_INFINITY, f64::max);
    total - max <= frames as f64
}

fn check_lambdas(set: &ActionSet, lambdas: &[f64]) -> Result<()> {
    for c in set.labels() {
        match lambdas.get(c.0) {
            Some(&l) if l > 0.0 && l.is_finite() => {}
            Some(&l) => return Err(Error::InvalidInput(format!("expected length {l} for class {c}"))),
            None => return Err(Error::Dimension(format!("no expected length for class {c}"))),
        }
    }
    Ok(())
}

/// Draws `k` valid candidates from `set`: uniform next action (never the
/// previous one unless the set is a singleton), stopping once the expected
/// length exceeds `frames`. Draws that miss an action are discarded.
pub fn sample_sequences<R: Rng + ?Sized>(
    set: &ActionSet,
    lambdas: &[f64],
    frames: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<CandidateSequence>> {
    if k == 0 {
        return Err(Error::InvalidInput("K must be >= 1".into()));
    }
    check_lambdas(set, lambdas)?;
    let labels = set.labels();
    let limit = frames as f64;
    let mut out = Vec::with_capacity(k);
    let mut attempts = 0usize;
    while out.len() < k {
        if attempts == SAMPLING_CAP {
            return Err(Error::SamplingExhausted(attempts));
        }
        attempts += 1;
        let mut actions: Vec<ActionId> = Vec::new();
        let mut total = 0.0;
        while total <= limit {
            let c = match actions.last() {
                Some(&prev) if labels.len() > 1 => {
                    let i = rng.random_range(0..labels.len() - 1);
                    let c = labels[i];
                    if c == prev {
                        labels[labels.len() - 1]
                    } else {
                        c
                    }
                }
                _ => labels[rng.random_range(0..labels.len())],
            };
            actions.push(c);
            total += lambdas[c.0];
        }
        if labels.iter().all(|c| actions.contains(c)) {
            out.push(CandidateSequence {
                actions,
                set: set.clone(),
            });
        }
    }
    Ok(out)
}

/// Candidate orders for one set. When no sampled order can cover the set
/// within the video's length, random permutations of the set stand in.
fn candidate_orders<R: Rng + ?Sized>(
    set: &ActionSet,
    lambdas: &[f64],
    frames: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Vec<ActionId>>> {
    if is_feasible(set, lambdas, frames) {
        Ok(sample_sequences(set, lambdas, frames, k, rng)?
            .iter()
            .map(CandidateSequence::merged)
            .collect())
    } else {
        check_lambdas(set, lambdas)?;
        Ok((0..k)
            .map(|_| {
                let mut order = set.labels().to_vec();
                order.shuffle(rng);
                order
            })
            .collect())
    }
}

/// Exact segmental DP for a fixed action order. Returns the lengths that
/// maximize transitions + Poisson lengths + frame likelihoods; ties go to the
/// earliest cut, last cut first. The first action's prior is constant across
/// classes and left out.
pub fn align_sequence(actions: &[ActionId], loglik: &FrameLogLikelihoods, hmm: &HmmParams) -> Result<ScoredSegmentation> {
    let n_seg = actions.len();
    let frames = loglik.frames();
    if n_seg == 0 {
        return Err(Error::InvalidInput("empty action sequence".into()));
    }
    if frames < n_seg {
        return Err(Error::InvalidInput(format!("{n_seg} segments cannot fit in {frames} frames")));
    }
    let rows = actions
        .iter()
        .map(|&c| {
            loglik
                .row_of(c)
                .ok_or_else(|| Error::Dimension(format!("no likelihoods for class {c}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(c) = actions.iter().find(|c| c.0 >= hmm.n_classes()) {
        return Err(Error::Dimension(format!("class {c} outside the HMM")));
    }
    let max_len = frames - n_seg + 1;
    let lengths = actions
        .iter()
        .map(|&c| LengthTable::new(hmm.lambda(c), max_len))
        .collect::<Result<Vec<_>>>()?;
    let segment = |n: usize, start: usize, end: usize| loglik.segment_sum(rows[n], start, end) + lengths[n].get(end - start);

    // value[n][t]: best score with segment n ending (exclusive) at frame t.
    // Segment n can end anywhere in n+1 ..= frames - (n_seg - 1 - n).
    let mut value = vec![vec![f64::NEG_INFINITY; frames + 1]; n_seg];
    let mut back = vec![vec![0usize; frames + 1]; n_seg];
    for t in 1..=max_len {
        value[0][t] = segment(0, 0, t);
    }
    for n in 1..n_seg {
        let transition = hmm.log_transition(actions[n - 1], actions[n]);
        let last_end = frames - (n_seg - 1 - n);
        for t in n + 1..=last_end {
            let mut best: Option<(usize, f64)> = None;
            for s in n..t {
                let cand = value[n - 1][s] + transition + segment(n, s, t);
                match best {
                    Some((_, b)) if !(cand > b) => {}
                    _ => best = Some((s, cand)),
                }
            }
            let (s, v) = best.expect("non-empty range");
            value[n][t] = v;
            back[n][t] = s;
        }
    }
    let score = value[n_seg - 1][frames];
    let mut bounds = Vec::with_capacity(n_seg - 1);
    let mut t = frames;
    for n in (1..n_seg).rev() {
        t = back[n][t];
        bounds.push(t);
    }
    bounds.reverse();
    let segmentation = Segmentation::from_bounds(actions.to_vec(), &bounds, frames)?;
    Ok(ScoredSegmentation { segmentation, score })
}

/// Aligns every distinct order and returns the best, ties going to the
/// earliest drawn. Duplicates are aligned once; their results would be
/// identical.
pub fn best_alignment(
    orders: &[Vec<ActionId>],
    loglik: &FrameLogLikelihoods,
    hmm: &HmmParams,
) -> Result<ScoredSegmentation> {
    let frames = loglik.frames();
    let mut seen: HashMap<&[ActionId], ()> = HashMap::new();
    let unique: Vec<&Vec<ActionId>> = orders
        .iter()
        .filter(|o| o.len() <= frames && seen.insert(o.as_slice(), ()).is_none())
        .collect();
    if unique.is_empty() {
        return Err(Error::InvalidInput(format!("no candidate fits in {frames} frames")));
    }
    let aligned = unique
        .par_iter()
        .map(|o| align_sequence(o, loglik, hmm))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<ScoredSegmentation> = None;
    for a in aligned {
        if best.as_ref().is_none_or(|b| a.score > b.score) {
            best = Some(a);
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// How `segment_video` picks the action set behind each candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SetDraw {
    /// A fresh training set for every candidate, so the K candidates search
    /// across many sets.
    #[default]
    PerCandidate,
    /// One training set per video, all K candidates drawn from it.
    PerVideo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferOptions {
    pub k: usize,
    pub set_draw: SetDraw,
}

impl Default for InferOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            set_draw: SetDraw::default(),
        }
    }
}

fn union_classes<'a>(sets: impl IntoIterator<Item = &'a ActionSet>) -> Vec<ActionId> {
    let mut classes: Vec<ActionId> = sets.into_iter().flat_map(|s| s.labels().iter().copied()).collect();
    classes.sort();
    classes.dedup();
    classes
}

/// Segments a video knowing only the action sets seen in training.
pub fn segment_video<R: Rng + ?Sized>(
    model: &Model,
    x: &FrameFeatures,
    training_sets: &[ActionSet],
    options: InferOptions,
    rng: &mut R,
) -> Result<ScoredSegmentation> {
    if training_sets.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if options.k == 0 {
        return Err(Error::InvalidInput("K must be >= 1".into()));
    }
    let frames = x.frames();
    let lambdas = &model.hmm.lambdas;
    for set in training_sets {
        check_lambdas(set, lambdas)?;
    }
    // Sets whose actions cannot all fit are only used when nothing else can.
    let feasible: Vec<&ActionSet> = training_sets.iter().filter(|s| is_feasible(s, lambdas, frames)).collect();
    let pool: Vec<&ActionSet> = if feasible.is_empty() {
        training_sets.iter().collect()
    } else {
        feasible
    };
    let orders = match options.set_draw {
        SetDraw::PerVideo => {
            let set = pool[rng.random_range(0..pool.len())];
            candidate_orders(set, lambdas, frames, options.k, rng)?
        }
        SetDraw::PerCandidate => {
            let mut orders = Vec::with_capacity(options.k);
            for _ in 0..options.k {
                let set = pool[rng.random_range(0..pool.len())];
                orders.extend(candidate_orders(set, lambdas, frames, 1, rng)?);
            }
            orders
        }
    };
    let classes = union_classes(pool.iter().copied());
    let scores = model.scores(x)?;
    let loglik = model.log_likelihoods(&scores, &classes)?;
    best_alignment(&orders, &loglik, &model.hmm)
}

/// Aligns a video to its known action set.
pub fn align_video<R: Rng + ?Sized>(
    model: &Model,
    x: &FrameFeatures,
    set: &ActionSet,
    k: usize,
    rng: &mut R,
) -> Result<ScoredSegmentation> {
    let frames = x.frames();
    let orders = candidate_orders(set, &model.hmm.lambdas, frames, k, rng)?;
    let scores = model.scores(x)?;
    let loglik = model.log_likelihoods(&scores, set.labels())?;
    best_alignment(&orders, &loglik, &model.hmm)
}
