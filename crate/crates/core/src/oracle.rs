//! Exhaustive references for the dynamic programs. Slow by design, and only
//! usable on instances small enough to enumerate.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;

use crate::acv::{
    build_graph, compute_saliency, constrained_viterbi, select_anchors, AnchorGraph, ScoredSegmentation,
    ViterbiOptions, DEFAULT_ALPHA,
};
use crate::domain::{ActionId, ActionSet, Segmentation};
use crate::error::{Error, Result};
use crate::hmm::{log_poisson_length, FrameLogLikelihoods, HmmParams};
use crate::rng;
use crate::scorer::FrameScores;

/// Most cut placements `brute_force_anchor_best` will enumerate.
pub const ANCHOR_PATH_CAP: u128 = 10_000_000;
pub const ALL_COLOR_MAX_FRAMES: usize = 20;
pub const ALL_COLOR_MAX_CLASSES: usize = 3;
pub const ALL_COLOR_MAX_SEGMENTS: usize = 5;

/// Scores agreeing within this are treated as equal by `oracle_check`.
pub const SCORE_TOLERANCE: f64 = 1e-9;

/// HMM log-score of a segmentation: transitions between consecutive
/// segments, Poisson lengths and per-frame likelihoods. Summed frame by
/// frame, independently of the prefix sums the solvers use.
pub fn score_segmentation(seg: &Segmentation, loglik: &FrameLogLikelihoods, hmm: &HmmParams) -> Result<f64> {
    if seg.total_frames() != loglik.frames() {
        return Err(Error::Dimension(format!(
            "segmentation covers {} frames, likelihoods {}",
            seg.total_frames(),
            loglik.frames()
        )));
    }
    let mut score = 0.0;
    let mut prev: Option<ActionId> = None;
    for (c, start, end) in seg.segments() {
        let row = loglik
            .row_of(c)
            .ok_or_else(|| Error::Dimension(format!("no likelihoods for class {c}")))?;
        score += (start..end).map(|t| loglik.get(row, t)).sum::<f64>();
        score += log_poisson_length(end - start, hmm.lambda(c))?;
        if let Some(p) = prev {
            score += hmm.log_transition(p, c);
        }
        prev = Some(c);
    }
    Ok(score)
}

/// Whether `(score, bounds)` beats the incumbent under the solvers' rule:
/// higher score, then the earliest last cut, then the earliest cut before it.
fn better(score: f64, bounds: &[usize], best: &Option<(f64, Vec<usize>)>) -> bool {
    match best {
        None => true,
        Some((b, bb)) => score > *b || (score == *b && bounds.iter().rev().lt(bb.iter().rev())),
    }
}

/// Best path of an anchor graph by enumerating every legal cut placement.
pub fn brute_force_anchor_best(
    graph: &AnchorGraph,
    loglik: &FrameLogLikelihoods,
    hmm: &HmmParams,
) -> Result<ScoredSegmentation> {
    let count = graph.path_count();
    if count > ANCHOR_PATH_CAP {
        return Err(Error::CapExceeded(format!("{count} anchor paths")));
    }
    let actions: Vec<ActionId> = graph.anchors().iter().map(|a| a.action).collect();
    let ranges = graph.cuts();
    let mut bounds: Vec<usize> = ranges.iter().map(|r| *r.start()).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let seg = Segmentation::from_bounds(actions.clone(), &bounds, graph.frames())?;
        let score = score_segmentation(&seg, loglik, hmm)?;
        if better(score, &bounds, &best) {
            best = Some((score, bounds.clone()));
        }
        // Odometer over the cut ranges.
        let mut i = 0;
        loop {
            if i == bounds.len() {
                let (score, bounds) = best.expect("at least one path");
                let segmentation = Segmentation::from_bounds(actions, &bounds, graph.frames())?;
                return Ok(ScoredSegmentation { segmentation, score });
            }
            if bounds[i] < *ranges[i].end() {
                bounds[i] += 1;
                break;
            }
            bounds[i] = *ranges[i].start();
            i += 1;
        }
    }
}

/// True optimum over all segmentations with at most `max_segments` segments
/// in which every action of `set` appears.
pub fn brute_force_all_color(
    set: &ActionSet,
    loglik: &FrameLogLikelihoods,
    hmm: &HmmParams,
    max_segments: usize,
) -> Result<ScoredSegmentation> {
    let frames = loglik.frames();
    if frames > ALL_COLOR_MAX_FRAMES || set.len() > ALL_COLOR_MAX_CLASSES || max_segments > ALL_COLOR_MAX_SEGMENTS {
        return Err(Error::CapExceeded(format!(
            "all-color enumeration limited to T <= {ALL_COLOR_MAX_FRAMES}, |C| <= {ALL_COLOR_MAX_CLASSES}, \
             {ALL_COLOR_MAX_SEGMENTS} segments; got T={frames}, |C|={}, {max_segments} segments",
            set.len()
        )));
    }
    let labels = set.labels();
    let m = labels.len();
    let mut best: Option<(f64, Segmentation)> = None;
    for n in m..=max_segments.min(frames) {
        let mut code = vec![0usize; n];
        loop {
            let actions: Vec<ActionId> = code.iter().map(|&i| labels[i]).collect();
            if labels.iter().all(|c| actions.contains(c)) {
                for_each_composition(frames, n, &mut |lengths| {
                    let seg = Segmentation::new(actions.clone(), lengths.to_vec())?;
                    let score = score_segmentation(&seg, loglik, hmm)?;
                    if best.as_ref().is_none_or(|(b, _)| score > *b) {
                        best = Some((score, seg));
                    }
                    Ok(())
                })?;
            }
            let mut i = 0;
            while i < n && code[i] + 1 == m {
                code[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
            code[i] += 1;
        }
    }
    let (score, segmentation) =
        best.ok_or_else(|| Error::InvalidInput(format!("{m} actions cannot fit in {max_segments} segments")))?;
    Ok(ScoredSegmentation { segmentation, score })
}

fn for_each_composition(
    total: usize,
    parts: usize,
    f: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    fn rec(rest: usize, parts: usize, acc: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> Result<()>) -> Result<()> {
        if parts == 1 {
            acc.push(rest);
            let r = f(acc);
            acc.pop();
            return r;
        }
        for l in 1..=rest - (parts - 1) {
            acc.push(l);
            rec(rest - l, parts - 1, acc, f)?;
            acc.pop();
        }
        Ok(())
    }
    if parts == 0 || parts > total {
        return Ok(());
    }
    rec(total, parts, &mut Vec::with_capacity(parts), f)
}

/// A random training video in miniature, pushed through the saliency and
/// anchor stages so the graph is the one ACV would build.
#[derive(Debug, Clone)]
pub struct Instance {
    pub set: ActionSet,
    pub loglik: FrameLogLikelihoods,
    pub hmm: HmmParams,
    pub graph: AnchorGraph,
}

impl Instance {
    pub fn frames(&self) -> usize {
        self.loglik.frames()
    }
}

/// Random instance with `T <= tmax` and `|C| <= cmax`.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, tmax: usize, cmax: usize) -> Result<Instance> {
    if cmax == 0 || tmax < cmax {
        return Err(Error::InvalidInput(format!("need 1 <= cmax <= tmax, got cmax={cmax}, tmax={tmax}")));
    }
    let m = rng.random_range(1..=cmax);
    let vocab = m + rng.random_range(0..=2);
    let frames = rng.random_range(m.max(2)..=tmax);
    let set = ActionSet::new(sample(rng, vocab, m).into_iter().map(ActionId))?;

    let mut transitions = Array2::from_shape_fn((vocab, vocab), |_| rng.random_range(0.05..1.0));
    for i in 0..vocab {
        transitions[[i, i]] = 0.0;
        let total: f64 = transitions.row(i).sum();
        if total > 0.0 {
            transitions.row_mut(i).mapv_inplace(|v| v / total);
        }
    }
    let mean = frames as f64 / m as f64;
    let lambdas = (0..vocab).map(|_| rng.random_range(1.0..=1.5 * mean)).collect();
    let priors = (0..vocab).map(|_| rng.random_range(0.1..=1.0)).collect();
    let hmm = HmmParams::new(transitions, lambdas, priors)?;

    let logits = Array2::from_shape_fn((vocab, frames), |_| rng.random_range(-4.0..4.0));
    let scores = FrameScores::from_logits(logits);
    let loglik = FrameLogLikelihoods::from_posteriors(scores.softmax.view(), set.labels(), &hmm.priors)?;
    let tau = rng.random_range(0..=3);
    let saliency = compute_saliency(&scores, &set, tau);
    let anchors = select_anchors(&saliency, &hmm.lambdas, DEFAULT_ALPHA, frames)?;
    let graph = build_graph(&anchors, frames)?;
    Ok(Instance {
        set,
        loglik,
        hmm,
        graph,
    })
}

/// Outcome of comparing the constrained Viterbi with enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub trials: usize,
    pub exact: usize,
    pub max_gap: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.exact == self.trials
    }
}

/// Runs `trials` random instances through both solvers. A trial is exact when
/// labels and lengths agree and the scores differ by at most 1e-9.
pub fn oracle_check(tmax: usize, cmax: usize, trials: usize, seed: u64) -> Result<OracleReport> {
    let mut report = OracleReport {
        trials,
        exact: 0,
        max_gap: 0.0,
    };
    for i in 0..trials {
        let mut r = rng::fork(seed, "oracle", i as u64);
        let inst = random_instance(&mut r, tmax, cmax)?;
        let dp = constrained_viterbi(&inst.graph, &inst.loglik, &inst.hmm, ViterbiOptions::default())?.best;
        let bf = brute_force_anchor_best(&inst.graph, &inst.loglik, &inst.hmm)?;
        let gap = (dp.score - bf.score).abs();
        report.max_gap = report.max_gap.max(gap);
        if dp.segmentation == bf.segmentation && gap <= SCORE_TOLERANCE {
            report.exact += 1;
        }
    }
    Ok(report)
}
