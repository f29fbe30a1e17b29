use crate::acv::AnchorGraph;
use crate::domain::{ActionId, Segmentation};
use crate::error::{Error, Result};
use crate::hmm::{FrameLogLikelihoods, HmmParams, LengthTable};

/// Slack factor of the length-based pruning rules.
pub const PRUNE_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ViterbiOptions {
    /// Discard partial paths whose accumulated expected length exceeds 1.5x
    /// the elapsed frames, and full paths whose total is not below 1.5x `T`.
    pub prune: bool,
}

/// A segmentation with its HMM log-score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSegmentation {
    pub segmentation: Segmentation,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiResult {
    pub best: ScoredSegmentation,
    /// Pruning removed every path, so the unpruned optimum was returned.
    pub prune_fallback: bool,
}

/// Exact maximizer of the HMM log-score over the paths of `graph`:
/// transitions, Poisson lengths and per-frame likelihoods. Ties go to the
/// earliest cut, last cut first.
pub fn constrained_viterbi(
    graph: &AnchorGraph,
    loglik: &FrameLogLikelihoods,
    hmm: &HmmParams,
    options: ViterbiOptions,
) -> Result<ViterbiResult> {
    let frames = graph.frames();
    if loglik.frames() != frames {
        return Err(Error::Dimension(format!(
            "likelihoods cover {} frames, graph has {frames}",
            loglik.frames()
        )));
    }
    let actions: Vec<ActionId> = graph.anchors().iter().map(|a| a.action).collect();
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
    let lengths = actions
        .iter()
        .map(|&c| LengthTable::new(hmm.lambda(c), frames))
        .collect::<Result<Vec<_>>>()?;

    if options.prune {
        if let Some(best) = run(graph, loglik, hmm, &actions, &rows, &lengths, true) {
            return Ok(ViterbiResult {
                best,
                prune_fallback: false,
            });
        }
    }
    let best = run(graph, loglik, hmm, &actions, &rows, &lengths, false)
        .expect("unpruned anchor graph always has a path");
    Ok(ViterbiResult {
        best,
        prune_fallback: options.prune,
    })
}

fn run(
    graph: &AnchorGraph,
    loglik: &FrameLogLikelihoods,
    hmm: &HmmParams,
    actions: &[ActionId],
    rows: &[usize],
    lengths: &[LengthTable],
    prune: bool,
) -> Option<ScoredSegmentation> {
    let frames = graph.frames();
    let m = actions.len();
    // Boundary sets: ends[n] holds the legal end frames (exclusive) of segment n.
    let mut ends: Vec<Vec<usize>> = graph.cuts().iter().map(|r| r.clone().collect()).collect();
    ends.push(vec![frames]);

    let mut expected = 0.0;
    let mut cumulative = Vec::with_capacity(m);
    for &c in actions {
        expected += hmm.lambda(c);
        cumulative.push(expected);
    }
    if prune && !(expected < PRUNE_FACTOR * frames as f64) {
        return None;
    }
    let alive = |n: usize, end: usize| !prune || cumulative[n] <= PRUNE_FACTOR * end as f64;

    let segment = |n: usize, start: usize, end: usize| {
        loglik.segment_sum(rows[n], start, end) + lengths[n].get(end - start)
    };

    // `None` marks a pruned state; a surviving state may still score -inf.
    let mut values: Vec<Option<f64>> = ends[0]
        .iter()
        .map(|&e| alive(0, e).then(|| segment(0, 0, e)))
        .collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(m);
    back.push(vec![0; ends[0].len()]);

    for n in 1..m {
        let transition = hmm.log_transition(actions[n - 1], actions[n]);
        let prev_ends = &ends[n - 1];
        let mut next = vec![None; ends[n].len()];
        let mut ptr = vec![0usize; ends[n].len()];
        for (j, &e) in ends[n].iter().enumerate() {
            if !alive(n, e) {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for (i, &s) in prev_ends.iter().enumerate() {
                let Some(v) = values[i] else { continue };
                let cand = v + transition + segment(n, s, e);
                match best {
                    Some((_, b)) if !(cand > b) => {}
                    _ => best = Some((i, cand)),
                }
            }
            if let Some((i, v)) = best {
                next[j] = Some(v);
                ptr[j] = i;
            }
        }
        values = next;
        back.push(ptr);
    }

    let score = values[0]?;
    let mut bounds = Vec::with_capacity(m - 1);
    let mut j = 0usize;
    for n in (1..m).rev() {
        j = back[n][j];
        bounds.push(ends[n - 1][j]);
    }
    bounds.reverse();
    let segmentation = Segmentation::from_bounds(actions.to_vec(), &bounds, frames).ok()?;
    Some(ScoredSegmentation { segmentation, score })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acv::Anchor;
    use crate::hmm::log_poisson_length;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn anchor(c: usize, start: usize, end: usize) -> Anchor {
        Anchor {
            action: ActionId(c),
            center: start,
            start,
            end,
        }
    }

    fn hmm(n: usize, lambdas: Vec<f64>) -> HmmParams {
        let mut t = Array2::from_elem((n, n), 1.0 / (n.max(2) - 1) as f64);
        for i in 0..n {
            t[[i, i]] = 0.0;
        }
        HmmParams::new(t, lambdas, vec![1.0 / n as f64; n]).unwrap()
    }

    #[test]
    fn single_anchor_scores_whole_video() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let table = Array2::from_shape_fn((1, 15), |_| rng.random_range(-2.0..0.0));
        let total: f64 = table.sum();
        let ll = FrameLogLikelihoods::new(vec![ActionId(0)], table).unwrap();
        let g = AnchorGraph::new(vec![anchor(0, 4, 6)], 15).unwrap();
        let h = hmm(1, vec![9.0]);
        let r = constrained_viterbi(&g, &ll, &h, ViterbiOptions::default()).unwrap();
        assert_eq!(r.best.segmentation, Segmentation::new(vec![ActionId(0)], vec![15]).unwrap());
        assert_abs_diff_eq!(r.best.score, total + log_poisson_length(15, 9.0).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn uniform_likelihoods_follow_length_model() {
        // Two segments, flat likelihoods and transitions: the best cut
        // maximizes log p(l1 | 6) + log p(T - l1 | 14) over legal cuts.
        let frames = 30;
        let ll = FrameLogLikelihoods::new(vec![ActionId(0), ActionId(1)], Array2::zeros((2, frames))).unwrap();
        let g = AnchorGraph::new(vec![anchor(0, 0, 1), anchor(1, 25, 26)], frames).unwrap();
        let h = hmm(2, vec![6.0, 14.0]);
        let r = constrained_viterbi(&g, &ll, &h, ViterbiOptions::default()).unwrap();
        let scan = (2..=25)
            .map(|b| {
                let s = log_poisson_length(b, 6.0).unwrap() + log_poisson_length(frames - b, 14.0).unwrap();
                (b, s)
            })
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        assert_eq!(r.best.segmentation.bounds(), vec![scan.0]);
        assert_abs_diff_eq!(r.best.score, scan.1, epsilon = 1e-9);
    }

    #[test]
    fn frame_mismatch_is_error() {
        let ll = FrameLogLikelihoods::new(vec![ActionId(0)], Array2::zeros((1, 5))).unwrap();
        let g = AnchorGraph::new(vec![anchor(0, 0, 1)], 6).unwrap();
        assert!(constrained_viterbi(&g, &ll, &hmm(1, vec![3.0]), ViterbiOptions::default()).is_err());
    }

    #[test]
    fn pruning_falls_back_when_everything_is_cut() {
        // Expected lengths far exceed the video: every path is pruned.
        let ll = FrameLogLikelihoods::new(vec![ActionId(0), ActionId(1)], Array2::zeros((2, 10))).unwrap();
        let g = AnchorGraph::new(vec![anchor(0, 0, 1), anchor(1, 5, 6)], 10).unwrap();
        let h = hmm(2, vec![40.0, 40.0]);
        let pruned = constrained_viterbi(&g, &ll, &h, ViterbiOptions { prune: true }).unwrap();
        let plain = constrained_viterbi(&g, &ll, &h, ViterbiOptions::default()).unwrap();
        assert!(pruned.prune_fallback);
        assert_eq!(pruned.best, plain.best);
    }

    #[test]
    fn pruning_keeps_optimum_when_inactive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let table = Array2::from_shape_fn((2, 40), |_| rng.random_range(-1.0..0.0));
        let ll = FrameLogLikelihoods::new(vec![ActionId(0), ActionId(1)], table).unwrap();
        let g = AnchorGraph::new(vec![anchor(0, 5, 8), anchor(1, 30, 33)], 40).unwrap();
        let h = hmm(2, vec![4.0, 4.0]);
        let pruned = constrained_viterbi(&g, &ll, &h, ViterbiOptions { prune: true }).unwrap();
        let plain = constrained_viterbi(&g, &ll, &h, ViterbiOptions::default()).unwrap();
        assert!(!pruned.prune_fallback);
        assert_eq!(pruned.best, plain.best);
    }
}
