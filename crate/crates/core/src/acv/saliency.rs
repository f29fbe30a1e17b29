use ndarray::Array2;

use crate::domain::{ActionId, ActionSet};
use crate::scorer::{sigmoid, FrameScores};
#[cfg(test)]
use crate::scorer::log_sigmoid;

/// Default half-width of the saliency window.
pub const DEFAULT_TAU: usize = 15;

/// `M x T` saliency of the actions of one ground-truth set, rows in the set's
/// sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMatrix {
    pub classes: Vec<ActionId>,
    pub values: Array2<f64>,
}

impl SaliencyMatrix {
    pub fn frames(&self) -> usize {
        self.values.ncols()
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }
}

/// Per-frame margins `log f_c(x_t) - min_{c' in C} log f_{c'}(x_t)` and the
/// row of the minimizing class (lowest row on ties).
fn margins(scores: &FrameScores, set: &ActionSet) -> (Array2<f64>, Vec<usize>) {
    let frames = scores.frames();
    let labels = set.labels();
    let mut m = Array2::<f64>::zeros((labels.len(), frames));
    let mut argmin = vec![0usize; frames];
    for t in 0..frames {
        let mut best = f64::INFINITY;
        for (r, c) in labels.iter().enumerate() {
            let v = scores.log_sigmoid(c.0, t);
            m[[r, t]] = v;
            if v < best {
                best = v;
                argmin[t] = r;
            }
        }
        for r in 0..labels.len() {
            m[[r, t]] -= best;
        }
    }
    (m, argmin)
}

/// Sum over the window `t - tau ..= t + tau`, truncated at the video borders.
fn window_sum(values: &Array2<f64>, tau: usize) -> Array2<f64> {
    let (rows, frames) = values.dim();
    let mut out = Array2::<f64>::zeros((rows, frames));
    let mut prefix = vec![0.0; frames + 1];
    for r in 0..rows {
        for t in 0..frames {
            prefix[t + 1] = prefix[t] + values[[r, t]];
        }
        for t in 0..frames {
            let lo = t.saturating_sub(tau);
            let hi = (t + tau + 1).min(frames);
            // Clamp tiny negative round-off from the prefix difference.
            out[[r, t]] = (prefix[hi] - prefix[lo]).max(0.0);
        }
    }
    out
}

/// Windowed saliency `S[c, t]` over the actions of `set`.
pub fn compute_saliency(scores: &FrameScores, set: &ActionSet, tau: usize) -> SaliencyMatrix {
    let (m, _) = margins(scores, set);
    SaliencyMatrix {
        classes: set.labels().to_vec(),
        values: window_sum(&m, tau),
    }
}

/// Pulls `dL/dS` back to `dL/dlogits` (`|vocab| x T`). At frames where several
/// classes tie for the minimum the subgradient goes to the lowest class id.
pub fn saliency_backward(scores: &FrameScores, set: &ActionSet, tau: usize, dsal: &Array2<f64>) -> Array2<f64> {
    let (_, argmin) = margins(scores, set);
    let frames = scores.frames();
    // The window is symmetric, so the adjoint of the window sum is the same sum
    // (without the non-negativity clamp, which is inactive up to round-off).
    let (rows, _) = dsal.dim();
    let mut g = Array2::<f64>::zeros((rows, frames));
    let mut prefix = vec![0.0; frames + 1];
    for r in 0..rows {
        for t in 0..frames {
            prefix[t + 1] = prefix[t] + dsal[[r, t]];
        }
        for k in 0..frames {
            let lo = k.saturating_sub(tau);
            let hi = (k + tau + 1).min(frames);
            g[[r, k]] = prefix[hi] - prefix[lo];
        }
    }
    let labels = set.labels();
    let mut dlogits = Array2::<f64>::zeros(scores.logits.raw_dim());
    for k in 0..frames {
        let column_total: f64 = (0..rows).map(|r| g[[r, k]]).sum();
        for (r, c) in labels.iter().enumerate() {
            let mut dlog = g[[r, k]];
            if r == argmin[k] {
                dlog -= column_total;
            }
            // d log sigmoid(z) / dz = 1 - sigmoid(z)
            dlogits[[c.0, k]] = dlog * (1.0 - sigmoid(scores.logits[[c.0, k]]));
        }
    }
    dlogits
}

/// Reference double loop, kept for tests.
#[cfg(test)]
pub(crate) fn naive_saliency(scores: &FrameScores, set: &ActionSet, tau: usize) -> Array2<f64> {
    let frames = scores.frames() as isize;
    let labels = set.labels();
    let mut s = Array2::<f64>::zeros((labels.len(), frames as usize));
    for (r, c) in labels.iter().enumerate() {
        for t in 0..frames {
            let mut acc = 0.0;
            for u in -(tau as isize)..=(tau as isize) {
                let k = t + u;
                if k < 0 || k >= frames {
                    continue;
                }
                let k = k as usize;
                let min = labels
                    .iter()
                    .map(|c2| log_sigmoid(scores.logits[[c2.0, k]]))
                    .fold(f64::INFINITY, f64::min);
                acc += log_sigmoid(scores.logits[[c.0, k]]) - min;
            }
            s[[r, t as usize]] = acc;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::diversity_loss;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logit(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    #[test]
    fn singleton_set_has_zero_saliency() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let logits = Array2::from_shape_fn((3, 12), |_| rng.random_range(-2.0..2.0));
        let s = compute_saliency(&FrameScores::from_logits(logits), &ActionSet::new([ActionId(1)]).unwrap(), 3);
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_scores_closed_form() {
        let mut logits = Array2::zeros((2, 9));
        logits.row_mut(0).fill(logit(0.8));
        logits.row_mut(1).fill(logit(0.2));
        let set = ActionSet::new([ActionId(0), ActionId(1)]).unwrap();
        let s = compute_saliency(&FrameScores::from_logits(logits), &set, 1);
        assert_abs_diff_eq!(s.values[[0, 4]], 3.0 * 4f64.ln(), epsilon = 1e-12);
        assert_eq!(s.values[[1, 4]], 0.0);
        // Border window is truncated to two frames.
        assert_abs_diff_eq!(s.values[[0, 0]], 2.0 * 4f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let classes = rng.random_range(2..6);
            let frames = rng.random_range(1..40);
            let tau = rng.random_range(0..6);
            let logits = Array2::from_shape_fn((classes, frames), |_| rng.random_range(-4.0..4.0));
            let scores = FrameScores::from_logits(logits);
            let members: Vec<ActionId> = (0..classes).filter(|_| rng.random_bool(0.6)).map(ActionId).collect();
            let Ok(set) = ActionSet::new(members) else { continue };
            let fast = compute_saliency(&scores, &set, tau);
            let slow = naive_saliency(&scores, &set, tau);
            for (a, b) in fast.values.iter().zip(&slow) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            assert!(fast.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let frames = rng.random_range(3..12);
            let logits = Array2::from_shape_fn((4, frames), |_| rng.random_range(-3.0..3.0));
            let set = ActionSet::new([ActionId(0), ActionId(2), ActionId(3)]).unwrap();
            let tau = 2;
            let f = |l: &Array2<f64>| diversity_loss(&compute_saliency(&FrameScores::from_logits(l.clone()), &set, tau).values);
            let scores = FrameScores::from_logits(logits.clone());
            let dsal = f(&logits).grad;
            let analytic = saliency_backward(&scores, &set, tau, &dsal);
            let h = 1e-6;
            for c in 0..4 {
                for t in 0..frames {
                    let mut up = logits.clone();
                    up[[c, t]] += h;
                    let mut down = logits.clone();
                    down[[c, t]] -= h;
                    let numeric = (f(&up).value - f(&down).value) / (2.0 * h);
                    assert!(
                        (numeric - analytic[[c, t]]).abs() < 1e-6 * (1.0 + numeric.abs()),
                        "class {c} frame {t}: {numeric} vs {}",
                        analytic[[c, t]]
                    );
                }
            }
        }
    }
}
