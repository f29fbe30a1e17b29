use ndarray::Array2;

use crate::domain::FrameLabeling;
use crate::error::{Error, Result};
use crate::scorer::{FrameScores, PROB_EPS};

/// Default weight of the diversity term.
pub const DEFAULT_BETA: f64 = 0.4;

/// Loss value together with its gradient with respect to some input.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Array2<f64>,
}

/// Binary cross-entropy over every class, applied to the softmax posteriors.
/// The gradient is with respect to the logits.
pub fn cross_entropy_loss(scores: &FrameScores, pseudo: &FrameLabeling) -> Result<LossGrad> {
    let (classes, frames) = scores.softmax.dim();
    if pseudo.len() != frames {
        return Err(Error::Dimension(format!(
            "{} pseudo labels for {frames} frames",
            pseudo.len()
        )));
    }
    if let Some(c) = pseudo.labels().iter().find(|c| c.0 >= classes) {
        return Err(Error::Dimension(format!("label {c} outside {classes} classes")));
    }
    let norm = 1.0 / frames as f64;
    let mut value = 0.0;
    let mut grad = Array2::<f64>::zeros((classes, frames));
    let mut dprob = vec![0.0; classes];
    for (t, target) in pseudo.labels().iter().enumerate() {
        for (c, d) in dprob.iter_mut().enumerate() {
            let p = scores.softmax[[c, t]];
            let clamped = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            let active = clamped == p;
            if c == target.0 {
                value -= clamped.ln();
                *d = if active { -norm / clamped } else { 0.0 };
            } else {
                value -= (1.0 - clamped).ln();
                *d = if active { norm / (1.0 - clamped) } else { 0.0 };
            }
        }
        // Softmax Jacobian: dz_j = p_j (g_j - sum_i p_i g_i).
        let inner: f64 = (0..classes).map(|c| scores.softmax[[c, t]] * dprob[c]).sum();
        for c in 0..classes {
            grad[[c, t]] = scores.softmax[[c, t]] * (dprob[c] - inner);
        }
    }
    Ok(LossGrad {
        value: value * norm,
        grad,
    })
}

/// Mean cosine similarity over ordered pairs of distinct rows of a
/// non-negative saliency matrix. The gradient is with respect to the matrix.
pub fn diversity_loss(saliency: &Array2<f64>) -> LossGrad {
    let (rows, cols) = saliency.dim();
    let mut grad = Array2::<f64>::zeros((rows, cols));
    if rows < 2 {
        return LossGrad { value: 0.0, grad };
    }
    let raw_norms: Vec<f64> = saliency.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let norms: Vec<f64> = raw_norms.iter().map(|&n| n.max(PROB_EPS)).collect();
    let pair_weight = 1.0 / (rows * (rows - 1)) as f64;
    let mut value = 0.0;
    for a in 0..rows {
        for b in (a + 1)..rows {
            let ra = saliency.row(a);
            let rb = saliency.row(b);
            let denom = norms[a] * norms[b];
            let cos = ra.dot(&rb) / denom;
            // Each unordered pair appears twice among the ordered pairs.
            value += 2.0 * pair_weight * cos;
            let w = 2.0 * pair_weight;
            for t in 0..cols {
                let mut ga = rb[t] / denom;
                let mut gb = ra[t] / denom;
                if raw_norms[a] > PROB_EPS {
                    ga -= cos * ra[t] / (norms[a] * norms[a]);
                }
                if raw_norms[b] > PROB_EPS {
                    gb -= cos * rb[t] / (norms[b] * norms[b]);
                }
                grad[[a, t]] += w * ga;
                grad[[b, t]] += w * gb;
            }
        }
    }
    LossGrad { value, grad }
}

/// `ce + beta * div`.
pub fn total_loss(ce: f64, div: f64, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidInput(format!("beta {beta} must be >= 0")));
    }
    Ok(ce + beta * div)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ActionId;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(ids: &[usize]) -> FrameLabeling {
        FrameLabeling::new(ids.iter().map(|&c| ActionId(c)).collect())
    }

    #[test]
    fn single_class_loss_vanishes() {
        let scores = FrameScores::from_logits(Array2::from_elem((1, 4), 0.3));
        let loss = cross_entropy_loss(&scores, &labels(&[0, 0, 0, 0])).unwrap();
        assert!(loss.value < 1e-11);
    }

    #[test]
    fn uniform_two_class_loss() {
        let scores = FrameScores::from_logits(Array2::zeros((2, 5)));
        let loss = cross_entropy_loss(&scores, &labels(&[0, 1, 1, 0, 1])).unwrap();
        assert_abs_diff_eq!(loss.value, 2.0 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(loss.value, 1.3863, epsilon = 1e-4);
    }

    #[test]
    fn cross_entropy_length_mismatch() {
        let scores = FrameScores::from_logits(Array2::zeros((2, 3)));
        assert!(cross_entropy_loss(&scores, &labels(&[0, 1])).is_err());
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let classes = rng.random_range(2..5);
            let frames = rng.random_range(1..9);
            let logits = Array2::from_shape_fn((classes, frames), |_| rng.random_range(-3.0..3.0));
            let pseudo = labels(&(0..frames).map(|_| rng.random_range(0..classes)).collect::<Vec<_>>());
            let analytic = cross_entropy_loss(&FrameScores::from_logits(logits.clone()), &pseudo).unwrap().grad;
            let h = 1e-5;
            let mut numeric = Array2::<f64>::zeros(logits.raw_dim());
            for idx in 0..logits.len() {
                let (c, t) = (idx / frames, idx % frames);
                let mut up = logits.clone();
                up[[c, t]] += h;
                let mut down = logits.clone();
                down[[c, t]] -= h;
                let fu = cross_entropy_loss(&FrameScores::from_logits(up), &pseudo).unwrap().value;
                let fd = cross_entropy_loss(&FrameScores::from_logits(down), &pseudo).unwrap().value;
                numeric[[c, t]] = (fu - fd) / (2.0 * h);
            }
            let diff = (&analytic - &numeric).mapv(|v| v * v).sum().sqrt();
            let scale = analytic.mapv(|v| v * v).sum().sqrt().max(numeric.mapv(|v| v * v).sum().sqrt());
            assert!(diff / scale < 1e-4, "relative error {}", diff / scale);
        }
    }

    #[test]
    fn diversity_identical_rows() {
        let s = array![[1.0, 2.0, 0.5], [1.0, 2.0, 0.5]];
        assert_abs_diff_eq!(diversity_loss(&s).value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn diversity_orthogonal_rows() {
        let s = array![[1.0, 0.0, 0.0], [0.0, 3.0, 2.0]];
        assert_abs_diff_eq!(diversity_loss(&s).value, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn diversity_single_row() {
        let l = diversity_loss(&array![[1.0, 4.0]]);
        assert_eq!(l.value, 0.0);
        assert!(l.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn diversity_zero_row_is_finite() {
        let l = diversity_loss(&array![[0.0, 0.0], [1.0, 2.0], [2.0, 1.0]]);
        assert!(l.value.is_finite() && l.grad.iter().all(|g| g.is_finite()));
        assert!((0.0..=1.0).contains(&l.value));
    }

    #[test]
    fn diversity_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let rows = rng.random_range(2..5);
            let cols = rng.random_range(2..10);
            let s = Array2::from_shape_fn((rows, cols), |_| rng.random_range(0.1..4.0));
            let analytic = diversity_loss(&s).grad;
            let h = 1e-5;
            let mut numeric = Array2::<f64>::zeros(s.raw_dim());
            for r in 0..rows {
                for c in 0..cols {
                    let mut up = s.clone();
                    up[[r, c]] += h;
                    let mut down = s.clone();
                    down[[r, c]] -= h;
                    numeric[[r, c]] = (diversity_loss(&up).value - diversity_loss(&down).value) / (2.0 * h);
                }
            }
            let diff = (&analytic - &numeric).mapv(|v| v * v).sum().sqrt();
            let scale = analytic.mapv(|v| v * v).sum().sqrt().max(1e-12);
            assert!(diff / scale < 1e-4, "relative error {}", diff / scale);
        }
    }

    #[test]
    fn total_loss_weighting() {
        assert_eq!(total_loss(0.7, 0.9, 0.0).unwrap(), 0.7);
        assert_abs_diff_eq!(total_loss(1.0, 0.5, 0.4).unwrap(), 1.2, epsilon = 1e-15);
        assert!(total_loss(1.0, 0.5, -0.1).is_err());
    }
}
