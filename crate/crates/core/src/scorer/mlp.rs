use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::domain::FrameFeatures;
use crate::error::{Error, Result};

/// Default hidden width.
pub const DEFAULT_HIDDEN: usize = 256;

/// Two-layer scorer: `h = relu(W1 x + b1)`, `z = W2 h + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpParams {
    pub fn new(w1: Array2<f64>, b1: Array1<f64>, w2: Array2<f64>, b2: Array1<f64>) -> Result<Self> {
        let (hidden, _) = w1.dim();
        let (classes, hidden2) = w2.dim();
        if b1.len() != hidden || hidden2 != hidden || b2.len() != classes {
            return Err(Error::Dimension(format!(
                "w1 {:?}, b1 {}, w2 {:?}, b2 {}",
                w1.dim(),
                b1.len(),
                w2.dim(),
                b2.len()
            )));
        }
        let params = Self { w1, b1, w2, b2 };
        if !params.is_finite() {
            return Err(Error::NonFinite("MLP parameter".into()));
        }
        Ok(params)
    }

    pub fn zeros(input: usize, hidden: usize, classes: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden, input)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((classes, hidden)),
            b2: Array1::zeros(classes),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random<R: Rng + ?Sized>(input: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, hidden, classes);
        let limit1 = (6.0 / (input + hidden) as f64).sqrt();
        let limit2 = (6.0 / (hidden + classes) as f64).sqrt();
        let u1 = Uniform::new_inclusive(-limit1, limit1).unwrap();
        let u2 = Uniform::new_inclusive(-limit2, limit2).unwrap();
        p.w1.iter_mut().for_each(|w| *w = u1.sample(rng));
        p.w2.iter_mut().for_each(|w| *w = u2.sample(rng));
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .all(|v| v.is_finite())
    }
}

/// Gradients with the same shapes as [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpGrads {
    pub fn zeros_like(p: &MlpParams) -> Self {
        Self {
            w1: Array2::zeros(p.w1.raw_dim()),
            b1: Array1::zeros(p.b1.raw_dim()),
            w2: Array2::zeros(p.w2.raw_dim()),
            b2: Array1::zeros(p.b2.raw_dim()),
        }
    }

    fn first_non_finite(&self) -> Option<&'static str> {
        [
            ("w1", self.w1.iter().all(|v| v.is_finite())),
            ("b1", self.b1.iter().all(|v| v.is_finite())),
            ("w2", self.w2.iter().all(|v| v.is_finite())),
            ("b2", self.b2.iter().all(|v| v.is_finite())),
        ]
        .into_iter()
        .find(|(_, ok)| !ok)
        .map(|(name, _)| name)
    }
}

/// Per-frame outputs, all `|vocab| x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameScores {
    pub logits: Array2<f64>,
    /// `f_c(x_t) = sigmoid(logit)`.
    pub sigmoid: Array2<f64>,
    /// `p(c | x_t)`: softmax of each column of logits.
    pub softmax: Array2<f64>,
}

impl FrameScores {
    pub fn from_logits(logits: Array2<f64>) -> Self {
        let sigmoid = logits.mapv(sigmoid);
        let mut softmax = logits.clone();
        for mut col in softmax.columns_mut() {
            let max = col.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            col.mapv_inplace(|v| (v - max).exp());
            let total = col.sum();
            col /= total;
        }
        Self {
            logits,
            sigmoid,
            softmax,
        }
    }

    pub fn frames(&self) -> usize {
        self.logits.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.logits.nrows()
    }

    /// `log f_c(x_t)`, computed from logits without underflow.
    #[inline]
    pub fn log_sigmoid(&self, c: usize, t: usize) -> f64 {
        log_sigmoid(self.logits[[c, t]])
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Forward pass with the hidden activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub scores: FrameScores,
    /// ReLU output, `hidden x T`.
    pub hidden: Array2<f64>,
}

pub fn forward(params: &MlpParams, x: &FrameFeatures) -> Result<FrameScores> {
    Ok(forward_pass(params, x)?.scores)
}

pub fn forward_pass(params: &MlpParams, x: &FrameFeatures) -> Result<ForwardPass> {
    if x.dim() != params.input_dim() {
        return Err(Error::Dimension(format!(
            "features have {} dims, scorer expects {}",
            x.dim(),
            params.input_dim()
        )));
    }
    let mut hidden = params.w1.dot(&x.values().t());
    Zip::from(hidden.rows_mut()).and(&params.b1).for_each(|mut row, &b| {
        row.mapv_inplace(|v| (v + b).max(0.0));
    });
    let mut logits = params.w2.dot(&hidden);
    Zip::from(logits.rows_mut()).and(&params.b2).for_each(|mut row, &b| {
        row += b;
    });
    Ok(ForwardPass {
        scores: FrameScores::from_logits(logits),
        hidden,
    })
}

/// Backpropagates `dL/dlogits` (`|vocab| x T`) to parameter gradients.
pub fn backward(params: &MlpParams, x: &FrameFeatures, pass: &ForwardPass, dlogits: &Array2<f64>) -> MlpGrads {
    let w2 = dlogits.dot(&pass.hidden.t());
    let b2 = dlogits.sum_axis(Axis(1));
    let mut dhidden = params.w2.t().dot(dlogits);
    Zip::from(&mut dhidden).and(&pass.hidden).for_each(|d, &h| {
        if h <= 0.0 {
            *d = 0.0;
        }
    });
    let w1 = dhidden.dot(x.values());
    let b1 = dhidden.sum_axis(Axis(1));
    MlpGrads { w1, b1, w2, b2 }
}

/// `params <- params - lr * grads`.
pub fn sgd_step(params: &mut MlpParams, grads: &MlpGrads, lr: f64) -> Result<()> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::InvalidInput(format!("learning rate {lr} must be positive")));
    }
    if grads.w1.dim() != params.w1.dim()
        || grads.b1.len() != params.b1.len()
        || grads.w2.dim() != params.w2.dim()
        || grads.b2.len() != params.b2.len()
    {
        return Err(Error::Dimension("gradient shapes differ from parameters".into()));
    }
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFinite(format!("gradient of {name}")));
    }
    params.w1.scaled_add(-lr, &grads.w1);
    params.b1.scaled_add(-lr, &grads.b1);
    params.w2.scaled_add(-lr, &grads.w2);
    params.b2.scaled_add(-lr, &grads.b2);
    Ok(())
}

/// Step schedule: `initial` until `drop_at` iterations, then `after`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub initial: f64,
    pub drop_at: usize,
    pub after: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial: 0.01,
            drop_at: 10_000,
            after: 0.001,
        }
    }
}

impl LrSchedule {
    pub fn rate(&self, iteration: usize) -> f64 {
        if iteration < self.drop_at {
            self.initial
        } else {
            self.after
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn features(t: usize, d: usize, rng: &mut ChaCha8Rng) -> FrameFeatures {
        let u = Uniform::new(-1.0, 1.0).unwrap();
        FrameFeatures::new(Array2::from_shape_fn((t, d), |_| u.sample(rng))).unwrap()
    }

    #[test]
    fn zero_params_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = features(5, 3, &mut rng);
        let s = forward(&MlpParams::zeros(3, 4, 3), &x).unwrap();
        assert!(s.sigmoid.iter().all(|&v| v == 0.5));
        assert!(s.softmax.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn bias_shift_changes_sigmoid_not_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = features(6, 3, &mut rng);
        let p = MlpParams::random(3, 8, 4, &mut rng);
        let mut shifted = p.clone();
        shifted.b2 += 1.7;
        let a = forward(&p, &x).unwrap();
        let b = forward(&shifted, &x).unwrap();
        assert!(a.sigmoid.iter().zip(&b.sigmoid).all(|(u, v)| (u - v).abs() > 1e-6));
        for (u, v) in a.softmax.iter().zip(&b.softmax) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_matches_elementwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = features(4, 3, &mut rng);
        let mut p = MlpParams::random(3, 5, 2, &mut rng);
        p.b1.iter_mut().enumerate().for_each(|(i, b)| *b = 0.1 * i as f64 - 0.2);
        p.b2[1] = 0.3;
        let s = forward(&p, &x).unwrap();
        for t in 0..4 {
            let mut h = [0.0; 5];
            for j in 0..5 {
                let mut acc = p.b1[j];
                for d in 0..3 {
                    acc += p.w1[[j, d]] * x.values()[[t, d]];
                }
                h[j] = if acc > 0.0 { acc } else { 0.0 };
            }
            let mut z = [0.0; 2];
            for c in 0..2 {
                z[c] = p.b2[c] + (0..5).map(|j| p.w2[[c, j]] * h[j]).sum::<f64>();
            }
            let denom = z[0].exp() + z[1].exp();
            for c in 0..2 {
                assert_abs_diff_eq!(s.logits[[c, t]], z[c], epsilon = 1e-12);
                assert_abs_diff_eq!(s.sigmoid[[c, t]], 1.0 / (1.0 + (-z[c]).exp()), epsilon = 1e-12);
                assert_abs_diff_eq!(s.softmax[[c, t]], z[c].exp() / denom, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn softmax_columns_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = features(7, 3, &mut rng);
        let mut p = MlpParams::random(3, 6, 5, &mut rng);
        p.w2 *= 30.0;
        let s = forward(&p, &x).unwrap();
        for col in s.softmax.columns() {
            assert_abs_diff_eq!(col.sum(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = features(2, 4, &mut rng);
        assert!(matches!(forward(&MlpParams::zeros(3, 2, 2), &x), Err(Error::Dimension(_))));
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert_abs_diff_eq!(log_sigmoid(0.0), 0.5f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(log_sigmoid(-800.0), -800.0, epsilon = 1e-9);
        assert!(log_sigmoid(800.0) <= 0.0);
        for z in [-5.0, -0.3, 0.7, 4.0] {
            assert_abs_diff_eq!(log_sigmoid(z), sigmoid(z).ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn sgd_zero_gradient_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut p = MlpParams::random(3, 4, 2, &mut rng);
        let before = p.clone();
        sgd_step(&mut p, &MlpGrads::zeros_like(&before), 0.5).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn sgd_unit_rate_on_params_zeroes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut p = MlpParams::random(3, 4, 2, &mut rng);
        p.b1.fill(0.25);
        p.b2.fill(-1.5);
        let g = MlpGrads {
            w1: p.w1.clone(),
            b1: p.b1.clone(),
            w2: p.w2.clone(),
            b2: p.b2.clone(),
        };
        sgd_step(&mut p, &g, 1.0).unwrap();
        assert_eq!(p, MlpParams::zeros(3, 4, 2));
    }

    #[test]
    fn sgd_decreases_quadratic() {
        // f(p) = 0.5 * ||p - target||^2 over every tensor; grad = p - target.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut p = MlpParams::random(3, 4, 2, &mut rng);
        let target = MlpParams::random(3, 4, 2, &mut rng);
        let f = |p: &MlpParams| {
            0.5 * (&p.w1 - &target.w1).mapv(|v| v * v).sum()
                + 0.5 * (&p.b1 - &target.b1).mapv(|v| v * v).sum()
                + 0.5 * (&p.w2 - &target.w2).mapv(|v| v * v).sum()
                + 0.5 * (&p.b2 - &target.b2).mapv(|v| v * v).sum()
        };
        let before = f(&p);
        let g = MlpGrads {
            w1: &p.w1 - &target.w1,
            b1: &p.b1 - &target.b1,
            w2: &p.w2 - &target.w2,
            b2: &p.b2 - &target.b2,
        };
        sgd_step(&mut p, &g, 0.1).unwrap();
        assert!(f(&p) < before);
    }

    #[test]
    fn sgd_rejects_non_finite() {
        let mut p = MlpParams::zeros(2, 2, 2);
        let mut g = MlpGrads::zeros_like(&p);
        g.b2[1] = f64::INFINITY;
        let err = sgd_step(&mut p, &g, 0.1).unwrap_err();
        assert!(err.to_string().contains("b2"));
        assert!(sgd_step(&mut p, &MlpGrads::zeros_like(&MlpParams::zeros(2, 2, 2)), 0.0).is_err());
    }

    #[test]
    fn schedule_drops() {
        let s = LrSchedule::default();
        assert_eq!(s.rate(0), 0.01);
        assert_eq!(s.rate(9_999), 0.01);
        assert_eq!(s.rate(10_000), 0.001);
    }
}
