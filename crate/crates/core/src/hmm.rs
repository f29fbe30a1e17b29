//! Segment-level HMM: transition matrix, Poisson length model and class priors.
//!
//! The initial parameters are estimated from set-level ground truth only. The
//! refined parameters then move towards per-video estimates from the
//! pseudo-ground truth at rate `1/V`.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2};
use statrs::function::gamma::ln_gamma;

use crate::domain::{ActionId, ActionSet, Segmentation};
use crate::error::{Error, Result};

/// Default minimum action length used when fitting the initial lengths.
pub const DEFAULT_MIN_LENGTH: f64 = 50.0;

/// Transition matrix, per-class Poisson means and per-class priors.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmParams {
    /// `transitions[[from, to]] = p(to | from)`.
    pub transitions: Array2<f64>,
    pub lambdas: Vec<f64>,
    pub priors: Vec<f64>,
}

impl HmmParams {
    pub fn new(transitions: Array2<f64>, lambdas: Vec<f64>, priors: Vec<f64>) -> Result<Self> {
        let n = lambdas.len();
        if transitions.dim() != (n, n) || priors.len() != n {
            return Err(Error::Dimension(format!(
                "transitions {:?}, {} lambdas, {} priors",
                transitions.dim(),
                n,
                priors.len()
            )));
        }
        if transitions.iter().chain(&lambdas).chain(&priors).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("HMM parameter".into()));
        }
        Ok(Self {
            transitions,
            lambdas,
            priors,
        })
    }

    /// Initial parameters from a training corpus summary.
    pub fn initial(summary: &CorpusSummary, n_classes: usize, min_length: f64) -> Result<Self> {
        let sets: Vec<ActionSet> = summary.videos.iter().map(|(_, s)| s.clone()).collect();
        let transitions = init_transitions(&sets, n_classes)?.matrix;
        let lambdas = init_lambdas(summary, n_classes, min_length)?.lambdas;
        let priors = init_priors(summary, n_classes)?;
        Self::new(transitions, lambdas, priors)
    }

    pub fn n_classes(&self) -> usize {
        self.lambdas.len()
    }

    #[inline]
    pub fn log_transition(&self, from: ActionId, to: ActionId) -> f64 {
        self.transitions[[from.0, to.0]].ln()
    }

    pub fn lambda(&self, c: ActionId) -> f64 {
        self.lambdas[c.0]
    }

    /// Moves every parameter by `(1/V) * (per-video estimate - current)`.
    ///
    /// Transition rows are touched only for classes with at least one
    /// successor segment, lengths only for classes present in `seg`. Priors
    /// move for every class.
    pub fn update_refined(&mut self, seg: &Segmentation, n_videos: usize) -> Result<()> {
        if n_videos == 0 {
            return Err(Error::InvalidInput("number of videos must be >= 1".into()));
        }
        let n = self.n_classes();
        if let Some(c) = seg.actions().iter().find(|c| c.0 >= n) {
            return Err(Error::Dimension(format!("class {c} outside {n}-class HMM")));
        }
        let rate = 1.0 / n_videos as f64;
        let frames = seg.total_frames() as f64;

        let mut pair_counts = Array2::<f64>::zeros((n, n));
        let mut out_counts = vec![0.0; n];
        for w in seg.actions().windows(2) {
            pair_counts[[w[0].0, w[1].0]] += 1.0;
            out_counts[w[0].0] += 1.0;
        }
        for from in 0..n {
            if out_counts[from] == 0.0 {
                continue;
            }
            for to in 0..n {
                let estimate = pair_counts[[from, to]] / out_counts[from];
                let p = &mut self.transitions[[from, to]];
                *p = step(*p, estimate, rate);
            }
        }

        let mut length_sums = vec![0.0; n];
        let mut segment_counts = vec![0.0; n];
        for (&c, &l) in seg.actions().iter().zip(seg.lengths()) {
            length_sums[c.0] += l as f64;
            segment_counts[c.0] += 1.0;
        }
        for c in 0..n {
            if segment_counts[c] > 0.0 {
                let estimate = length_sums[c] / segment_counts[c];
                self.lambdas[c] = step(self.lambdas[c], estimate, rate).max(1.0);
            }
            let estimate = length_sums[c] / frames;
            self.priors[c] = step(self.priors[c], estimate, rate).clamp(0.0, 1.0);
        }
        Ok(())
    }
}

/// `x + rate * (estimate - x)`, written so that both the fixed point
/// (`estimate == x`) and the full step (`rate == 1`) are exact.
fn step(x: f64, estimate: f64, rate: f64) -> f64 {
    if rate == 1.0 {
        estimate
    } else {
        x + rate * (estimate - x)
    }
}

/// Lengths and ground-truth sets of the training videos.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    pub videos: Vec<(usize, ActionSet)>,
}

impl CorpusSummary {
    pub fn new(videos: Vec<(usize, ActionSet)>) -> Result<Self> {
        if videos.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if videos.iter().any(|(t, _)| *t == 0) {
            return Err(Error::InvalidInput("video with 0 frames".into()));
        }
        Ok(Self { videos })
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }
}

/// Initial transition matrix plus the classes whose row stayed empty.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionInit {
    pub matrix: Array2<f64>,
    pub empty_rows: Vec<ActionId>,
}

/// `p(c'|c) = #(c', c) / #(c)` where `#(c)` counts sets containing `c` and
/// `#(c', c)` counts sets containing both, `c' != c`.
///
/// With co-occurrence counts a row sums to more than one whenever sets hold
/// three or more classes, so each row is normalized by its total pair count
/// instead; for sets of two the two definitions agree.
pub fn init_transitions(sets: &[ActionSet], n_classes: usize) -> Result<TransitionInit> {
    if sets.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut pairs = Array2::<f64>::zeros((n_classes, n_classes));
    for set in sets {
        for &a in set.labels() {
            if a.0 >= n_classes {
                return Err(Error::Dimension(format!("class {a} outside {n_classes} classes")));
            }
            for &b in set.labels() {
                if a != b {
                    pairs[[a.0, b.0]] += 1.0;
                }
            }
        }
    }
    let mut empty_rows = Vec::new();
    for (c, mut row) in pairs.rows_mut().into_iter().enumerate() {
        let total: f64 = row.sum();
        if total > 0.0 {
            row /= total;
        } else {
            empty_rows.push(ActionId(c));
        }
    }
    Ok(TransitionInit {
        matrix: pairs,
        empty_rows,
    })
}

/// Fitted initial lengths plus the classes absent from every set.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaInit {
    pub lambdas: Vec<f64>,
    pub unseen: Vec<ActionId>,
}

/// Least-squares fit of `sum_v (T_v - sum_{c in C_v} lambda_c)^2` subject to
/// `lambda_c >= min_length`.
///
/// Active-set iteration: solve the free variables by minimum-norm least
/// squares, clamp any violators to the bound and re-solve; a clamped variable
/// whose gradient points into the feasible region is released again.
pub fn init_lambdas(summary: &CorpusSummary, n_classes: usize, min_length: f64) -> Result<LambdaInit> {
    if summary.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(min_length >= 1.0) {
        return Err(Error::InvalidInput(format!("minimum length {min_length} < 1")));
    }
    let n_videos = summary.len();
    let mut design = DMatrix::<f64>::zeros(n_videos, n_classes);
    let mut targets = DVector::<f64>::zeros(n_videos);
    for (v, (frames, set)) in summary.videos.iter().enumerate() {
        targets[v] = *frames as f64;
        for &c in set.labels() {
            if c.0 >= n_classes {
                return Err(Error::Dimension(format!("class {c} outside {n_classes} classes")));
            }
            design[(v, c.0)] = 1.0;
        }
    }
    let seen: Vec<bool> = (0..n_classes).map(|c| design.column(c).iter().any(|&x| x > 0.0)).collect();
    let unseen: Vec<ActionId> = (0..n_classes).filter(|&c| !seen[c]).map(ActionId).collect();

    let mut lambdas = vec![min_length; n_classes];
    let mut clamped: Vec<bool> = seen.iter().map(|s| !s).collect();
    let max_rounds = 4 * n_classes + 8;
    for _ in 0..max_rounds {
        let free: Vec<usize> = (0..n_classes).filter(|&c| !clamped[c]).collect();
        if !free.is_empty() {
            let mut rhs = targets.clone();
            for c in (0..n_classes).filter(|&c| clamped[c]) {
                rhs -= design.column(c) * min_length;
            }
            let sub = design.select_columns(&free);
            let solution = min_norm_least_squares(sub, &rhs)?;
            for (k, &c) in free.iter().enumerate() {
                lambdas[c] = solution[k];
            }
        }
        let violators: Vec<usize> = free.iter().copied().filter(|&c| lambdas[c] < min_length).collect();
        if !violators.is_empty() {
            for c in violators {
                clamped[c] = true;
                lambdas[c] = min_length;
            }
            continue;
        }
        // Release the clamped class with the steepest descent direction, if any.
        let residual = &targets - &design * DVector::from_column_slice(&lambdas);
        let release = (0..n_classes)
            .filter(|&c| clamped[c] && seen[c])
            .map(|c| (c, design.column(c).dot(&residual)))
            .filter(|&(_, g)| g > 1e-9 * (1.0 + targets.amax()))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match release {
            Some((c, _)) => clamped[c] = false,
            None => break,
        }
    }
    for l in &mut lambdas {
        *l = l.max(min_length);
    }
    Ok(LambdaInit { lambdas, unseen })
}

fn min_norm_least_squares(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.svd(true, true);
    let eps = 1e-10 * svd.singular_values.max().max(1.0);
    svd.solve(b, eps)
        .map_err(|e| Error::InvalidInput(format!("least-squares solve failed: {e}")))
}

/// Fraction of the training footage whose ground-truth set contains each class.
pub fn init_priors(summary: &CorpusSummary, n_classes: usize) -> Result<Vec<f64>> {
    if summary.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut footage = vec![0.0; n_classes];
    let mut total = 0.0;
    for (frames, set) in &summary.videos {
        total += *frames as f64;
        for &c in set.labels() {
            if c.0 >= n_classes {
                return Err(Error::Dimension(format!("class {c} outside {n_classes} classes")));
            }
            footage[c.0] += *frames as f64;
        }
    }
    Ok(footage.into_iter().map(|f| f / total).collect())
}

/// `log p(c|x_t) - log p(c)` for one frame.
pub fn log_frame_likelihood(log_posteriors: &[f64], priors: &[f64]) -> Result<Vec<f64>> {
    if log_posteriors.len() != priors.len() {
        return Err(Error::Dimension(format!(
            "{} posteriors vs {} priors",
            log_posteriors.len(),
            priors.len()
        )));
    }
    log_posteriors
        .iter()
        .zip(priors)
        .enumerate()
        .map(|(c, (&lp, &p))| {
            if p > 0.0 {
                Ok(lp - p.ln())
            } else {
                Err(Error::ZeroPrior(c))
            }
        })
        .collect()
}

/// `l ln(lambda) - lambda - ln(l!)`.
pub fn log_poisson_length(length: usize, lambda: f64) -> Result<f64> {
    if length == 0 {
        return Err(Error::InvalidInput("segment length must be >= 1".into()));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("Poisson mean {lambda} must be positive")));
    }
    Ok(log_poisson_unchecked(length, lambda))
}

#[inline]
fn log_poisson_unchecked(length: usize, lambda: f64) -> f64 {
    let l = length as f64;
    l * lambda.ln() - lambda - ln_gamma(l + 1.0)
}

/// Precomputed `log p(l | c)` for `l = 1..=max_len`.
#[derive(Debug, Clone)]
pub struct LengthTable {
    values: Vec<f64>,
}

impl LengthTable {
    pub fn new(lambda: f64, max_len: usize) -> Result<Self> {
        log_poisson_length(1, lambda)?;
        let mut values = Vec::with_capacity(max_len + 1);
        values.push(f64::NEG_INFINITY);
        values.extend((1..=max_len).map(|l| log_poisson_unchecked(l, lambda)));
        Ok(Self { values })
    }

    #[inline]
    pub fn get(&self, length: usize) -> f64 {
        self.values[length]
    }
}

/// Per-frame log-likelihoods `log p(x_t | c)` for a subset of classes, with
/// prefix sums so any segment sum costs O(1).
#[derive(Debug, Clone)]
pub struct FrameLogLikelihoods {
    classes: Vec<ActionId>,
    table: Array2<f64>,
    prefix: Array2<f64>,
}

impl FrameLogLikelihoods {
    /// `table` has one row per entry of `classes` and one column per frame.
    pub fn new(classes: Vec<ActionId>, table: Array2<f64>) -> Result<Self> {
        let (rows, frames) = table.dim();
        if rows != classes.len() || rows == 0 || frames == 0 {
            return Err(Error::Dimension(format!(
                "likelihood table {rows}x{frames} for {} classes",
                classes.len()
            )));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("frame log-likelihood".into()));
        }
        let mut prefix = Array2::<f64>::zeros((rows, frames + 1));
        for r in 0..rows {
            let mut acc = 0.0;
            for t in 0..frames {
                acc += table[[r, t]];
                prefix[[r, t + 1]] = acc;
            }
        }
        Ok(Self {
            classes,
            table,
            prefix,
        })
    }

    /// Builds the table from softmax posteriors (`|vocab| x T`) for `classes`.
    pub fn from_posteriors(posteriors: ArrayView2<'_, f64>, classes: &[ActionId], priors: &[f64]) -> Result<Self> {
        let frames = posteriors.ncols();
        let mut table = Array2::<f64>::zeros((classes.len(), frames));
        for (r, &c) in classes.iter().enumerate() {
            if c.0 >= posteriors.nrows() || c.0 >= priors.len() {
                return Err(Error::Dimension(format!("class {c} outside score table")));
            }
            let prior = priors[c.0];
            if !(prior > 0.0) {
                return Err(Error::ZeroPrior(c.0));
            }
            let log_prior = prior.ln();
            for t in 0..frames {
                table[[r, t]] = posteriors[[c.0, t]].max(crate::scorer::PROB_EPS).ln() - log_prior;
            }
        }
        Self::new(classes.to_vec(), table)
    }

    pub fn classes(&self) -> &[ActionId] {
        &self.classes
    }

    pub fn frames(&self) -> usize {
        self.table.ncols()
    }

    pub fn table(&self) -> &Array2<f64> {
        &self.table
    }

    pub fn row_of(&self, c: ActionId) -> Option<usize> {
        self.classes.iter().position(|&x| x == c)
    }

    pub fn get(&self, row: usize, t: usize) -> f64 {
        self.table[[row, t]]
    }

    /// Sum of the row over frames `start..end`.
    #[inline]
    pub fn segment_sum(&self, row: usize, start: usize, end: usize) -> f64 {
        self.prefix[[row, end]] - self.prefix[[row, start]]
    }

    pub fn row_vector(&self, row: usize) -> Array1<f64> {
        self.table.row(row).to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const A: ActionId = ActionId(0);
    const B: ActionId = ActionId(1);
    const C: ActionId = ActionId(2);

    fn set(ids: &[ActionId]) -> ActionSet {
        ActionSet::new(ids.iter().copied()).unwrap()
    }

    fn summary(videos: &[(usize, &[ActionId])]) -> CorpusSummary {
        CorpusSummary::new(videos.iter().map(|(t, s)| (*t, set(s))).collect()).unwrap()
    }

    fn objective(s: &CorpusSummary, lambdas: &[f64]) -> f64 {
        s.videos
            .iter()
            .map(|(t, set)| {
                let r = *t as f64 - set.labels().iter().map(|c| lambdas[c.0]).sum::<f64>();
                r * r
            })
            .sum()
    }

    #[test]
    fn transitions_by_cooccurrence() {
        let init = init_transitions(&[set(&[A, B]), set(&[B, C])], 3).unwrap();
        let m = &init.matrix;
        assert_eq!(m[[B.0, A.0]], 0.5);
        assert_eq!(m[[B.0, C.0]], 0.5);
        assert_eq!(m[[A.0, B.0]], 1.0);
        assert_eq!(m[[C.0, B.0]], 1.0);
        assert!(init.empty_rows.is_empty());
    }

    #[test]
    fn singleton_set_leaves_empty_row() {
        let init = init_transitions(&[set(&[A])], 2).unwrap();
        assert!(init.matrix.row(0).iter().all(|&p| p == 0.0));
        assert_eq!(init.empty_rows, vec![A, B]);
    }

    #[test]
    fn transitions_scale_invariant() {
        let once = init_transitions(&[set(&[A, B])], 2).unwrap();
        let many = init_transitions(&vec![set(&[A, B]); 7], 2).unwrap();
        assert_eq!(once, many);
        assert!(init_transitions(&[], 2).is_err());
    }

    #[test]
    fn transitions_rows_stochastic_for_large_sets() {
        let init = init_transitions(&[set(&[A, B, C]), set(&[A, B])], 3).unwrap();
        for row in init.matrix.rows() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lambdas_symmetric_split() {
        let s = summary(&[(100, &[A, B])]);
        let l = init_lambdas(&s, 2, 1.0).unwrap().lambdas;
        assert_abs_diff_eq!(l[0], 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(l[1], 50.0, epsilon = 1e-9);
    }

    #[test]
    fn lambdas_normal_equations() {
        let s = summary(&[(100, &[A]), (300, &[A, B])]);
        let l = init_lambdas(&s, 2, 1.0).unwrap().lambdas;
        assert_abs_diff_eq!(l[0], 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(l[1], 200.0, epsilon = 1e-9);
    }

    #[test]
    fn lambdas_feasible_optimum_kept() {
        let s = summary(&[(60, &[A])]);
        let l = init_lambdas(&s, 1, 50.0).unwrap().lambdas;
        assert_abs_diff_eq!(l[0], 60.0, epsilon = 1e-9);
    }

    #[test]
    fn lambdas_clamped_and_unseen_flagged() {
        // Unconstrained optimum puts b at 20, below the bound.
        let s = summary(&[(100, &[A]), (120, &[A, B])]);
        let init = init_lambdas(&s, 3, 50.0).unwrap();
        assert_eq!(init.unseen, vec![C]);
        assert_abs_diff_eq!(init.lambdas[1], 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(init.lambdas[2], 50.0, epsilon = 1e-9);
        // With b fixed at 50: minimize (100-a)^2 + (70-a)^2 -> a = 85.
        assert_abs_diff_eq!(init.lambdas[0], 85.0, epsilon = 1e-9);
    }

    #[test]
    fn priors_are_footage_fractions() {
        let s = summary(&[(100, &[A]), (100, &[A, B])]);
        assert_eq!(init_priors(&s, 3).unwrap(), vec![1.0, 0.5, 0.0]);
        let single = summary(&[(37, &[A])]);
        assert_eq!(init_priors(&single, 1).unwrap(), vec![1.0]);
    }

    #[test]
    fn frame_likelihood_ratio() {
        let p = [0.4f64, 0.6];
        let out = log_frame_likelihood(&p.map(f64::ln), &p).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-15));
        let out = log_frame_likelihood(&[0.8f64.ln()], &[0.4]).unwrap();
        assert_abs_diff_eq!(out[0], 2f64.ln(), epsilon = 1e-15);
        assert!(matches!(log_frame_likelihood(&[0.0], &[0.0]), Err(Error::ZeroPrior(0))));
    }

    #[test]
    fn frame_likelihood_shift_is_common() {
        let post = [0.1f64, 0.3, 0.6];
        let priors = [0.2, 0.5, 0.9];
        let base = log_frame_likelihood(&post.map(f64::ln), &priors).unwrap();
        let doubled = log_frame_likelihood(&post.map(|p| (2.0 * p).ln()), &priors).unwrap();
        for (a, b) in base.iter().zip(&doubled) {
            assert_abs_diff_eq!(b - a, 2f64.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn poisson_closed_forms() {
        assert_abs_diff_eq!(log_poisson_length(1, 1.0).unwrap(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(log_poisson_length(2, 2.0).unwrap(), 2f64.ln() - 2.0, epsilon = 1e-12);
        assert!(log_poisson_length(0, 1.0).is_err());
        assert!(log_poisson_length(3, 0.0).is_err());
        assert!(log_poisson_length(3, -1.0).is_err());
    }

    #[test]
    fn poisson_normalizes() {
        for lambda in [0.5, 3.0, 17.5, 60.0, 250.0] {
            let upper = (lambda + 40.0 * f64::sqrt(lambda)).ceil() as usize;
            let total: f64 = (-lambda).exp()
                + (1..=upper).map(|l| log_poisson_length(l, lambda).unwrap().exp()).sum::<f64>();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn length_table_matches_direct() {
        let table = LengthTable::new(12.5, 40).unwrap();
        for l in 1..=40 {
            assert_eq!(table.get(l), log_poisson_length(l, 12.5).unwrap());
        }
    }

    fn two_class_params() -> HmmParams {
        HmmParams::new(
            Array2::from_shape_vec((2, 2), vec![0.3, 0.7, 0.9, 0.1]).unwrap(),
            vec![3.0, 8.0],
            vec![0.2, 0.9],
        )
        .unwrap()
    }

    #[test]
    fn refined_full_step() {
        let mut p = two_class_params();
        let seg = Segmentation::new(vec![A, B], vec![6, 4]).unwrap();
        p.update_refined(&seg, 1).unwrap();
        assert_eq!(p.lambdas, vec![6.0, 4.0]);
        assert_eq!(p.priors, vec![0.6, 0.4]);
        assert_eq!(p.transitions[[0, 1]], 1.0);
        assert_eq!(p.transitions[[0, 0]], 0.0);
        // b has no successor: its row is untouched.
        assert_eq!(p.transitions.row(1).to_vec(), vec![0.9, 0.1]);
    }

    #[test]
    fn refined_fixed_point() {
        let mut p = HmmParams::new(
            Array2::from_shape_vec((2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap(),
            vec![6.0, 4.0],
            vec![0.6, 0.4],
        )
        .unwrap();
        let before = p.clone();
        let seg = Segmentation::new(vec![A, B], vec![6, 4]).unwrap();
        p.update_refined(&seg, 5).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn refined_clamps_lambda() {
        let mut p = two_class_params();
        p.lambdas = vec![1.0, 1.0];
        let seg = Segmentation::new(vec![A], vec![1]).unwrap();
        p.update_refined(&seg, 3).unwrap();
        assert!(p.lambdas.iter().all(|&l| l >= 1.0));
    }

    fn random_stochastic(n: usize, seeds: &[f64]) -> Array2<f64> {
        let mut m = Array2::from_shape_fn((n, n), |(i, j)| seeds[(i * n + j) % seeds.len()] + 0.01);
        for mut row in m.rows_mut() {
            let s = row.sum();
            row /= s;
        }
        m
    }

    proptest! {
        #[test]
        fn refined_rows_stay_stochastic(
            seeds in prop::collection::vec(0.0f64..1.0, 16),
            segs in prop::collection::vec(prop::collection::vec((0usize..4, 1usize..30), 1..7), 1..10),
            videos in 1usize..50,
        ) {
            let mut p = HmmParams::new(random_stochastic(4, &seeds), vec![10.0; 4], vec![0.25; 4]).unwrap();
            for runs in segs {
                let (actions, lengths): (Vec<_>, Vec<_>) = runs.into_iter().map(|(c, l)| (ActionId(c), l)).unzip();
                let seg = Segmentation::new(actions, lengths).unwrap();
                p.update_refined(&seg, videos).unwrap();
                for row in p.transitions.rows() {
                    prop_assert!((row.sum() - 1.0).abs() < 1e-9);
                }
                prop_assert!(p.lambdas.iter().all(|&l| l >= 1.0));
                prop_assert!(p.priors.iter().all(|&q| (0.0..=1.0).contains(&q)));
            }
        }

        #[test]
        fn lambdas_locally_optimal(
            videos in prop::collection::vec((20usize..400, prop::collection::btree_set(0usize..4, 1..4)), 1..12),
            min_len in 1.0f64..60.0,
            deltas in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 8),
        ) {
            let s = CorpusSummary::new(videos.into_iter().map(|(t, ids)| {
                (t, ActionSet::new(ids.into_iter().map(ActionId)).unwrap())
            }).collect()).unwrap();
            let l = init_lambdas(&s, 4, min_len).unwrap().lambdas;
            prop_assert!(l.iter().all(|&x| x >= min_len));
            let base = objective(&s, &l);
            for d in deltas {
                let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                let moved: Vec<f64> = l.iter().zip(&d).map(|(x, dx)| (x + 1e-3 * dx / norm).max(min_len)).collect();
                prop_assert!(base <= objective(&s, &moved) + 1e-9 * (1.0 + base));
            }
        }
    }
}
