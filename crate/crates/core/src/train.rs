//! Pseudo-supervised training. Each iteration picks one video at random,
//! builds its pseudo-ground truth with the anchor-constrained Viterbi,
//! nudges the HMM towards it and takes one SGD step on CE + beta * DIV.

use rand::Rng;
use rayon::prelude::*;

use crate::acv::{
    build_graph, compute_saliency, constrained_viterbi, saliency_backward, select_anchors, AnchorSet,
    SaliencyMatrix, ViterbiOptions, ViterbiResult, DEFAULT_ALPHA, DEFAULT_TAU,
};
use crate::data::Manifest;
use crate::domain::{ActionSet, FrameFeatures, Segmentation, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{anchor_iod, intervals};
use crate::hmm::{CorpusSummary, HmmParams, DEFAULT_MIN_LENGTH};
use crate::model::Model;
use crate::rng;
use crate::scorer::{
    backward, cross_entropy_loss, diversity_loss, forward_pass, mil_pretrain, sgd_step, ForwardPass, LrSchedule,
    MlpParams, DEFAULT_BETA,
};

/// Default number of iterations between progress reports.
pub const PROGRESS_EVERY: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub schedule: LrSchedule,
    pub alpha: f64,
    pub beta: f64,
    pub tau: usize,
    pub prune: bool,
    pub seed: u64,
    pub progress_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            schedule: LrSchedule::default(),
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            tau: DEFAULT_TAU,
            prune: false,
            seed: 0,
            progress_every: PROGRESS_EVERY,
        }
    }
}

/// A training video. `truth` is only read for progress reports.
#[derive(Debug, Clone)]
pub struct TrainVideo {
    pub features: FrameFeatures,
    pub set: ActionSet,
    pub truth: Option<Segmentation>,
}

/// Everything the anchor-constrained Viterbi produced for one video.
#[derive(Debug, Clone)]
pub struct PseudoLabels {
    pub pass: ForwardPass,
    pub saliency: SaliencyMatrix,
    pub anchors: AnchorSet,
    pub viterbi: ViterbiResult,
}

impl PseudoLabels {
    pub fn segmentation(&self) -> &Segmentation {
        &self.viterbi.best.segmentation
    }
}

/// Saliency, anchors, graph and constrained Viterbi for one video.
pub fn acv_pseudo_labels(model: &Model, x: &FrameFeatures, set: &ActionSet, config: &TrainConfig) -> Result<PseudoLabels> {
    let pass = forward_pass(&model.mlp, x)?;
    let saliency = compute_saliency(&pass.scores, set, config.tau);
    let anchors = select_anchors(&saliency, &model.hmm.lambdas, config.alpha, x.frames())?;
    let graph = build_graph(&anchors, x.frames())?;
    let loglik = model.log_likelihoods(&pass.scores, set.labels())?;
    let viterbi = constrained_viterbi(&graph, &loglik, &model.hmm, ViterbiOptions { prune: config.prune })?;
    Ok(PseudoLabels {
        pass,
        saliency,
        anchors,
        viterbi,
    })
}

/// Losses of one iteration, before the parameter update.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub ce: f64,
    pub div: f64,
    pub pseudo: PseudoLabels,
}

/// One training iteration on one video.
pub fn train_step(
    model: &mut Model,
    video: &TrainVideo,
    n_videos: usize,
    lr: f64,
    config: &TrainConfig,
) -> Result<StepReport> {
    let x = &video.features;
    let pseudo = acv_pseudo_labels(model, x, &video.set, config)?;
    model.hmm.update_refined(pseudo.segmentation(), n_videos)?;

    let scores = &pseudo.pass.scores;
    let ce = cross_entropy_loss(scores, &pseudo.segmentation().expand())?;
    let div = diversity_loss(&pseudo.saliency.values);
    let mut dlogits = ce.grad;
    if config.beta != 0.0 {
        let ddiv = saliency_backward(scores, &video.set, config.tau, &div.grad);
        dlogits.scaled_add(config.beta, &ddiv);
    }
    let grads = backward(&model.mlp, x, &pseudo.pass, &dlogits);
    sgd_step(&mut model.mlp, &grads, lr)?;
    Ok(StepReport {
        ce: ce.value,
        div: div.value,
        pseudo,
    })
}

/// Mean anchor IoD of the current model over videos with known truth, or
/// `None` when there are none.
pub fn probe_anchor_iod(model: &Model, probe: &[TrainVideo], config: &TrainConfig) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut count = 0;
    for v in probe {
        let Some(truth) = &v.truth else { continue };
        let pass = forward_pass(&model.mlp, &v.features)?;
        let saliency = compute_saliency(&pass.scores, &v.set, config.tau);
        let anchors = select_anchors(&saliency, &model.hmm.lambdas, config.alpha, v.features.frames())?;
        sum += anchor_iod(&anchors, &intervals(truth)) * anchors.len() as f64;
        count += anchors.len();
    }
    Ok((count > 0).then(|| sum / count as f64))
}

/// Report emitted every `progress_every` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct Progress {
    /// Iterations completed so far, counting from the start of training.
    pub iteration: usize,
    pub mean_ce: f64,
    pub mean_div: f64,
    pub anchor_iod: Option<f64>,
    pub prune_fallbacks: usize,
}

/// Runs `config.iterations` iterations, continuing from `start` (the number
/// already completed). The video of iteration `i` is drawn from a stream
/// keyed by `(seed, i)`, so interrupted and uninterrupted runs agree.
pub fn train(
    model: &mut Model,
    videos: &[TrainVideo],
    start: usize,
    config: &TrainConfig,
    probe: &[TrainVideo],
    mut on_progress: impl FnMut(&Progress),
) -> Result<usize> {
    if videos.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let every = config.progress_every.max(1);
    let (mut ce_sum, mut div_sum, mut window, mut fallbacks) = (0.0, 0.0, 0usize, 0usize);
    let end = start + config.iterations;
    for it in start..end {
        let mut r = rng::fork(config.seed, "train", it as u64);
        let v = r.random_range(0..videos.len());
        let report = train_step(model, &videos[v], videos.len(), config.schedule.rate(it), config)?;
        ce_sum += report.ce;
        div_sum += report.div;
        window += 1;
        fallbacks += report.pseudo.viterbi.prune_fallback as usize;
        let done = it + 1;
        if done % every == 0 || done == end {
            on_progress(&Progress {
                iteration: done,
                mean_ce: ce_sum / window as f64,
                mean_div: div_sum / window as f64,
                anchor_iod: probe_anchor_iod(model, probe, config)?,
                prune_fallbacks: fallbacks,
            });
            (ce_sum, div_sum, window, fallbacks) = (0.0, 0.0, 0, 0);
        }
    }
    Ok(end)
}

/// Settings for building the starting model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub min_length: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            hidden: crate::scorer::DEFAULT_HIDDEN,
            epochs: 10,
            lr: 0.01,
            min_length: DEFAULT_MIN_LENGTH,
            seed: 0,
        }
    }
}

/// Initial HMM from the action sets and multi-instance pretraining of a
/// freshly initialized scorer.
pub fn pretrain_model(
    vocab: Vocabulary,
    videos: &[TrainVideo],
    config: &PretrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Model> {
    let first = videos.first().ok_or(Error::EmptyCorpus)?;
    let hmm = initial_hmm(videos, vocab.len(), config.min_length)?;
    let mut init_rng = rng::fork(config.seed, "mlp-init", 0);
    let mut mlp = MlpParams::random(first.features.dim(), config.hidden, vocab.len(), &mut init_rng);
    let corpus: Vec<(&FrameFeatures, &ActionSet)> = videos.iter().map(|v| (&v.features, &v.set)).collect();
    let mut shuffle_rng = rng::fork(config.seed, "mil", 0);
    let losses = mil_pretrain(&mut mlp, &corpus, config.epochs, config.lr, &mut shuffle_rng)?;
    for (e, l) in losses.into_iter().enumerate() {
        on_epoch(e + 1, l);
    }
    Model::new(vocab, hmm, mlp)
}

/// HMM estimated from set-level ground truth only.
pub fn initial_hmm(videos: &[TrainVideo], n_classes: usize, min_length: f64) -> Result<HmmParams> {
    let summary = CorpusSummary::new(videos.iter().map(|v| (v.features.frames(), v.set.clone())).collect())?;
    HmmParams::initial(&summary, n_classes, min_length)
}

/// Features, sets and (when asked and available) ground truth of a corpus.
pub fn load_videos(manifest: &Manifest, with_truth: bool) -> Result<Vec<TrainVideo>> {
    (0..manifest.videos.len())
        .into_par_iter()
        .map(|i| {
            let features = manifest.features(i)?;
            let truth = if with_truth {
                manifest
                    .labels(i, features.frames())
                    .transpose()?
                    .map(|l| l.run_lengths())
                    .transpose()?
            } else {
                None
            };
            Ok(TrainVideo {
                features,
                set: manifest.videos[i].set.clone(),
                truth,
            })
        })
        .collect()
}
