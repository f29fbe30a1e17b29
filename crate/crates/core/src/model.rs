use crate::domain::{ActionId, FrameFeatures, Vocabulary};
use crate::error::{Error, Result};
use crate::hmm::{FrameLogLikelihoods, HmmParams};
use crate::scorer::{forward, FrameScores, MlpParams};

/// Everything needed to score a video: vocabulary, HMM and frame scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub vocab: Vocabulary,
    pub hmm: HmmParams,
    pub mlp: MlpParams,
}

impl Model {
    pub fn new(vocab: Vocabulary, hmm: HmmParams, mlp: MlpParams) -> Result<Self> {
        let n = vocab.len();
        if hmm.n_classes() != n || mlp.n_classes() != n {
            return Err(Error::Dimension(format!(
                "vocabulary has {n} classes, HMM {}, scorer {}",
                hmm.n_classes(),
                mlp.n_classes()
            )));
        }
        Ok(Self { vocab, hmm, mlp })
    }

    pub fn scores(&self, x: &FrameFeatures) -> Result<FrameScores> {
        forward(&self.mlp, x)
    }

    /// `log p(x_t | c)` up to a per-frame constant, for `classes`.
    pub fn log_likelihoods(&self, scores: &FrameScores, classes: &[ActionId]) -> Result<FrameLogLikelihoods> {
        FrameLogLikelihoods::from_posteriors(scores.softmax.view(), classes, &self.hmm.priors)
    }
}
