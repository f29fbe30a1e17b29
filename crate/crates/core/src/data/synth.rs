//! Synthetic corpora with known frame labels.
//!
//! Every class has a mean feature vector; class means sit on scaled
//! coordinate axes so any two are exactly `separation` apart. A video picks
//! an action set, orders it by a corpus-wide canonical order (like steps of a
//! recipe), draws a Poisson length per action around its class mean, and
//! emits `mean + N(0, noise^2)` per frame.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::features::write_features_rounded;
use super::{read_text, write_labels, write_manifest, write_text, Manifest, VideoRecord};
use crate::domain::{ActionId, ActionSet, FrameFeatures, Segmentation, Vocabulary};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: usize,
    pub train_videos: usize,
    pub test_videos: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub dim: usize,
    /// Euclidean distance between any two class means.
    pub separation: f64,
    /// Per-dimension standard deviation of the frame noise.
    pub noise: f64,
    pub min_set: usize,
    pub max_set: usize,
    /// True mean length per class. Drawn so every set size fits the frame
    /// range when absent.
    pub length_means: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 5,
            train_videos: 40,
            test_videos: 10,
            min_frames: 100,
            max_frames: 300,
            dim: 64,
            separation: 3.0,
            noise: 1.0,
            min_set: 2,
            max_set: 5,
            length_means: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::InvalidInput(format!("synth spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::InvalidInput(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.classes == 0 || self.train_videos == 0 || self.dim == 0 {
            return bad("classes, train_videos and dim must be >= 1".into());
        }
        if self.dim < self.classes {
            return bad(format!("dim {} must be >= classes {}", self.dim, self.classes));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return bad(format!("separation {} must be positive", self.separation));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise {} must be non-negative", self.noise));
        }
        if self.min_set == 0 || self.min_set > self.max_set || self.min_set > self.classes {
            return bad(format!(
                "set sizes {}..={} invalid for {} classes",
                self.min_set, self.max_set, self.classes
            ));
        }
        if self.min_frames == 0 || self.min_frames > self.max_frames || self.min_frames < self.max_set.min(self.classes) {
            return bad(format!("frame range {}..={} invalid", self.min_frames, self.max_frames));
        }
        if let Some(m) = &self.length_means {
            if m.len() != self.classes || m.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return bad("length_means needs one positive value per class".into());
            }
        }
        Ok(())
    }
}

/// One generated video with its hidden ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub set: ActionSet,
    pub truth: Segmentation,
    pub features: FrameFeatures,
}

/// Corpus-wide hidden structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthWorld {
    pub order: Vec<ActionId>,
    pub means: Array2<f64>,
    pub length_means: Vec<f64>,
}

impl SynthWorld {
    pub fn new(spec: &SynthSpec) -> Result<Self> {
        spec.validate()?;
        let mut r = rng::fork(spec.seed, "synth-world", 0);
        let mut order: Vec<ActionId> = (0..spec.classes).map(ActionId).collect();
        order.shuffle(&mut r);
        let axes = sample(&mut r, spec.dim, spec.classes);
        let scale = spec.separation / 2f64.sqrt();
        let mut means = Array2::<f64>::zeros((spec.classes, spec.dim));
        for (c, axis) in axes.into_iter().enumerate() {
            means[[c, axis]] = scale;
        }
        let length_means = match &spec.length_means {
            Some(m) => m.clone(),
            None => {
                // Inside [min_frames / min_set, max_frames / max_set] both the
                // smallest and the largest sets land in range on average.
                let lo = spec.min_frames as f64 / spec.min_set as f64;
                let hi = spec.max_frames as f64 / spec.max_set.min(spec.classes) as f64;
                let (lo, hi) = if lo < hi { (lo, hi) } else { ((lo + hi) / 2.0, (lo + hi) / 2.0 + 1e-9) };
                (0..spec.classes).map(|_| r.random_range(lo..hi)).collect()
            }
        };
        Ok(Self {
            order,
            means,
            length_means,
        })
    }

    fn rank(&self, c: ActionId) -> usize {
        self.order.iter().position(|&o| o == c).expect("class in order")
    }

    pub fn video<R: Rng + ?Sized>(&self, spec: &SynthSpec, r: &mut R) -> Result<SynthVideo> {
        // Each action keeps its own Poisson length and the video is their sum;
        // draws outside the frame range are rejected.
        for _ in 0..MAX_DRAWS {
            let size = r.random_range(spec.min_set..=spec.max_set.min(spec.classes));
            let mut actions: Vec<ActionId> = sample(r, spec.classes, size).into_iter().map(ActionId).collect();
            actions.sort_by_key(|&c| self.rank(c));
            let lengths: Vec<usize> = actions
                .iter()
                .map(|c| {
                    let p = Poisson::new(self.length_means[c.0]).expect("positive mean");
                    (p.sample(r) as usize).max(1)
                })
                .collect();
            let frames: usize = lengths.iter().sum();
            if !(spec.min_frames..=spec.max_frames).contains(&frames) {
                continue;
            }
            let truth = Segmentation::new(actions.clone(), lengths)?;
            let noise = Normal::new(0.0, spec.noise).expect("finite noise");
            let labels = truth.expand();
            let values = Array2::from_shape_fn((frames, spec.dim), |(t, j)| {
                self.means[[labels.labels()[t].0, j]] + if spec.noise > 0.0 { noise.sample(r) } else { 0.0 }
            });
            return Ok(SynthVideo {
                set: ActionSet::new(actions)?,
                truth,
                features: FrameFeatures::new(values)?,
            });
        }
        Err(Error::InvalidInput(format!(
            "no video fits {}..={} frames after {MAX_DRAWS} draws; check length_means",
            spec.min_frames, spec.max_frames
        )))
    }
}

const MAX_DRAWS: usize = 10_000;

/// Paths and hidden structure of a corpus written by `synth_generate`.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub train: Manifest,
    pub test: Manifest,
    pub world: SynthWorld,
}

/// Writes `features/`, `labels/`, `train.tsv`, `test.tsv` and the resolved
/// `spec.toml` under `out`. Identical specs give byte-identical output.
pub fn synth_generate(spec: &SynthSpec, out: &Path) -> Result<SynthCorpus> {
    let world = SynthWorld::new(spec)?;
    let vocab = Vocabulary::numbered(spec.classes)?;
    let split = |prefix: &str, count: usize, offset: usize| -> Result<Manifest> {
        let mut videos = Vec::with_capacity(count);
        for i in 0..count {
            let id = format!("{prefix}{i:04}");
            let mut r = rng::fork(spec.seed, "synth-video", (offset + i) as u64);
            let v = world.video(spec, &mut r)?;
            let features = out.join("features").join(format!("{id}.txt"));
            let labels = out.join("labels").join(format!("{id}.txt"));
            write_features_rounded(&features, &v.features)?;
            write_labels(&labels, &v.truth.expand(), &vocab)?;
            videos.push(VideoRecord {
                id,
                features,
                set: v.set,
                labels: Some(labels),
            });
        }
        Ok(Manifest {
            vocab: vocab.clone(),
            videos,
        })
    };
    let train = split("train", spec.train_videos, 0)?;
    let test = split("test", spec.test_videos, spec.train_videos)?;
    let train_manifest = out.join("train.tsv");
    let test_manifest = out.join("test.tsv");
    write_manifest(&train_manifest, &train)?;
    if spec.test_videos > 0 {
        write_manifest(&test_manifest, &test)?;
    }
    write_text(&out.join("spec.toml"), &spec.to_toml())?;
    Ok(SynthCorpus {
        train_manifest,
        test_manifest,
        train,
        test,
        world,
    })
}
