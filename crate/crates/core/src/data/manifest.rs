use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::{read_features, read_labels, read_text, write_text, Lines};
use crate::domain::{ActionSet, FrameFeatures, FrameLabeling, Vocabulary};
use crate::error::{Error, Result};

/// One video of a corpus. Paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    pub features: PathBuf,
    pub set: ActionSet,
    pub labels: Option<PathBuf>,
}

/// A corpus: the vocabulary line `vocabulary<TAB>name name ...`, then one
/// record per line, `id<TAB>features<TAB>set names[<TAB>labels]`. Lines
/// starting with `#` are comments.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub vocab: Vocabulary,
    pub videos: Vec<VideoRecord>,
}

impl Manifest {
    pub fn features(&self, i: usize) -> Result<FrameFeatures> {
        read_features(&self.videos[i].features)
    }

    /// Frame labels of video `i`, checked against its frame count.
    pub fn labels(&self, i: usize, frames: usize) -> Option<Result<FrameLabeling>> {
        let path = self.videos[i].labels.as_ref()?;
        Some(read_labels(path, &self.vocab).and_then(|l| {
            if l.len() == frames {
                Ok(l)
            } else {
                Err(Error::parse(path, l.len(), format!("{} labels for a video of {frames} frames", l.len())))
            }
        }))
    }

    pub fn sets(&self) -> Vec<ActionSet> {
        self.videos.iter().map(|v| v.set.clone()).collect()
    }

    pub fn has_labels(&self) -> bool {
        self.videos.iter().all(|v| v.labels.is_some())
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut lines = Lines::new(path, &text);
    let mut vocab: Option<Vocabulary> = None;
    let mut videos = Vec::new();
    let mut ids = HashSet::new();
    while lines.peek().is_some() {
        let (line, text) = lines.next("record")?;
        if text.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split('\t').collect();
        let Some(vocab) = vocab.as_ref() else {
            if fields.len() != 2 || fields[0] != "vocabulary" {
                return Err(lines.err(line, "first line must be \"vocabulary<TAB>names\""));
            }
            vocab = Some(Vocabulary::new(fields[1].split_whitespace()).map_err(|e| lines.err(line, e.to_string()))?);
            continue;
        };
        if !(3..=4).contains(&fields.len()) {
            return Err(lines.err(line, format!("expected 3 or 4 tab-separated fields, found {}", fields.len())));
        }
        let id = fields[0].trim();
        if id.is_empty() || !ids.insert(id.to_string()) {
            return Err(lines.err(line, format!("empty or duplicate video id {id:?}")));
        }
        let resolve = |f: &str| -> Result<PathBuf> {
            let p = base.join(f.trim());
            if p.is_file() {
                Ok(p)
            } else {
                Err(lines.err(line, format!("no such file {}", p.display())))
            }
        };
        let features = resolve(fields[1])?;
        let members = fields[2]
            .split_whitespace()
            .map(|n| vocab.id(n).ok_or_else(|| lines.err(line, format!("unknown action {n:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let set = ActionSet::new(members).map_err(|e| lines.err(line, e.to_string()))?;
        let labels = match fields.get(3).map(|f| f.trim()).filter(|f| !f.is_empty()) {
            Some(f) => Some(resolve(f)?),
            None => None,
        };
        videos.push(VideoRecord {
            id: id.to_string(),
            features,
            set,
            labels,
        });
    }
    let vocab = vocab.ok_or_else(|| Error::parse(path, 1, "empty manifest"))?;
    if videos.is_empty() {
        return Err(Error::parse(path, lines.last.max(1), "manifest lists no videos"));
    }
    Ok(Manifest { vocab, videos })
}

/// Writes paths relative to the manifest's directory where possible.
pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new(""));
    let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
    let mut out = format!("vocabulary\t{}\n", manifest.vocab.names().join(" "));
    for v in &manifest.videos {
        let names: Vec<&str> = v
            .set
            .labels()
            .iter()
            .map(|&c| manifest.vocab.name(c).ok_or_else(|| Error::InvalidInput(format!("class {c} not in vocabulary"))))
            .collect::<Result<_>>()?;
        out.push_str(&format!("{}\t{}\t{}", v.id, rel(&v.features), names.join(" ")));
        if let Some(l) = &v.labels {
            out.push('\t');
            out.push_str(&rel(l));
        }
        out.push('\n');
    }
    write_text(path, &out)
}
