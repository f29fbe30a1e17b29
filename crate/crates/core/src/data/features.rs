use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::{parse_usize, read_text, write_text, Lines};
use crate::domain::{FrameFeatures, FrameLabeling, Vocabulary};
use crate::error::{Error, Result};

/// Reads a `T D` header followed by `T` rows of `D` reals.
pub fn read_features(path: &Path) -> Result<FrameFeatures> {
    let text = read_text(path)?;
    let mut lines = Lines::new(path, &text);
    let (line, header) = lines.next("header \"T D\"")?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(lines.err(line, "header must be \"T D\""));
    }
    let frames = parse_usize(&lines, line, toks[0])?;
    let dim = parse_usize(&lines, line, toks[1])?;
    if frames == 0 || dim == 0 {
        return Err(lines.err(line, "T and D must be positive"));
    }
    let mut values = Vec::with_capacity(frames * dim);
    for t in 0..frames {
        if lines.peek().is_none() {
            return Err(lines.err(lines.last + 1, format!("expected {frames} rows, found {t}")));
        }
        values.extend(lines.reals(dim, "feature row")?);
    }
    if lines.peek().is_some() {
        let (line, _) = lines.next("")?;
        return Err(lines.err(line, format!("more than {frames} rows")));
    }
    let values = Array2::from_shape_vec((frames, dim), values).expect("shape checked");
    FrameFeatures::new(values)
}

fn format_features(x: &FrameFeatures, fmt: impl Fn(&mut String, f64)) -> String {
    let mut out = format!("{} {}\n", x.frames(), x.dim());
    for row in x.values().rows() {
        for (j, &v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            fmt(&mut out, v);
        }
        out.push('\n');
    }
    out
}

/// Writes values in shortest round-trip form, so reading back is exact.
pub fn write_features(path: &Path, x: &FrameFeatures) -> Result<()> {
    write_text(path, &format_features(x, |s, v| write!(s, "{v}").unwrap()))
}

/// Fixed six-decimal variant used for generated corpora.
pub(crate) fn write_features_rounded(path: &Path, x: &FrameFeatures) -> Result<()> {
    write_text(path, &format_features(x, |s, v| write!(s, "{v:.6}").unwrap()))
}

/// One action name per line.
pub fn read_labels(path: &Path, vocab: &Vocabulary) -> Result<FrameLabeling> {
    let text = read_text(path)?;
    let mut lines = Lines::new(path, &text);
    let mut labels = Vec::new();
    while lines.peek().is_some() {
        let (line, name) = lines.next("label")?;
        let name = name.trim();
        let id = vocab
            .id(name)
            .ok_or_else(|| lines.err(line, format!("unknown action {name:?}")))?;
        labels.push(id);
    }
    if labels.is_empty() {
        return Err(Error::parse(path, 1, "no labels"));
    }
    Ok(FrameLabeling::new(labels))
}

pub fn write_labels(path: &Path, labels: &FrameLabeling, vocab: &Vocabulary) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 4);
    for &c in labels.labels() {
        let name = vocab
            .name(c)
            .ok_or_else(|| Error::InvalidInput(format!("class {c} not in vocabulary")))?;
        out.push_str(name);
        out.push('\n');
    }
    write_text(path, &out)
}
