//! Plain-text file formats and the synthetic corpus generator.

mod checkpoint;
mod features;
mod manifest;
mod synth;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use features::{read_features, read_labels, write_features, write_labels};
pub use manifest::{read_manifest, write_manifest, Manifest, VideoRecord};
pub use synth::{synth_generate, SynthCorpus, SynthSpec, SynthVideo, SynthWorld};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with their 1-based line numbers.
struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
                .filter(|(_, l)| !l.trim().is_empty()),
        );
        Self {
            path,
            inner: it.peekable(),
            last: 0,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((n, l)) => {
                self.last = n;
                Ok((n, l))
            }
            None => Err(Error::parse(self.path, self.last + 1, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn peek(&mut self) -> Option<&'a str> {
        self.inner.peek().map(|&(_, l)| l)
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.path, line, msg)
    }

    /// Parses a whitespace-separated row of exactly `n` reals.
    fn reals(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let (line, text) = self.next(what)?;
        let values = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(line, format!("invalid number {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != n {
            return Err(self.err(line, format!("expected {n} values in {what}, found {}", values.len())));
        }
        Ok(values)
    }
}

fn parse_usize(lines: &Lines<'_>, line: usize, tok: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| lines.err(line, format!("invalid integer {tok:?}")))
}
