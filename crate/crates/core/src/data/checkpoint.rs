use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{parse_usize, read_text, write_text, Lines};
use crate::domain::Vocabulary;
use crate::error::Result;
use crate::hmm::HmmParams;
use crate::model::Model;
use crate::scorer::MlpParams;

/// A model plus the number of training iterations already run on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub iteration: usize,
}

fn put_row(out: &mut String, row: impl IntoIterator<Item = f64>) {
    for (j, v) in row.into_iter().enumerate() {
        if j > 0 {
            out.push(' ');
        }
        // Shortest exponent form that parses back to the same bits.
        write!(out, "{v:e}").unwrap();
    }
    out.push('\n');
}

fn put_matrix(out: &mut String, name: &str, m: &Array2<f64>) {
    writeln!(out, "{name} {} {}", m.nrows(), m.ncols()).unwrap();
    for row in m.rows() {
        put_row(out, row.iter().copied());
    }
}

fn put_vector(out: &mut String, name: &str, v: &[f64]) {
    writeln!(out, "{name} {}", v.len()).unwrap();
    put_row(out, v.iter().copied());
}

/// Sections `[HMM]` and `[MLP]`, then `[TRAIN]` once training has started.
pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let m = &ckpt.model;
    let mut out = String::from("[HMM]\n");
    writeln!(out, "vocabulary {}", m.vocab.names().join(" ")).unwrap();
    put_matrix(&mut out, "transitions", &m.hmm.transitions);
    put_vector(&mut out, "lambdas", &m.hmm.lambdas);
    put_vector(&mut out, "priors", &m.hmm.priors);
    out.push_str("[MLP]\n");
    put_matrix(&mut out, "w1", &m.mlp.w1);
    put_vector(&mut out, "b1", m.mlp.b1.as_slice().expect("contiguous"));
    put_matrix(&mut out, "w2", &m.mlp.w2);
    put_vector(&mut out, "b2", m.mlp.b2.as_slice().expect("contiguous"));
    if ckpt.iteration > 0 {
        writeln!(out, "[TRAIN]\niteration {}", ckpt.iteration).unwrap();
    }
    write_text(path, &out)
}

fn header<'a>(lines: &mut Lines<'a>, name: &str, dims: usize) -> Result<Vec<usize>> {
    let (line, text) = lines.next(name)?;
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.first() != Some(&name) || toks.len() != dims + 1 {
        return Err(lines.err(line, format!("expected \"{name}\" with {dims} dimension(s)")));
    }
    toks[1..].iter().map(|t| parse_usize(lines, line, t)).collect()
}

fn get_matrix(lines: &mut Lines<'_>, name: &str) -> Result<Array2<f64>> {
    let d = header(lines, name, 2)?;
    let mut values = Vec::with_capacity(d[0] * d[1]);
    for _ in 0..d[0] {
        values.extend(lines.reals(d[1], name)?);
    }
    Ok(Array2::from_shape_vec((d[0], d[1]), values).expect("shape checked"))
}

fn get_vector(lines: &mut Lines<'_>, name: &str) -> Result<Vec<f64>> {
    let d = header(lines, name, 1)?;
    if d[0] == 0 {
        return Ok(Vec::new());
    }
    lines.reals(d[0], name)
}

fn section(lines: &mut Lines<'_>, name: &str) -> Result<()> {
    let (line, text) = lines.next(name)?;
    if text.trim() != name {
        return Err(lines.err(line, format!("expected section {name}")));
    }
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = read_text(path)?;
    let mut lines = Lines::new(path, &text);
    section(&mut lines, "[HMM]")?;
    let (line, vtext) = lines.next("vocabulary")?;
    let names = vtext
        .strip_prefix("vocabulary ")
        .ok_or_else(|| lines.err(line, "expected \"vocabulary\" line"))?;
    let vocab = Vocabulary::new(names.split_whitespace()).map_err(|e| lines.err(line, e.to_string()))?;
    let transitions = get_matrix(&mut lines, "transitions")?;
    let lambdas = get_vector(&mut lines, "lambdas")?;
    let priors = get_vector(&mut lines, "priors")?;
    let line = lines.last;
    let hmm = HmmParams::new(transitions, lambdas, priors).map_err(|e| lines.err(line, e.to_string()))?;

    section(&mut lines, "[MLP]")?;
    let w1 = get_matrix(&mut lines, "w1")?;
    let b1 = Array1::from(get_vector(&mut lines, "b1")?);
    let w2 = get_matrix(&mut lines, "w2")?;
    let b2 = Array1::from(get_vector(&mut lines, "b2")?);
    let line = lines.last;
    let mlp = MlpParams::new(w1, b1, w2, b2).map_err(|e| lines.err(line, e.to_string()))?;
    let model = Model::new(vocab, hmm, mlp).map_err(|e| lines.err(line, e.to_string()))?;

    let mut iteration = 0;
    if lines.peek().is_some() {
        section(&mut lines, "[TRAIN]")?;
        let d = header(&mut lines, "iteration", 1)?;
        iteration = d[0];
    }
    if lines.peek().is_some() {
        let (line, _) = lines.next("")?;
        return Err(lines.err(line, "trailing content"));
    }
    Ok(Checkpoint { model, iteration })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn model() -> Model {
        let mut r = crate::rng::fork(1, "ckpt", 0);
        let vocab = Vocabulary::numbered(3).unwrap();
        let t = Array2::from_shape_vec((3, 3), vec![0.0, 0.5, 0.5, 1.0 / 3.0, 0.0, 2.0 / 3.0, 0.0, 0.0, 0.0]).unwrap();
        let hmm = HmmParams::new(t, vec![50.0, 12.345678901234567, 1e-3], vec![0.1, 1.0, 0.0]).unwrap();
        let mlp = MlpParams::random(4, 5, 3, &mut r);
        Model::new(vocab, hmm, mlp).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        for iteration in [0, 1234] {
            let c = Checkpoint {
                model: model(),
                iteration,
            };
            write_checkpoint(&p, &c).unwrap();
            assert_eq!(read_checkpoint(&p).unwrap(), c);
        }
    }

    #[test]
    fn missing_section_or_shape_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        write_checkpoint(&p, &Checkpoint { model: model(), iteration: 0 }).unwrap();
        let good = fs::read_to_string(&p).unwrap();

        let no_mlp = good.split("[MLP]").next().unwrap().to_string();
        fs::write(&p, no_mlp).unwrap();
        assert!(read_checkpoint(&p).is_err());

        fs::write(&p, good.replace("b2 3", "b2 2")).unwrap();
        assert!(read_checkpoint(&p).is_err());

        fs::write(&p, good.replace("vocabulary a0 a1 a2", "vocabulary a0 a1")).unwrap();
        assert!(read_checkpoint(&p).is_err());
    }
}
