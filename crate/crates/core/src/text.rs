//! Sentence and question readers.
//!
//! The positional-encoding reader turns a sentence of `M` words into
//! `f = Σ_j l_j ∘ w_j` with
//!
//! ```text
//! l_jd = (1 − j/M) − (d/D)(1 − 2j/M),   j ∈ 1..=M, d ∈ 1..=D
//! ```
//!
//! so word order changes the encoding even though it is a weighted sum.

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::gru::GruCell;
use crate::params::{init_weights, Init, ParamId, ParamKind, ParamSet, EMBEDDING_INIT_RANGE};
use crate::tensor::Tensor;
use crate::vocab::PAD;

/// Positional weights `l` as an `M × D` matrix (row `j-1` is `l_j`).
pub fn positional_weights(m: usize, d: usize) -> Tensor {
    assert!(m >= 1 && d >= 1, "positional_weights needs M, D >= 1");
    let mut l = Tensor::zeros(&[m, d]);
    let (mf, df) = (m as f64, d as f64);
    for j in 1..=m {
        let jf = j as f64;
        for k in 1..=d {
            let kf = k as f64;
            let v = (1.0 - jf / mf) - (kf / df) * (1.0 - 2.0 * jf / mf);
            l.set(j - 1, k - 1, v);
        }
    }
    l
}

/// Word embedding table, `|V| × D`. The PAD row is zero and never updated.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab_size: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        vocab_size: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut table = init_weights(Init::Uniform(EMBEDDING_INIT_RANGE), &[vocab_size, dim], rng);
        table.data_mut()[PAD * dim..(PAD + 1) * dim].fill(0.0);
        Embedding {
            table: params.add(name, ParamKind::Embedding, table),
            vocab_size,
            dim,
        }
    }

    pub fn lookup(&self, g: &mut Graph<'_>, token: usize) -> Result<Var> {
        if token >= self.vocab_size {
            return Err(Error::Vocabulary {
                index: token,
                size: self.vocab_size,
            });
        }
        if token == PAD {
            return Ok(g.zeros(self.dim));
        }
        let table = g.param(self.table);
        g.row(table, token)
    }
}

/// Positional-encoding sentence encoding `Σ_j l_j ∘ emb(w_j)`.
pub fn encode_sentence_pe(g: &mut Graph<'_>, sentence: &[usize], emb: &Embedding) -> Result<Var> {
    if sentence.is_empty() {
        return Err(Error::Input("empty sentence".into()));
    }
    let l = positional_weights(sentence.len(), emb.dim);
    let mut acc: Option<Var> = None;
    for (j, &tok) in sentence.iter().enumerate() {
        let w = emb.lookup(g, tok)?;
        let lj = g.vector(l.row(j));
        let term = g.mul(lj, w)?;
        acc = Some(match acc {
            None => term,
            Some(a) => g.add(a, term)?,
        });
    }
    Ok(acc.expect("nonempty sentence"))
}

/// Single GRU pass over every word of the story; returns the hidden state
/// after the last word of each sentence.
pub fn encode_story_word_gru(
    g: &mut Graph<'_>,
    sentences: &[Vec<usize>],
    emb: &Embedding,
    cell: &GruCell,
) -> Result<Vec<Var>> {
    if sentences.is_empty() {
        return Err(Error::Input("empty story".into()));
    }
    let mut h = g.zeros(cell.n_hidden);
    let mut out = Vec::with_capacity(sentences.len());
    for s in sentences {
        if s.is_empty() {
            return Err(Error::Input("empty sentence".into()));
        }
        for &tok in s {
            let x = emb.lookup(g, tok)?;
            h = cell.step(g, x, h)?;
        }
        out.push(h);
    }
    Ok(out)
}

/// Final GRU hidden state over the question words, from a zero state.
pub fn encode_question(
    g: &mut Graph<'_>,
    tokens: &[usize],
    emb: &Embedding,
    cell: &GruCell,
) -> Result<Var> {
    if tokens.is_empty() {
        return Err(Error::Input("empty question".into()));
    }
    let mut h = g.zeros(cell.n_hidden);
    for &tok in tokens {
        let x = emb.lookup(g, tok)?;
        h = cell.step(g, x, h)?;
    }
    Ok(h)
}
