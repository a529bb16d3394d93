//! Question-answering examples: bAbI-format text, synthetic task generation
//! and image-question datasets.

pub mod babi;
pub mod generate;
pub mod oracle;
pub mod vqa;

use std::path::PathBuf;
use std::sync::Arc;

use crate::visual::FeatureGrid;

pub use babi::{parse_babi, read_babi_file, serialize_babi};
pub use generate::{generate_task, TaskFamily, TaskSpec};

pub type Sentence = Vec<String>;

#[derive(Clone, Debug, PartialEq)]
pub enum Context {
    Sentences(Vec<Sentence>),
    Grid {
        path: PathBuf,
        grid: Arc<FeatureGrid>,
    },
}

/// One question with its context and single-label answer.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub context: Context,
    pub question: Vec<String>,
    pub answer: String,
    /// 1-based positions of supporting sentences within `context`. Kept for
    /// diagnostics only.
    pub supporting: Vec<usize>,
    /// Every annotator answer, for consensus scoring. Empty for text tasks.
    pub human_answers: Vec<String>,
}

impl Example {
    pub fn text(sentences: Vec<Sentence>, question: Vec<String>, answer: impl Into<String>) -> Self {
        Example {
            context: Context::Sentences(sentences),
            question,
            answer: answer.into(),
            supporting: Vec::new(),
            human_answers: Vec::new(),
        }
    }

    pub fn sentences(&self) -> Option<&[Sentence]> {
        match &self.context {
            Context::Sentences(s) => Some(s),
            Context::Grid { .. } => None,
        }
    }

    /// Number of facts the context will produce.
    pub fn fact_count(&self) -> usize {
        match &self.context {
            Context::Sentences(s) => s.len(),
            Context::Grid { grid, .. } => grid.height * grid.width,
        }
    }
}

/// Whitespace split, strip terminal punctuation, lowercase.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_end_matches(['.', '?', '!', ',']).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Keeps the last `limit` sentences. Supporting positions are shifted and
/// those falling outside the window are dropped.
pub fn truncate_context(example: &Example, limit: usize) -> Example {
    assert!(limit >= 1, "sentence limit must be at least 1");
    let mut out = example.clone();
    if let Context::Sentences(s) = &example.context {
        if s.len() > limit {
            let drop = s.len() - limit;
            out.context = Context::Sentences(s[drop..].to_vec());
            out.supporting = example
                .supporting
                .iter()
                .filter(|&&p| p > drop)
                .map(|&p| p - drop)
                .collect();
        }
    }
    out
}

/// Splits off the last 10% (rounded down) of `examples` as validation data.
pub fn split_validation(examples: &[Example]) -> (&[Example], &[Example]) {
    let n_val = examples.len() / 10;
    examples.split_at(examples.len() - n_val)
}
