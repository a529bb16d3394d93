//! Image-question datasets as JSON lines.
//!
//! ```text
//! {"grid": "img_001.fgrd", "question": "what color is the cat?", "answers": ["black", "black", "gray"]}
//! ```
//!
//! `grid` is a feature-grid file, resolved relative to the dataset file.
//! The training label is `answer` when present, otherwise the most common
//! entry of `answers` (ties go to the alphabetically first).

use std::collections::BTreeMap;
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{tokenize, Context, Example};
use crate::error::{Error, Result};
use crate::visual::load_feature_grid;

#[derive(Debug, Serialize, Deserialize)]
pub struct VqaRecord {
    pub grid: PathBuf,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    pub answers: Vec<String>,
}

/// Most frequent entry, ties broken alphabetically.
pub fn majority_answer(answers: &[String]) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in answers {
        *counts.entry(a.as_str()).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    counts
        .into_iter()
        .find(|&(_, c)| c == best)
        .map(|(a, _)| a.to_string())
}

pub fn parse_vqa<R: BufRead>(reader: R, base_dir: &Path) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: VqaRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let human: Vec<String> = rec.answers.iter().map(|a| a.trim().to_lowercase()).collect();
        let answer = match rec.answer {
            Some(a) => a.trim().to_lowercase(),
            None => majority_answer(&human).ok_or_else(|| Error::Parse {
                line: lineno,
                message: "record has neither answer nor answers".into(),
            })?,
        };
        let question = tokenize(&rec.question);
        if question.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                message: "empty question".into(),
            });
        }
        let path = base_dir.join(&rec.grid);
        let grid = load_feature_grid(&path)?;
        out.push(Example {
            context: Context::Grid {
                path: rec.grid,
                grid: Arc::new(grid),
            },
            question,
            answer,
            supporting: Vec::new(),
            human_answers: human,
        });
    }
    Ok(out)
}

pub fn read_vqa_file(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_vqa(text.as_bytes(), base)
}
