//! The bAbI text format.
//!
//! ```text
//! 1 Mary moved to the bathroom.
//! 2 John went to the hallway.
//! 3 Where is Mary?<TAB>bathroom<TAB>1
//! ```
//!
//! Each line starts with an ID; an ID of 1 starts a new story. Question lines
//! carry the answer and the IDs of the supporting sentences after tabs. Every
//! question becomes one [`Example`] whose context is every story sentence
//! before it.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use super::{tokenize, Context, Example, Sentence};
use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_babi<R: BufRead>(reader: R) -> Result<Vec<Example>> {
    let mut examples = Vec::new();
    let mut story: Vec<Sentence> = Vec::new();
    // line ID -> 1-based position in `story`
    let mut positions: HashMap<usize, usize> = HashMap::new();
    let mut last_id = 0usize;

    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let (id, rest) = line
            .trim_start()
            .split_once(' ')
            .ok_or_else(|| parse_err(lineno, "expected \"ID text\""))?;
        let id: usize = id
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad line ID {id:?}")))?;
        if id == 1 {
            story.clear();
            positions.clear();
        } else if id <= last_id {
            return Err(parse_err(
                lineno,
                format!("non-monotonic ID {id} after {last_id} within a story"),
            ));
        } else if last_id == 0 {
            return Err(parse_err(lineno, format!("story starts with ID {id}, expected 1")));
        }
        last_id = id;

        if !rest.contains('\t') {
            let tokens = tokenize(rest);
            if tokens.is_empty() {
                return Err(parse_err(lineno, "empty sentence"));
            }
            story.push(tokens);
            positions.insert(id, story.len());
            continue;
        }

        let mut fields = rest.split('\t');
        let question = tokenize(fields.next().unwrap_or_default());
        let answer = fields.next().map(str::trim).unwrap_or_default().to_lowercase();
        if question.is_empty() {
            return Err(parse_err(lineno, "empty question"));
        }
        if answer.is_empty() {
            return Err(parse_err(lineno, "question line is missing its answer field"));
        }
        let supporting = fields
            .next()
            .unwrap_or_default()
            .split_whitespace()
            .map(|s| {
                let sid: usize = s
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad supporting ID {s:?}")))?;
                positions
                    .get(&sid)
                    .copied()
                    .ok_or_else(|| parse_err(lineno, format!("supporting ID {sid} is not a prior sentence")))
            })
            .collect::<Result<Vec<_>>>()?;
        if story.is_empty() {
            return Err(parse_err(lineno, "question has no preceding story sentences"));
        }
        examples.push(Example {
            context: Context::Sentences(story.clone()),
            question,
            answer,
            supporting,
            human_answers: Vec::new(),
        });
    }
    Ok(examples)
}

pub fn read_babi_file(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_babi(text.as_bytes())
}

/// Writes each example as its own story, so that parsing the output gives
/// back the same examples.
pub fn serialize_babi(examples: &[Example]) -> Result<String> {
    let mut out = String::new();
    for ex in examples {
        let sentences = ex
            .sentences()
            .ok_or_else(|| Error::Input("only text examples can be written as bAbI".into()))?;
        for (i, s) in sentences.iter().enumerate() {
            let _ = writeln!(out, "{} {}.", i + 1, s.join(" "));
        }
        let support: Vec<String> = ex.supporting.iter().map(usize::to_string).collect();
        let _ = writeln!(
            out,
            "{} {}?\t{}\t{}",
            sentences.len() + 1,
            ex.question.join(" "),
            ex.answer,
            support.join(" ")
        );
    }
    Ok(out)
}
