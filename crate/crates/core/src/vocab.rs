//! Token and answer vocabularies.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{Context, Example};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Input-token vocabulary. Index 0 is PAD and index 1 is UNK; known tokens
/// follow in sorted order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sorted: BTreeSet<String> = tokens
            .into_iter()
            .map(Into::into)
            .filter(|t| t != PAD_TOKEN && t != UNK_TOKEN)
            .collect();
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(sorted);
        Self::from(all)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index of `token`, or [`UNK`] if unseen.
    pub fn encode(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn encode_all<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.encode(t.as_ref())).collect()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

/// Answer labels in sorted order. No reserved entries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct AnswerVocab {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl AnswerVocab {
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sorted: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        Self::from(sorted.into_iter().collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn encode(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

impl From<Vec<String>> for AnswerVocab {
    fn from(labels: Vec<String>) -> Self {
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        AnswerVocab { labels, index }
    }
}

impl From<AnswerVocab> for Vec<String> {
    fn from(v: AnswerVocab) -> Self {
        v.labels
    }
}

/// Input and answer vocabularies over every token in `examples`.
pub fn build_vocab<'a, I>(examples: I) -> (Vocabulary, AnswerVocab)
where
    I: IntoIterator<Item = &'a Example>,
{
    let mut tokens = BTreeSet::new();
    let mut answers = BTreeSet::new();
    for ex in examples {
        if let Context::Sentences(sentences) = &ex.context {
            for s in sentences {
                tokens.extend(s.iter().cloned());
            }
        }
        tokens.extend(ex.question.iter().cloned());
        answers.insert(ex.answer.clone());
    }
    (
        Vocabulary::from_tokens(tokens),
        AnswerVocab::from_labels(answers),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(story: &[&str], q: &str, a: &str) -> Example {
        Example::text(
            story
                .iter()
                .map(|s| s.split(' ').map(String::from).collect())
                .collect(),
            q.split(' ').map(String::from).collect(),
            a,
        )
    }

    #[test]
    fn reserved_indices() {
        let v = Vocabulary::from_tokens(["b", "a"]);
        assert_eq!(v.token(PAD), Some("<pad>"));
        assert_eq!(v.token(UNK), Some("<unk>"));
        assert_eq!(v.encode("a"), 2);
        assert_eq!(v.encode("b"), 3);
        assert_eq!(v.encode("zebra"), UNK);
    }

    #[test]
    fn union_over_disjoint_stories() {
        let a = ex(&["mary went home"], "where is mary", "home");
        let b = ex(&["john got milk"], "what has john", "milk");
        let (v, ans) = build_vocab([&a, &b]);
        for t in ["mary", "went", "home", "john", "got", "milk", "where", "is", "what", "has"] {
            assert!(v.contains(t), "{t}");
        }
        assert_eq!(ans.labels(), &["home".to_string(), "milk".to_string()]);
    }

    #[test]
    fn building_is_idempotent() {
        let a = ex(&["mary went home"], "where is mary", "home");
        let once = build_vocab([&a]);
        let twice = build_vocab([&a, &a]);
        assert_eq!(once, twice);
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocabulary::from_tokens(["x", "y"]);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
    }
}
