//! Whole-model gradient checks on a small fixed example.

use std::fmt;
use std::str::FromStr;
use std::path::PathBuf;
use std::sync::Arc;

use crate::autodiff::{grad_check, GradCheckReport, Graph, OpKind};
use crate::data::{tokenize, Context, Example};
use crate::dropout::Dropout;
use crate::episodic::EpisodicConfig;
use crate::error::{Error, Result};
use crate::model::{InputKind, Model, ModelConfig, Readout};
use crate::visual::FeatureGrid;
use crate::vocab::build_vocab;

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;

/// Input module exercised by a check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CheckInput {
    /// Positional-encoding sentences with input fusion.
    Fusion,
    WordGru,
    /// A 2×2 feature grid, projected and fused.
    Visual,
}

impl CheckInput {
    pub const ALL: [CheckInput; 3] = [CheckInput::Fusion, CheckInput::WordGru, CheckInput::Visual];

    pub fn name(self) -> &'static str {
        match self {
            CheckInput::Fusion => "fusion",
            CheckInput::WordGru => "word_gru",
            CheckInput::Visual => "visual",
        }
    }
}

impl fmt::Display for CheckInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckInput::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown input module {s:?}; expected fusion, word_gru or visual")))
    }
}

const GRID_CHANNELS: usize = 3;

/// The example a check runs on: three sentences for text input, four
/// patches for image input.
pub fn check_example(input: CheckInput) -> Example {
    match input {
        CheckInput::Fusion | CheckInput::WordGru => {
            let mut ex = Example::text(
                vec![
                    tokenize("Mary moved to the bathroom."),
                    tokenize("John picked up the football."),
                    tokenize("Mary went to the garden."),
                ],
                tokenize("Where is Mary?"),
                "garden",
            );
            ex.supporting = vec![3];
            ex
        }
        CheckInput::Visual => {
            let values = (0..4 * GRID_CHANNELS)
                .map(|i| ((i as f32) * 0.37).sin())
                .collect();
            Example {
                context: Context::Grid {
                    path: PathBuf::from("check.fgrd"),
                    grid: Arc::new(FeatureGrid::new(2, 2, GRID_CHANNELS, values).expect("valid grid")),
                },
                question: tokenize("what is on the left?"),
                answer: "cat".into(),
                supporting: Vec::new(),
                human_answers: vec!["cat".into(), "cat".into(), "dog".into()],
            }
        }
    }
}

/// Compares backpropagated and central-difference gradients of the loss on
/// [`check_example`] for every parameter entry, with dropout off. `fault`
/// corrupts the backward rule of one operation kind.
pub fn check_model(
    input: CheckInput,
    episodic: EpisodicConfig,
    eps: f64,
    tol: f64,
    fault: Option<OpKind>,
    seed: u64,
) -> Result<GradCheckReport> {
    let example = check_example(input);
    let (vocab, mut answers) = build_vocab([&example]);
    let mut labels = answers.labels().to_vec();
    labels.extend(["bathroom", "kitchen"].map(String::from));
    answers = crate::vocab::AnswerVocab::from_labels(labels);
    let config = ModelConfig {
        input: match input {
            CheckInput::Fusion => InputKind::Fusion,
            CheckInput::WordGru => InputKind::WordGru,
            CheckInput::Visual => InputKind::Visual {
                channels: GRID_CHANNELS,
            },
        },
        hidden: 4,
        attn_hidden: 3,
        episodic,
        readout: Readout::Memory,
        sentence_limit: 70,
    };
    let mut model = Model::new(config, vocab, answers, seed)?;
    let encoded = model.encode(&example)?;
    let target = encoded.answer.expect("label in vocabulary");
    let skeleton = model.clone();
    grad_check(&mut model.params, eps, tol, |params| {
        let mut g = Graph::with_params(params);
        if let Some(kind) = fault {
            g.inject_fault(kind);
        }
        let fwd = skeleton.forward(&mut g, &encoded, &mut Dropout::off())?;
        let loss = g.cross_entropy(fwd.logits, target)?;
        let grads = g.backward(loss)?;
        Ok((g.scalar(loss), g.param_grads(&grads)))
    })
}
