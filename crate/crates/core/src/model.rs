//! The full question-answering network: question reader, input module,
//! episodic memory and answer head, plus the preset variants.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::data::{Context, Example};
use crate::dropout::Dropout;
use crate::episodic::{AttentionKind, EpisodeTrace, EpisodicConfig, EpisodicMemory, Tying, UpdateKind};
use crate::error::{Error, Result};
use crate::fusion::{FactSequence, FusionLayer};
use crate::gru::GruCell;
use crate::params::{init_weights, Init, ParamGrads, ParamId, ParamKind, ParamSet};
use crate::text::{encode_question, encode_sentence_pe, encode_story_word_gru, Embedding};
use crate::visual::{visual_facts, FeatureGrid, VisualProjection};
use crate::vocab::{AnswerVocab, Vocabulary};

/// How the context is turned into facts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// One GRU over every word; a fact is the state at each sentence end.
    WordGru,
    /// Positional-encoding sentences followed by the bidirectional fusion GRU.
    Fusion,
    /// Projected feature-grid patches in snake order, then the fusion GRU.
    Visual { channels: usize },
}

/// What the answer head reads besides the question.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// `[q ; m^T]`
    #[default]
    Memory,
    /// `[q ; q]`, ignoring the episodic memory entirely.
    QuestionOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input: InputKind,
    /// Embedding and hidden size `d`.
    pub hidden: usize,
    /// Hidden size of the attention scorer.
    pub attn_hidden: usize,
    pub episodic: EpisodicConfig,
    #[serde(default)]
    pub readout: Readout,
    /// Only the last this-many sentences of a story are read.
    pub sentence_limit: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.attn_hidden == 0 {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        if self.sentence_limit == 0 {
            return Err(Error::Config("sentence limit must be positive".into()));
        }
        if let InputKind::Visual { channels: 0 } = self.input {
            return Err(Error::Config("visual input needs at least one channel".into()));
        }
        self.episodic.validate()
    }
}

/// Named architecture presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "odmn")]
    Odmn,
    #[serde(rename = "dmn2")]
    Dmn2,
    #[serde(rename = "dmn3")]
    Dmn3,
    #[serde(rename = "dmn+")]
    DmnPlus,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Odmn, Variant::Dmn2, Variant::Dmn3, Variant::DmnPlus];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Odmn => "odmn",
            Variant::Dmn2 => "dmn2",
            Variant::Dmn3 => "dmn3",
            Variant::DmnPlus => "dmn+",
        }
    }

    /// Whether stories are read with positional encoding and input fusion.
    pub fn uses_fusion(self) -> bool {
        self != Variant::Odmn
    }

    pub fn episodic(self, passes: usize) -> EpisodicConfig {
        let (attention, update, weights) = match self {
            Variant::Odmn | Variant::Dmn2 => (AttentionKind::Soft, UpdateKind::Gru, Tying::Tied),
            Variant::Dmn3 => (AttentionKind::AttnGru, UpdateKind::Gru, Tying::Tied),
            Variant::DmnPlus => (AttentionKind::AttnGru, UpdateKind::Relu, Tying::Untied),
        };
        EpisodicConfig {
            passes,
            attention,
            update,
            weights,
        }
    }

    /// Model configuration for text input.
    pub fn config(self, hidden: usize, passes: usize, sentence_limit: usize) -> ModelConfig {
        ModelConfig {
            input: if self.uses_fusion() {
                InputKind::Fusion
            } else {
                InputKind::WordGru
            },
            hidden,
            attn_hidden: hidden,
            episodic: self.episodic(passes),
            readout: Readout::Memory,
            sentence_limit,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "odmn" => Ok(Variant::Odmn),
            "dmn2" => Ok(Variant::Dmn2),
            "dmn3" => Ok(Variant::Dmn3),
            "dmn+" | "dmnplus" | "dmn_plus" => Ok(Variant::DmnPlus),
            other => Err(Error::Config(format!(
                "unknown variant {other:?}; expected one of odmn, dmn2, dmn3, dmn+"
            ))),
        }
    }
}

/// Linear softmax layer over `[q ; m]`.
#[derive(Clone, Debug)]
pub struct AnswerHead {
    pub w: ParamId,
    pub b: ParamId,
    pub n_answers: usize,
    pub n_hidden: usize,
}

impl AnswerHead {
    pub fn new<R: Rng + ?Sized>(params: &mut ParamSet, n_hidden: usize, n_answers: usize, rng: &mut R) -> Self {
        AnswerHead {
            w: params.add(
                "answer.w",
                ParamKind::Weight,
                init_weights(Init::XavierUniform, &[n_answers, 2 * n_hidden], rng),
            ),
            b: params.add("answer.b", ParamKind::Bias, init_weights(Init::Zeros, &[n_answers], rng)),
            n_answers,
            n_hidden,
        }
    }

    /// `W_a a + b_a` for an already concatenated input `a`.
    pub fn logits(&self, g: &mut Graph<'_>, a: Var) -> Result<Var> {
        if g.shape(a) != [2 * self.n_hidden] {
            return Err(Error::dim("answer head", g.shape(a), &[2 * self.n_hidden]));
        }
        let w = g.param(self.w);
        let b = g.param(self.b);
        let wa = g.matvec(w, a)?;
        g.add(wa, b)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug)]
enum InputModule {
    WordGru(GruCell),
    Fusion(FusionLayer),
    Visual {
        projection: VisualProjection,
        fusion: FusionLayer,
    },
}

/// An example mapped to vocabulary indices.
#[derive(Clone, Debug)]
pub struct EncodedExample {
    pub context: EncodedContext,
    pub question: Vec<usize>,
    /// `None` when the gold answer is outside the answer vocabulary.
    pub answer: Option<usize>,
    pub human_answers: Vec<String>,
}

#[derive(Clone, Debug)]
pub enum EncodedContext {
    Sentences(Vec<Vec<usize>>),
    Grid(Arc<FeatureGrid>),
}

/// Graph nodes of one forward run.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub question: Var,
    pub facts: FactSequence,
    pub trace: EpisodeTrace,
    pub logits: Var,
}

#[derive(Clone, Debug)]
pub struct Prediction {
    pub label: usize,
    pub logits: Vec<f64>,
}

/// Parameters, vocabularies and module wiring of one model.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub answers: AnswerVocab,
    pub params: ParamSet,
    embedding: Embedding,
    question_gru: GruCell,
    input: InputModule,
    episodic: EpisodicMemory,
    head: AnswerHead,
}

impl Model {
    /// Builds a model with freshly initialized parameters drawn from `seed`.
    pub fn new(config: ModelConfig, vocab: Vocabulary, answers: AnswerVocab, seed: u64) -> Result<Self> {
        config.validate()?;
        if answers.is_empty() {
            return Err(Error::Config("answer vocabulary is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let d = config.hidden;
        let embedding = Embedding::new(&mut params, "embedding", vocab.len(), d, &mut rng);
        let question_gru = GruCell::new(&mut params, "question", d, d, &mut rng);
        let input = match config.input {
            InputKind::WordGru => InputModule::WordGru(GruCell::new(&mut params, "input.gru", d, d, &mut rng)),
            InputKind::Fusion => InputModule::Fusion(FusionLayer::new(&mut params, "input.fusion", d, d, &mut rng)),
            InputKind::Visual { channels } => InputModule::Visual {
                projection: VisualProjection::new(&mut params, "input.projection", channels, d, &mut rng),
                fusion: FusionLayer::new(&mut params, "input.fusion", d, d, &mut rng),
            },
        };
        let episodic = EpisodicMemory::new(&mut params, config.episodic, d, config.attn_hidden, &mut rng)?;
        let head = AnswerHead::new(&mut params, d, answers.len(), &mut rng);
        Ok(Model {
            config,
            vocab,
            answers,
            params,
            embedding,
            question_gru,
            input,
            episodic,
            head,
        })
    }

    pub fn head(&self) -> &AnswerHead {
        &self.head
    }

    pub fn encode(&self, example: &Example) -> Result<EncodedExample> {
        let context = match (&example.context, self.config.input) {
            (Context::Sentences(s), InputKind::WordGru | InputKind::Fusion) => {
                let keep = s.len().saturating_sub(self.config.sentence_limit);
                if s.is_empty() {
                    return Err(Error::Input("example has no context sentences".into()));
                }
                EncodedContext::Sentences(s[keep..].iter().map(|s| self.vocab.encode_all(s)).collect())
            }
            (Context::Grid { grid, path }, InputKind::Visual { channels }) => {
                if grid.channels != channels {
                    return Err(Error::Input(format!(
                        "{}: grid has {} channels, model expects {channels}",
                        path.display(),
                        grid.channels
                    )));
                }
                EncodedContext::Grid(Arc::clone(grid))
            }
            (Context::Sentences(_), InputKind::Visual { .. }) => {
                return Err(Error::Input("text example given to an image model".into()))
            }
            (Context::Grid { .. }, _) => return Err(Error::Input("image example given to a text model".into())),
        };
        Ok(EncodedExample {
            context,
            question: self.vocab.encode_all(&example.question),
            answer: self.answers.encode(&example.answer),
            human_answers: example.human_answers.clone(),
        })
    }

    pub fn encode_all(&self, examples: &[Example]) -> Result<Vec<EncodedExample>> {
        examples.iter().map(|e| self.encode(e)).collect()
    }

    fn facts(&self, g: &mut Graph<'_>, context: &EncodedContext, dropout: &mut Dropout<'_>) -> Result<FactSequence> {
        match (&self.input, context) {
            (InputModule::WordGru(cell), EncodedContext::Sentences(s)) => {
                let encoded = encode_story_word_gru(g, s, &self.embedding, cell)?;
                let facts = encoded
                    .into_iter()
                    .map(|f| dropout.apply(g, f))
                    .collect::<Result<Vec<_>>>()?;
                FactSequence::new(facts)
            }
            (InputModule::Fusion(fusion), EncodedContext::Sentences(s)) => {
                let mut encoded = Vec::with_capacity(s.len());
                for sentence in s {
                    let f = encode_sentence_pe(g, sentence, &self.embedding)?;
                    encoded.push(dropout.apply(g, f)?);
                }
                fusion.fuse(g, &encoded)
            }
            (InputModule::Visual { projection, fusion }, EncodedContext::Grid(grid)) => {
                visual_facts(g, grid, projection, fusion, dropout)
            }
            _ => Err(Error::Input("context kind does not match the input module".into())),
        }
    }

    /// Runs the network on one example.
    pub fn forward(&self, g: &mut Graph<'_>, example: &EncodedExample, dropout: &mut Dropout<'_>) -> Result<ForwardPass> {
        let question = encode_question(g, &example.question, &self.embedding, &self.question_gru)?;
        let facts = self.facts(g, &example.context, dropout)?;
        let trace = self.episodic.run(g, &facts, question)?;
        let read = match self.config.readout {
            Readout::Memory => trace.final_memory(),
            Readout::QuestionOnly => question,
        };
        let a = g.concat(&[question, read])?;
        let a = dropout.apply(g, a)?;
        let logits = self.head.logits(g, a)?;
        Ok(ForwardPass {
            question,
            facts,
            trace,
            logits,
        })
    }

    /// Cross-entropy loss of one example and its parameter gradients.
    pub fn loss_and_grads(&self, example: &EncodedExample, dropout: &mut Dropout<'_>) -> Result<(f64, ParamGrads)> {
        let target = example
            .answer
            .ok_or_else(|| Error::Input("answer is not in the answer vocabulary".into()))?;
        let mut g = Graph::with_params(&self.params);
        let fwd = self.forward(&mut g, example, dropout)?;
        let loss = g.cross_entropy(fwd.logits, target)?;
        let grads = g.backward(loss)?;
        Ok((g.scalar(loss), g.param_grads(&grads)))
    }

    /// Loss without dropout or gradients. `None` when the answer is unknown.
    pub fn loss(&self, example: &EncodedExample) -> Result<Option<f64>> {
        let Some(target) = example.answer else {
            return Ok(None);
        };
        let mut g = Graph::with_params(&self.params);
        let fwd = self.forward(&mut g, example, &mut Dropout::off())?;
        let loss = g.cross_entropy(fwd.logits, target)?;
        Ok(Some(g.scalar(loss)))
    }

    pub fn predict(&self, example: &EncodedExample) -> Result<Prediction> {
        let mut g = Graph::with_params(&self.params);
        let fwd = self.forward(&mut g, example, &mut Dropout::off())?;
        let logits = g.value(fwd.logits).to_vec();
        Ok(Prediction {
            label: argmax(&logits),
            logits,
        })
    }

    /// Attention gates of every pass, one vector per pass.
    pub fn gates(&self, example: &EncodedExample) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::with_params(&self.params);
        let fwd = self.forward(&mut g, example, &mut Dropout::off())?;
        Ok(fwd.trace.gates.iter().map(|&v| g.value(v).to_vec()).collect())
    }

    pub fn label(&self, index: usize) -> &str {
        self.answers.label(index).unwrap_or("<unk>")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tokenize;
    use crate::vocab::build_vocab;

    fn toy() -> Vec<Example> {
        vec![
            Example::text(
                vec![tokenize("Mary went to the kitchen."), tokenize("John went to the garden.")],
                tokenize("Where is Mary?"),
                "kitchen",
            ),
            Example::text(
                vec![tokenize("John went to the garden.")],
                tokenize("Where is John?"),
                "garden",
            ),
        ]
    }

    fn model(variant: Variant, readout: Readout) -> (Model, Vec<EncodedExample>) {
        let data = toy();
        let (vocab, answers) = build_vocab(&data);
        let config = ModelConfig {
            readout,
            ..variant.config(6, 2, 70)
        };
        let m = Model::new(config, vocab, answers, 3).unwrap();
        let enc = m.encode_all(&data).unwrap();
        (m, enc)
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.name()));
        }
        assert!("dmn4".parse::<Variant>().is_err());
    }

    #[test]
    fn presets_match_their_descriptions() {
        let plus = Variant::DmnPlus.config(80, 3, 70);
        assert_eq!(plus.input, InputKind::Fusion);
        assert_eq!(plus.episodic.attention, AttentionKind::AttnGru);
        assert_eq!(plus.episodic.update, UpdateKind::Relu);
        assert_eq!(plus.episodic.weights, Tying::Untied);
        let odmn = Variant::Odmn.config(80, 3, 70);
        assert_eq!(odmn.input, InputKind::WordGru);
        assert_eq!(odmn.episodic.attention, AttentionKind::Soft);
        assert_eq!(Variant::Dmn2.config(80, 3, 70).input, InputKind::Fusion);
        assert_eq!(Variant::Dmn3.episodic(3).update, UpdateKind::Gru);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[-1.0, -2.0]), 0);
    }

    #[test]
    fn zero_head_gives_uniform_logits_and_first_label() {
        let (mut m, enc) = model(Variant::DmnPlus, Readout::Memory);
        let (w, b) = (m.head.w, m.head.b);
        m.params.value_mut(w).data_mut().fill(0.0);
        m.params.value_mut(b).data_mut().fill(0.0);
        let p = m.predict(&enc[0]).unwrap();
        assert!(p.logits.iter().all(|&v| v == 0.0));
        assert_eq!(p.label, 0);
    }

    #[test]
    fn large_bias_decides_the_label() {
        let (mut m, enc) = model(Variant::Dmn3, Readout::Memory);
        let b = m.head.b;
        m.params.value_mut(b).data_mut()[1] = 1e3;
        for e in &enc {
            assert_eq!(m.predict(e).unwrap().label, 1);
        }
    }

    #[test]
    fn constant_bias_shift_keeps_the_label() {
        let (mut m, enc) = model(Variant::Dmn2, Readout::Memory);
        let before: Vec<_> = enc.iter().map(|e| m.predict(e).unwrap().label).collect();
        let b = m.head.b;
        m.params.value_mut(b).data_mut().iter_mut().for_each(|v| *v += 7.5);
        let after: Vec<_> = enc.iter().map(|e| m.predict(e).unwrap().label).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn head_rejects_wrong_input_size() {
        let (m, _) = model(Variant::Odmn, Readout::Memory);
        let mut g = Graph::with_params(&m.params);
        let a = g.zeros(5);
        assert!(matches!(m.head.logits(&mut g, a), Err(Error::Dimension { .. })));
    }

    #[test]
    fn question_only_readout_ignores_the_story() {
        let (m, _) = model(Variant::DmnPlus, Readout::QuestionOnly);
        let q = tokenize("Where is Mary?");
        let a = Example::text(vec![tokenize("Mary went to the kitchen.")], q.clone(), "kitchen");
        let b = Example::text(vec![tokenize("John went to the garden.")], q, "kitchen");
        let pa = m.predict(&m.encode(&a).unwrap()).unwrap();
        let pb = m.predict(&m.encode(&b).unwrap()).unwrap();
        assert_eq!(pa.logits, pb.logits);

        let (m, _) = model(Variant::DmnPlus, Readout::Memory);
        let pa = m.predict(&m.encode(&a).unwrap()).unwrap();
        let pb = m.predict(&m.encode(&b).unwrap()).unwrap();
        assert_ne!(pa.logits, pb.logits);
    }

    #[test]
    fn sentence_limit_keeps_the_last_sentences() {
        let data = toy();
        let (vocab, answers) = build_vocab(&data);
        let m = Model::new(Variant::Dmn2.config(4, 1, 1), vocab, answers, 0).unwrap();
        let enc = m.encode(&data[0]).unwrap();
        let EncodedContext::Sentences(s) = &enc.context else { panic!() };
        assert_eq!(s.len(), 1);
        assert_eq!(s[0], m.vocab.encode_all(&tokenize("John went to the garden.")));
    }

    #[test]
    fn same_seed_same_parameters() {
        let (a, _) = model(Variant::DmnPlus, Readout::Memory);
        let (b, _) = model(Variant::DmnPlus, Readout::Memory);
        for ((_, pa), (_, pb)) in a.params.iter().zip(b.params.iter()) {
            assert_eq!(pa.name, pb.name);
            assert_eq!(pa.value, pb.value);
        }
    }

    #[test]
    fn gates_are_distributions() {
        for v in Variant::ALL {
            let (m, enc) = model(v, Readout::Memory);
            let gates = m.gates(&enc[0]).unwrap();
            assert_eq!(gates.len(), 2);
            for g in gates {
                assert_eq!(g.len(), 2);
                assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
