//! Mini-batch training with early stopping on validation loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{split_validation, Example};
use crate::dropout::Dropout;
use crate::error::{Error, Result};
use crate::model::{EncodedExample, Model, ModelConfig};
use crate::optim::Adam;
use crate::params::ParamGrads;
use crate::vocab::build_vocab;

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub l2_strength: f64,
    pub dropout_keep_p: f64,
    /// Hidden size `d`.
    pub hidden: usize,
    /// Episodic passes `T`.
    pub passes: usize,
    pub seed: u64,
    pub sentence_limit: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            batch_size: 128,
            max_epochs: 256,
            patience: 20,
            l2_strength: 1e-5,
            dropout_keep_p: 0.9,
            hidden: 80,
            passes: 3,
            seed: 0,
            sentence_limit: 70,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.dropout_keep_p > 0.0 && self.dropout_keep_p <= 1.0) {
            return bad("dropout keep probability must be in (0, 1]");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch size and epoch budget must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.l2_strength >= 0.0 && self.l2_strength.is_finite()) {
            return bad("l2 strength must be non-negative");
        }
        if self.hidden == 0 || self.passes == 0 || self.sentence_limit == 0 {
            return bad("hidden size, passes and sentence limit must be positive");
        }
        Ok(())
    }
}

/// One line of the training report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observation {
    Improved,
    Continue,
    Stop,
}

/// Stops once `patience` epochs have passed without a new lowest loss.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            since_best: 0,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn observe(&mut self, loss: f64) -> Observation {
        if loss < self.best {
            self.best = loss;
            self.since_best = 0;
            Observation::Improved
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience {
                Observation::Stop
            } else {
                Observation::Continue
            }
        }
    }
}

/// Mean loss and accuracy without dropout.
pub fn loss_and_accuracy(model: &Model, examples: &[EncodedExample]) -> Result<(f64, f64)> {
    if examples.is_empty() {
        return Err(Error::Input("cannot score an empty dataset".into()));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for ex in examples {
        let target = ex
            .answer
            .ok_or_else(|| Error::Input("answer is not in the answer vocabulary".into()))?;
        let mut g = crate::Graph::with_params(&model.params);
        let fwd = model.forward(&mut g, ex, &mut Dropout::off())?;
        let l = g.cross_entropy(fwd.logits, target)?;
        loss += g.scalar(l);
        if crate::model::argmax(g.value(fwd.logits)) == target {
            correct += 1;
        }
    }
    let n = examples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

fn in_batch(epoch: usize, batch: usize, err: Error) -> Error {
    match err {
        Error::Training(msg) => Error::Training(format!("epoch {epoch}, batch {batch}: {msg}")),
        other => other,
    }
}

/// Trains `model` in place on `examples`, holding out the last 10% for
/// validation, and leaves it holding the parameters of the epoch with the
/// lowest validation loss. With fewer than ten examples there is no
/// held-out split and the training set doubles as validation set.
pub fn train(model: &mut Model, examples: &[Example], config: &TrainConfig) -> Result<TrainReport> {
    train_with(model, examples, config, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with<F>(model: &mut Model, examples: &[Example], config: &TrainConfig, mut on_epoch: F) -> Result<TrainReport>
where
    F: FnMut(&EpochRecord),
{
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    let (train_part, val_part) = split_validation(examples);
    let val_part = if val_part.is_empty() { train_part } else { val_part };
    let train_set = model.encode_all(train_part)?;
    let val_set = model.encode_all(val_part)?;
    if let Some(i) = train_set.iter().chain(&val_set).position(|e| e.answer.is_none()) {
        return Err(Error::Input(format!(
            "training example {} has an answer outside the answer vocabulary",
            i + 1
        )));
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(DROPOUT_STREAM);
    let mut adam = Adam::new(&model.params, config.lr);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best_params = model.params.clone();
    let mut report = TrainReport {
        seed: config.seed,
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopped_early: false,
    };
    let mut stopping = EarlyStopping::new(config.patience);
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let batch_no = b + 1;
            let mut grads = ParamGrads::zeros_like(&model.params);
            for &i in batch {
                let mut dropout = Dropout::train(config.dropout_keep_p, &mut dropout_rng);
                let (loss, g) = model.loss_and_grads(&train_set[i], &mut dropout)?;
                if !loss.is_finite() {
                    return Err(Error::Training(format!("epoch {epoch}, batch {batch_no}: loss is {loss}")));
                }
                total += loss;
                grads.accumulate(&g);
            }
            grads.scale(1.0 / batch.len() as f64);
            grads.add_l2(&model.params, config.l2_strength);
            adam.step(&mut model.params, &grads)
                .map_err(|e| in_batch(epoch, batch_no, e))?;
        }
        let (val_loss, val_acc) = loss_and_accuracy(model, &val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::Training(format!("epoch {epoch}: validation loss is {val_loss}")));
        }
        let record = EpochRecord {
            epoch,
            train_loss: total / train_set.len() as f64,
            val_loss,
            val_acc,
        };
        on_epoch(&record);
        report.epochs.push(record);
        match stopping.observe(val_loss) {
            Observation::Improved => {
                report.best_val_loss = val_loss;
                report.best_epoch = epoch;
                best_params.copy_from(&model.params)?;
            }
            Observation::Continue => {}
            Observation::Stop => {
                report.stopped_early = true;
                break;
            }
        }
    }
    model.params.copy_from(&best_params)?;
    Ok(report)
}

/// Builds vocabularies from `examples`, then trains `restarts` models from
/// seeds `config.seed, config.seed + 1, ...` and keeps the one with the
/// lowest validation loss.
pub fn fit(
    model_config: ModelConfig,
    examples: &[Example],
    config: &TrainConfig,
    restarts: usize,
) -> Result<(Model, Vec<TrainReport>)> {
    fit_with(model_config, examples, config, restarts, |_, _| {})
}

/// [`fit`] with a callback receiving the restart index and each epoch record.
pub fn fit_with<F>(
    model_config: ModelConfig,
    examples: &[Example],
    config: &TrainConfig,
    restarts: usize,
    mut on_epoch: F,
) -> Result<(Model, Vec<TrainReport>)>
where
    F: FnMut(usize, &EpochRecord),
{
    if restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    let (vocab, answers) = build_vocab(examples);
    let mut best: Option<(Model, f64)> = None;
    let mut reports = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let run = TrainConfig {
            seed: config.seed.wrapping_add(r as u64),
            ..config.clone()
        };
        let mut model = Model::new(model_config, vocab.clone(), answers.clone(), run.seed)?;
        let report = train_with(&mut model, examples, &run, |rec| on_epoch(r, rec))?;
        if best.as_ref().map_or(true, |(_, loss)| report.best_val_loss < *loss) {
            best = Some((model, report.best_val_loss));
        }
        reports.push(report);
    }
    let (model, _) = best.expect("at least one restart");
    Ok((model, reports))
}
