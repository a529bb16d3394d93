//! Exact-match and consensus scoring.

use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::error::{Error, Result};
use crate::model::Model;

/// Prediction for one example alongside its gold label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub predicted: String,
    pub expected: String,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub predictions: Vec<Scored>,
}

impl Evaluation {
    pub fn error_rate(&self) -> f64 {
        1.0 - self.accuracy
    }
}

/// Exact-match accuracy. Gold answers missing from the model's answer
/// vocabulary count as wrong.
pub fn evaluate(model: &Model, examples: &[Example]) -> Result<Evaluation> {
    if examples.is_empty() {
        return Err(Error::Input("cannot evaluate on an empty dataset".into()));
    }
    let mut predictions = Vec::with_capacity(examples.len());
    for ex in examples {
        let encoded = model.encode(ex)?;
        let p = model.predict(&encoded)?;
        let predicted = model.label(p.label).to_string();
        predictions.push(Scored {
            correct: predicted == ex.answer,
            predicted,
            expected: ex.answer.clone(),
        });
    }
    Ok(Evaluation {
        accuracy: accuracy(&predictions),
        predictions,
    })
}

fn accuracy(predictions: &[Scored]) -> f64 {
    predictions.iter().filter(|p| p.correct).count() as f64 / predictions.len() as f64
}

/// `min(#humans who gave predicted / 3, 1)`.
pub fn vqa_consensus_accuracy(predicted: &str, human_answers: &[String]) -> Result<f64> {
    if human_answers.is_empty() {
        return Err(Error::Input("consensus score needs at least one human answer".into()));
    }
    let count = human_answers.iter().filter(|a| *a == predicted).count();
    Ok((count as f64 / 3.0).min(1.0))
}

/// Mean consensus score of the model's predictions.
pub fn consensus_accuracy(model: &Model, examples: &[Example]) -> Result<f64> {
    let eval = evaluate(model, examples)?;
    let mut total = 0.0;
    for (ex, p) in examples.iter().zip(&eval.predictions) {
        total += vqa_consensus_accuracy(&p.predicted, &ex.human_answers)?;
    }
    Ok(total / examples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tokenize;
    use crate::model::Variant;
    use crate::vocab::build_vocab;

    fn humans(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn consensus_formula() {
        assert_eq!(vqa_consensus_accuracy("cat", &humans(&["cat"; 5])).unwrap(), 1.0);
        assert_eq!(vqa_consensus_accuracy("cat", &humans(&["cat", "dog"])).unwrap(), 1.0 / 3.0);
        assert_eq!(vqa_consensus_accuracy("cat", &humans(&["dog", "dog"])).unwrap(), 0.0);
        assert!(vqa_consensus_accuracy("cat", &[]).is_err());
    }

    fn data() -> Vec<Example> {
        ["kitchen", "garden", "office"]
            .iter()
            .map(|p| Example::text(vec![tokenize(&format!("Mary went to the {p}."))], tokenize("Where is Mary?"), *p))
            .collect()
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let d = data();
        let (v, a) = build_vocab(&d);
        let m = Model::new(Variant::Dmn2.config(4, 1, 70), v, a, 0).unwrap();
        assert!(matches!(evaluate(&m, &[]), Err(Error::Input(_))));
    }

    #[test]
    fn model_with_answer_baked_into_bias_is_perfect_on_that_answer() {
        let d = data();
        let (v, a) = build_vocab(&d);
        let mut m = Model::new(Variant::Dmn2.config(4, 1, 70), v, a, 0).unwrap();
        let k = m.answers.encode("garden").unwrap();
        let b = m.head().b;
        m.params.value_mut(b).data_mut()[k] = 1e6;
        let garden: Vec<_> = d.iter().filter(|e| e.answer == "garden").cloned().collect();
        let e = evaluate(&m, &garden).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert_eq!(e.error_rate(), 0.0);
        let all = evaluate(&m, &d).unwrap();
        assert!((all.accuracy - 1.0 / 3.0).abs() < 1e-15);
    }
}
