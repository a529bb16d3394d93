//! Named parameter storage and initialisation.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle into a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Whether a parameter takes part in the l2 penalty.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Embedding,
}

impl ParamKind {
    pub fn is_bias(self) -> bool {
        matches!(self, ParamKind::Bias)
    }
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub value: Tensor,
}

/// Ordered collection of named tensors. Insertion order is stable and is the
/// order used for checkpoints, gradients and optimizer state.
#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, kind: ParamKind, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name {name}"
        );
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Param { name, kind, value });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Total number of scalar entries.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Sum of squares over every non-bias parameter.
    pub fn l2_norm_sq(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| !p.kind.is_bias())
            .map(|p| p.value.sum_squares())
            .sum()
    }

    pub fn zero_all(&mut self) {
        for p in &mut self.params {
            p.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Replace every value with the one of the same name in `other`.
    pub fn copy_from(&mut self, other: &ParamSet) -> Result<()> {
        for p in &mut self.params {
            let src = other
                .id(&p.name)
                .ok_or_else(|| Error::Config(format!("missing parameter {}", p.name)))?;
            let src = other.value(src);
            if src.shape() != p.value.shape() {
                return Err(Error::dim("ParamSet::copy_from", p.value.shape(), src.shape()));
            }
            p.value = src.clone();
        }
        Ok(())
    }
}

/// Gradients aligned with a [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    grads: Vec<Tensor>,
}

impl ParamGrads {
    pub fn zeros_like(params: &ParamSet) -> Self {
        ParamGrads {
            grads: params
                .params
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect(),
        }
    }

    pub(crate) fn from_vec(grads: Vec<Tensor>) -> Self {
        ParamGrads { grads }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// `self += other`, elementwise.
    pub fn accumulate(&mut self, other: &ParamGrads) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            for x in g.data_mut() {
                *x *= factor;
            }
        }
    }

    /// Adds the gradient of `strength * sum(w^2)` over non-bias parameters.
    pub fn add_l2(&mut self, params: &ParamSet, strength: f64) {
        for (id, p) in params.iter() {
            if p.kind.is_bias() {
                continue;
            }
            for (g, w) in self.grads[id.0].data_mut().iter_mut().zip(p.value.data()) {
                *g += 2.0 * strength * w;
            }
        }
    }
}

/// Weight initialisation schemes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    XavierUniform,
    /// Uniform in `[-limit, limit]`.
    Uniform(f64),
    Zeros,
}

/// Initial value for a parameter of `shape`. For matrices `fan_out` is the
/// row count and `fan_in` the column count; vectors are treated as `n × 1`.
pub fn init_weights<R: Rng + ?Sized>(init: Init, shape: &[usize], rng: &mut R) -> Tensor {
    assert!(shape.iter().all(|&d| d > 0), "dimensions must be positive");
    let mut t = Tensor::zeros(shape);
    let limit = match init {
        Init::Zeros => return t,
        Init::Uniform(limit) => limit,
        Init::XavierUniform => {
            let (fan_out, fan_in) = match shape {
                [n] => (*n, 1),
                [rows, cols] => (*rows, *cols),
                _ => panic!("xavier init needs a vector or matrix, got {shape:?}"),
            };
            (6.0 / (fan_in + fan_out) as f64).sqrt()
        }
    };
    for v in t.data_mut() {
        *v = rng.gen_range(-limit..=limit);
    }
    t
}

/// Range of the word-embedding initialisation.
pub const EMBEDDING_INIT_RANGE: f64 = 1.732_050_807_568_877_2; // sqrt(3)
