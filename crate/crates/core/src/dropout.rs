//! Inverted dropout.

use rand::{Rng, RngCore};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};

/// Keeps each entry with probability `keep_p` and scales kept entries by
/// `1 / keep_p`. The identity when `training` is false or `keep_p == 1`.
pub fn apply_dropout<R: Rng + ?Sized>(
    g: &mut Graph<'_>,
    x: Var,
    keep_p: f64,
    rng: &mut R,
    training: bool,
) -> Result<Var> {
    if !(keep_p > 0.0 && keep_p <= 1.0) {
        return Err(Error::Config(format!("dropout keep probability {keep_p} not in (0, 1]")));
    }
    if !training || keep_p == 1.0 {
        return Ok(x);
    }
    let scale = 1.0 / keep_p;
    let mask: Vec<f64> = (0..g.value(x).len())
        .map(|_| if rng.gen::<f64>() < keep_p { scale } else { 0.0 })
        .collect();
    let shape = g.shape(x).to_vec();
    let m = g.constant(crate::Tensor::new(shape, mask)?);
    g.mul(x, m)
}

/// Dropout setting threaded through a forward pass.
pub struct Dropout<'r> {
    active: Option<(f64, &'r mut dyn RngCore)>,
}

impl<'r> Dropout<'r> {
    /// Evaluation mode.
    pub fn off() -> Self {
        Dropout { active: None }
    }

    pub fn train(keep_p: f64, rng: &'r mut dyn RngCore) -> Self {
        Dropout {
            active: Some((keep_p, rng)),
        }
    }

    pub fn is_training(&self) -> bool {
        self.active.is_some()
    }

    pub fn apply(&mut self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        match &mut self.active {
            None => Ok(x),
            Some((keep_p, rng)) => apply_dropout(g, x, *keep_p, rng, true),
        }
    }
}
