//! Bidirectional GRU input fusion.

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::gru::GruCell;
use crate::params::ParamSet;

/// Ordered facts on a graph, ready for the episodic memory. Text and image
/// facts share this type.
#[derive(Clone, Debug)]
pub struct FactSequence {
    pub facts: Vec<Var>,
}

impl FactSequence {
    pub fn new(facts: Vec<Var>) -> Result<Self> {
        if facts.is_empty() {
            return Err(Error::Input("a fact sequence needs at least one fact".into()));
        }
        Ok(FactSequence { facts })
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct FusionLayer {
    pub fwd: GruCell,
    pub bwd: GruCell,
}

impl FusionLayer {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        n_in: usize,
        n_hidden: usize,
        rng: &mut R,
    ) -> Self {
        FusionLayer {
            fwd: GruCell::new(params, &format!("{prefix}.fwd"), n_in, n_hidden, rng),
            bwd: GruCell::new(params, &format!("{prefix}.bwd"), n_in, n_hidden, rng),
        }
    }

    /// `↔f_i = →f_i + ←f_i`, both directions starting from zero.
    pub fn fuse(&self, g: &mut Graph<'_>, inputs: &[Var]) -> Result<FactSequence> {
        if inputs.is_empty() {
            return Err(Error::Input("fusion needs at least one input".into()));
        }
        let forward = self.fwd.run(g, inputs)?;
        let reversed: Vec<Var> = inputs.iter().rev().copied().collect();
        let mut backward = self.bwd.run(g, &reversed)?;
        backward.reverse();
        let facts = forward
            .into_iter()
            .zip(backward)
            .map(|(f, b)| g.add(f, b))
            .collect::<Result<Vec<_>>>()?;
        FactSequence::new(facts)
    }
}
