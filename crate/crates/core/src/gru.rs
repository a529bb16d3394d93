//! Gated recurrent units.
//!
//! ```text
//! u = σ(W_u x + U_u h + b_u)
//! r = σ(W_r x + U_r h + b_r)
//! h̃ = tanh(W_c x + r ∘ (U_c h) + b_c)
//! h' = u ∘ h̃ + (1 − u) ∘ h
//! ```

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::params::{init_weights, Init, ParamId, ParamKind, ParamSet};

/// One `W x + U h + b` block.
#[derive(Clone, Debug)]
pub struct Gate {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
}

impl Gate {
    fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        tag: &str,
        n_in: usize,
        n_hidden: usize,
        rng: &mut R,
    ) -> Self {
        let w = init_weights(Init::XavierUniform, &[n_hidden, n_in], rng);
        let u = init_weights(Init::XavierUniform, &[n_hidden, n_hidden], rng);
        Gate {
            w: params.add(format!("{prefix}.w_{tag}"), ParamKind::Weight, w),
            u: params.add(format!("{prefix}.u_{tag}"), ParamKind::Weight, u),
            b: params.add(
                format!("{prefix}.b_{tag}"),
                ParamKind::Bias,
                init_weights(Init::Zeros, &[n_hidden], rng),
            ),
        }
    }

    /// `W x + U h + b`
    fn pre_activation(&self, g: &mut Graph<'_>, x: Var, h: Var) -> Result<Var> {
        let w = g.param(self.w);
        let u = g.param(self.u);
        let b = g.param(self.b);
        let wx = g.matvec(w, x)?;
        let uh = g.matvec(u, h)?;
        let s = g.add(wx, uh)?;
        g.add(s, b)
    }
}

/// Reset gate and candidate state, shared by the standard and the
/// attention-based GRU.
#[derive(Clone, Debug)]
struct Candidate {
    reset: Gate,
    candidate: Gate,
}

impl Candidate {
    fn compute(&self, g: &mut Graph<'_>, x: Var, h: Var) -> Result<Var> {
        let r_pre = self.reset.pre_activation(g, x, h)?;
        let r = g.sigmoid(r_pre);
        let w = g.param(self.candidate.w);
        let u = g.param(self.candidate.u);
        let b = g.param(self.candidate.b);
        let wx = g.matvec(w, x)?;
        let uh = g.matvec(u, h)?;
        let gated = g.mul(r, uh)?;
        let s = g.add(wx, gated)?;
        let s = g.add(s, b)?;
        Ok(g.tanh(s))
    }
}

/// Convex blend `gate ∘ new + (1 − gate) ∘ old`, elementwise.
fn blend(g: &mut Graph<'_>, gate: Var, new: Var, old: Var) -> Result<Var> {
    let keep = g.one_minus(gate);
    let a = g.mul(gate, new)?;
    let b = g.mul(keep, old)?;
    g.add(a, b)
}

#[derive(Clone, Debug)]
pub struct GruCell {
    pub n_in: usize,
    pub n_hidden: usize,
    pub update: Gate,
    inner: Candidate,
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        n_in: usize,
        n_hidden: usize,
        rng: &mut R,
    ) -> Self {
        GruCell {
            n_in,
            n_hidden,
            update: Gate::new(params, prefix, "u", n_in, n_hidden, rng),
            inner: Candidate {
                reset: Gate::new(params, prefix, "r", n_in, n_hidden, rng),
                candidate: Gate::new(params, prefix, "c", n_in, n_hidden, rng),
            },
        }
    }

    pub fn reset_gate(&self) -> &Gate {
        &self.inner.reset
    }

    pub fn candidate_gate(&self) -> &Gate {
        &self.inner.candidate
    }

    fn check(&self, g: &Graph<'_>, x: Var, h: Var) -> Result<()> {
        if g.shape(x) != [self.n_in] {
            return Err(Error::dim("gru_step", &[self.n_in], g.shape(x)));
        }
        if g.shape(h) != [self.n_hidden] {
            return Err(Error::dim("gru_step", &[self.n_hidden], g.shape(h)));
        }
        Ok(())
    }

    pub fn step(&self, g: &mut Graph<'_>, x: Var, h_prev: Var) -> Result<Var> {
        self.check(g, x, h_prev)?;
        let u_pre = self.update.pre_activation(g, x, h_prev)?;
        let u = g.sigmoid(u_pre);
        let cand = self.inner.compute(g, x, h_prev)?;
        blend(g, u, cand, h_prev)
    }

    /// Runs the cell over `xs` from a zero state, returning every hidden state.
    pub fn run(&self, g: &mut Graph<'_>, xs: &[Var]) -> Result<Vec<Var>> {
        let mut h = g.zeros(self.n_hidden);
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            h = self.step(g, x, h)?;
            out.push(h);
        }
        Ok(out)
    }
}

/// GRU whose update gate is replaced by an externally supplied scalar
/// attention gate. The reset gate is kept.
#[derive(Clone, Debug)]
pub struct AttnGruCell {
    pub n_hidden: usize,
    inner: Candidate,
}

impl AttnGruCell {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        n_hidden: usize,
        rng: &mut R,
    ) -> Self {
        AttnGruCell {
            n_hidden,
            inner: Candidate {
                reset: Gate::new(params, prefix, "r", n_hidden, n_hidden, rng),
                candidate: Gate::new(params, prefix, "c", n_hidden, n_hidden, rng),
            },
        }
    }

    /// Candidate state `h̃` for input `x` and previous state `h`.
    pub fn candidate(&self, g: &mut Graph<'_>, x: Var, h: Var) -> Result<Var> {
        self.inner.compute(g, x, h)
    }

    /// `h = gate · h̃ + (1 − gate) · h_prev`, with `gate` a one-element node.
    pub fn step(&self, g: &mut Graph<'_>, x: Var, h_prev: Var, gate: Var) -> Result<Var> {
        let cand = self.inner.compute(g, x, h_prev)?;
        let keep = g.one_minus(gate);
        let a = g.scale_by(cand, gate)?;
        let b = g.scale_by(h_prev, keep)?;
        g.add(a, b)
    }
}
