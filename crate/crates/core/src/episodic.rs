//! Episodic memory: attention gates, context vectors and memory updates.
//!
//! Each pass `t` scores every fact against the question and the previous
//! memory,
//!
//! ```text
//! z_i = [f_i ∘ q ; f_i ∘ m ; |f_i − q| ; |f_i − m|]
//! Z_i = W2 tanh(W1 z_i + b1) + b2
//! g   = softmax(Z)
//! ```
//!
//! builds a context `c` from the gated facts (soft weighted sum, or the final
//! state of an attention-based GRU) and updates `m` with either a GRU or a
//! ReLU layer over `[m ; c ; q]`. The memory starts at `m⁰ = q`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::fusion::FactSequence;
use crate::gru::{AttnGruCell, GruCell};
use crate::params::{init_weights, Init, ParamId, ParamKind, ParamSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    Soft,
    AttnGru,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    Gru,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tying {
    Tied,
    Untied,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodicConfig {
    pub passes: usize,
    pub attention: AttentionKind,
    pub update: UpdateKind,
    pub weights: Tying,
}

impl EpisodicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.passes == 0 {
            return Err(Error::Config("episodic memory needs at least one pass".into()));
        }
        Ok(())
    }

    /// Every combination of attention kind, update kind and tying.
    pub fn all(passes: usize) -> Vec<EpisodicConfig> {
        let mut out = Vec::with_capacity(8);
        for attention in [AttentionKind::Soft, AttentionKind::AttnGru] {
            for update in [UpdateKind::Gru, UpdateKind::Relu] {
                for weights in [Tying::Tied, Tying::Untied] {
                    out.push(EpisodicConfig {
                        passes,
                        attention,
                        update,
                        weights,
                    });
                }
            }
        }
        out
    }

    /// Number of distinct per-pass parameter sets.
    fn sets(&self) -> usize {
        match self.weights {
            Tying::Tied => 1,
            Tying::Untied => self.passes,
        }
    }
}

/// Two-layer scorer mapping an interaction vector to a scalar.
#[derive(Clone, Debug)]
pub struct AttentionScorer {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl AttentionScorer {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        n_hidden: usize,
        n_attn: usize,
        rng: &mut R,
    ) -> Self {
        AttentionScorer {
            w1: params.add(
                format!("{prefix}.w1"),
                ParamKind::Weight,
                init_weights(Init::XavierUniform, &[n_attn, 4 * n_hidden], rng),
            ),
            b1: params.add(format!("{prefix}.b1"), ParamKind::Bias, init_weights(Init::Zeros, &[n_attn], rng)),
            w2: params.add(
                format!("{prefix}.w2"),
                ParamKind::Weight,
                init_weights(Init::XavierUniform, &[1, n_attn], rng),
            ),
            b2: params.add(format!("{prefix}.b2"), ParamKind::Bias, init_weights(Init::Zeros, &[1], rng)),
        }
    }

    /// Unnormalised score `Z` for one interaction vector.
    pub fn score(&self, g: &mut Graph<'_>, z: Var) -> Result<Var> {
        let w1 = g.param(self.w1);
        let b1 = g.param(self.b1);
        let w2 = g.param(self.w2);
        let b2 = g.param(self.b2);
        let h = g.matvec(w1, z)?;
        let h = g.add(h, b1)?;
        let h = g.tanh(h);
        let s = g.matvec(w2, h)?;
        g.add(s, b2)
    }
}

/// `[f ∘ q ; f ∘ m ; |f − q| ; |f − m|]`
pub fn interaction_vector(g: &mut Graph<'_>, f: Var, q: Var, m: Var) -> Result<Var> {
    if g.shape(f) != g.shape(q) || g.shape(f) != g.shape(m) {
        let (fs, qs, ms) = (g.shape(f).to_vec(), g.shape(q).to_vec(), g.shape(m).to_vec());
        let other = if fs != qs { qs } else { ms };
        return Err(Error::dim("interaction_vector", &fs, &other));
    }
    let fq = g.mul(f, q)?;
    let fm = g.mul(f, m)?;
    let dq = g.sub(f, q)?;
    let dq = g.abs(dq);
    let dm = g.sub(f, m)?;
    let dm = g.abs(dm);
    g.concat(&[fq, fm, dq, dm])
}

/// Softmax over the scores of all facts.
pub fn attention_gates(
    g: &mut Graph<'_>,
    scorer: &AttentionScorer,
    facts: &FactSequence,
    q: Var,
    m: Var,
) -> Result<Var> {
    let mut scores = Vec::with_capacity(facts.len());
    for &f in &facts.facts {
        let z = interaction_vector(g, f, q, m)?;
        scores.push(scorer.score(g, z)?);
    }
    let scores = g.concat(&scores)?;
    g.softmax(scores)
}

fn check_gate_len(g: &Graph<'_>, facts: &FactSequence, gates: Var, op: &'static str) -> Result<()> {
    if g.shape(gates) != [facts.len()] {
        return Err(Error::dim(op, &[facts.len()], g.shape(gates)));
    }
    Ok(())
}

/// `c = Σ_i g_i f_i`
pub fn soft_attention(g: &mut Graph<'_>, facts: &FactSequence, gates: Var) -> Result<Var> {
    check_gate_len(g, facts, gates, "soft_attention")?;
    let mut acc: Option<Var> = None;
    for (i, &f) in facts.facts.iter().enumerate() {
        let gi = g.select(gates, i)?;
        let term = g.scale_by(f, gi)?;
        acc = Some(match acc {
            None => term,
            Some(a) => g.add(a, term)?,
        });
    }
    Ok(acc.expect("nonempty facts"))
}

/// Final state of the attention-based GRU over the facts, from `h₀ = 0`.
pub fn attention_gru(
    g: &mut Graph<'_>,
    cell: &AttnGruCell,
    facts: &FactSequence,
    gates: Var,
) -> Result<Var> {
    check_gate_len(g, facts, gates, "attention_gru")?;
    let mut h = g.zeros(cell.n_hidden);
    for (i, &f) in facts.facts.iter().enumerate() {
        let gi = g.select(gates, i)?;
        h = cell.step(g, f, h, gi)?;
    }
    Ok(h)
}

#[derive(Clone, Debug)]
pub enum MemoryUpdate {
    /// `m_t = GRU(c_t, m_{t−1})`
    Gru(GruCell),
    /// `m_t = ReLU(W [m_{t−1} ; c_t ; q] + b)`, `W ∈ R^{n_H × 3n_H}`
    Relu { w: ParamId, b: ParamId },
}

impl MemoryUpdate {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        kind: UpdateKind,
        n_hidden: usize,
        rng: &mut R,
    ) -> Self {
        match kind {
            UpdateKind::Gru => MemoryUpdate::Gru(GruCell::new(params, prefix, n_hidden, n_hidden, rng)),
            UpdateKind::Relu => MemoryUpdate::Relu {
                w: params.add(
                    format!("{prefix}.w"),
                    ParamKind::Weight,
                    init_weights(Init::XavierUniform, &[n_hidden, 3 * n_hidden], rng),
                ),
                b: params.add(
                    format!("{prefix}.b"),
                    ParamKind::Bias,
                    init_weights(Init::Zeros, &[n_hidden], rng),
                ),
            },
        }
    }

    pub fn kind(&self) -> UpdateKind {
        match self {
            MemoryUpdate::Gru(_) => UpdateKind::Gru,
            MemoryUpdate::Relu { .. } => UpdateKind::Relu,
        }
    }

    pub fn apply(&self, g: &mut Graph<'_>, m_prev: Var, c: Var, q: Var) -> Result<Var> {
        match self {
            MemoryUpdate::Gru(cell) => cell.step(g, c, m_prev),
            MemoryUpdate::Relu { w, b } => {
                let w = g.param(*w);
                let b = g.param(*b);
                let x = g.concat(&[m_prev, c, q])?;
                let y = g.matvec(w, x)?;
                let y = g.add(y, b)?;
                Ok(g.relu(y))
            }
        }
    }
}

/// Memory update for pass `t` (1-based), picking the per-pass parameters
/// when untied.
pub fn memory_update(
    g: &mut Graph<'_>,
    updates: &[MemoryUpdate],
    weights: Tying,
    m_prev: Var,
    c: Var,
    q: Var,
    pass: usize,
) -> Result<Var> {
    let idx = match weights {
        Tying::Tied => 0,
        Tying::Untied => pass.checked_sub(1).ok_or_else(|| Error::Config("passes are 1-based".into()))?,
    };
    let update = updates
        .get(idx)
        .ok_or_else(|| Error::Config(format!("no memory-update parameters for pass {pass}")))?;
    update.apply(g, m_prev, c, q)
}

/// Per-pass record of a forward run.
#[derive(Clone, Debug)]
pub struct EpisodeTrace {
    /// `m⁰ ..= m^T`; `memories[0]` is the question vector.
    pub memories: Vec<Var>,
    /// Gate vector of each pass.
    pub gates: Vec<Var>,
    /// Context vector of each pass.
    pub contexts: Vec<Var>,
}

impl EpisodeTrace {
    pub fn final_memory(&self) -> Var {
        *self.memories.last().expect("m0 always present")
    }
}

/// All episodic parameters for one configuration.
#[derive(Clone, Debug)]
pub struct EpisodicMemory {
    pub config: EpisodicConfig,
    pub scorers: Vec<AttentionScorer>,
    pub attn_cells: Vec<AttnGruCell>,
    pub updates: Vec<MemoryUpdate>,
}

impl EpisodicMemory {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        config: EpisodicConfig,
        n_hidden: usize,
        n_attn: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let mut scorers = Vec::new();
        let mut attn_cells = Vec::new();
        let mut updates = Vec::new();
        for s in 0..config.sets() {
            let prefix = match config.weights {
                Tying::Tied => "episode".to_string(),
                Tying::Untied => format!("episode.pass{}", s + 1),
            };
            scorers.push(AttentionScorer::new(params, &format!("{prefix}.gate"), n_hidden, n_attn, rng));
            if config.attention == AttentionKind::AttnGru {
                attn_cells.push(AttnGruCell::new(params, &format!("{prefix}.attn_gru"), n_hidden, rng));
            }
            updates.push(MemoryUpdate::new(params, &format!("{prefix}.update"), config.update, n_hidden, rng));
        }
        Ok(EpisodicMemory {
            config,
            scorers,
            attn_cells,
            updates,
        })
    }

    fn set_for(&self, pass: usize) -> usize {
        match self.config.weights {
            Tying::Tied => 0,
            Tying::Untied => pass - 1,
        }
    }

    pub fn run(&self, g: &mut Graph<'_>, facts: &FactSequence, q: Var) -> Result<EpisodeTrace> {
        let mut trace = EpisodeTrace {
            memories: vec![q],
            gates: Vec::with_capacity(self.config.passes),
            contexts: Vec::with_capacity(self.config.passes),
        };
        let mut m = q;
        for pass in 1..=self.config.passes {
            let set = self.set_for(pass);
            let gates = attention_gates(g, &self.scorers[set], facts, q, m)?;
            let c = match self.config.attention {
                AttentionKind::Soft => soft_attention(g, facts, gates)?,
                AttentionKind::AttnGru => attention_gru(g, &self.attn_cells[set], facts, gates)?,
            };
            m = memory_update(g, &self.updates, self.config.weights, m, c, q, pass)?;
            trace.gates.push(gates);
            trace.contexts.push(c);
            trace.memories.push(m);
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn facts(g: &mut Graph<'_>, rows: &[&[f64]]) -> FactSequence {
        FactSequence::new(rows.iter().map(|r| g.vector(r)).collect()).unwrap()
    }

    #[test]
    fn interaction_vector_examples() {
        let mut g = Graph::new();
        let v = g.vector(&[0.5, -2.0]);
        let z = interaction_vector(&mut g, v, v, v).unwrap();
        assert_eq!(g.value(z), &[0.25, 4.0, 0.25, 4.0, 0.0, 0.0, 0.0, 0.0]);

        let f = g.zeros(2);
        let q = g.vector(&[-1.0, 2.0]);
        let m = g.vector(&[3.0, -4.0]);
        let z = interaction_vector(&mut g, f, q, m).unwrap();
        assert_eq!(g.value(z), &[0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);

        let f = g.vector(&[1.0, 2.0]);
        let q = g.vector(&[0.0, 1.0]);
        let m = g.vector(&[1.0, 0.0]);
        let z = interaction_vector(&mut g, f, q, m).unwrap();
        assert_eq!(g.value(z), &[0.0, 2.0, 1.0, 0.0, 1.0, 1.0, 0.0, 2.0]);

        let short = g.vector(&[1.0]);
        assert!(matches!(
            interaction_vector(&mut g, short, q, m),
            Err(Error::Dimension { .. })
        ));
    }

    fn scorer(n_h: usize, seed: u64) -> (ParamSet, AttentionScorer) {
        let mut ps = ParamSet::new();
        let s = AttentionScorer::new(&mut ps, "gate", n_h, n_h, &mut ChaCha8Rng::seed_from_u64(seed));
        (ps, s)
    }

    #[test]
    fn constant_scores_give_uniform_gates() {
        let (mut ps, s) = scorer(2, 0);
        ps.value_mut(s.w2).data_mut().fill(0.0);
        ps.value_mut(s.b2).data_mut().fill(0.0);
        let mut g = Graph::with_params(&ps);
        let fs = facts(&mut g, &[&[1.0, 0.0], &[0.0, 1.0], &[2.0, 2.0]]);
        let q = g.vector(&[0.3, 0.1]);
        let gates = attention_gates(&mut g, &s, &fs, q, q).unwrap();
        for v in g.value(gates) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_fact_gets_full_gate() {
        let (ps, s) = scorer(2, 1);
        let mut g = Graph::with_params(&ps);
        let fs = facts(&mut g, &[&[1.0, -1.0]]);
        let q = g.vector(&[0.3, 0.1]);
        let gates = attention_gates(&mut g, &s, &fs, q, q).unwrap();
        assert_eq!(g.value(gates), &[1.0]);
    }

    #[test]
    fn duplicate_facts_get_equal_gates() {
        let (ps, s) = scorer(3, 2);
        let mut g = Graph::with_params(&ps);
        let fs = facts(&mut g, &[&[1.0, -1.0, 0.5], &[0.2, 0.4, 0.1], &[1.0, -1.0, 0.5]]);
        let q = g.vector(&[0.3, 0.1, -0.2]);
        let m = g.vector(&[-0.3, 0.6, 0.2]);
        let gates = attention_gates(&mut g, &s, &fs, q, m).unwrap();
        let v = g.value(gates);
        assert_eq!(v[0], v[2]);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn soft_attention_examples() {
        let mut g = Graph::new();
        let fs = facts(&mut g, &[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 7.0]]);
        let hot = g.vector(&[0.0, 1.0, 0.0]);
        let c = soft_attention(&mut g, &fs, hot).unwrap();
        assert_eq!(g.value(c), &[3.0, 4.0]);
        let uniform = g.vector(&[1.0 / 3.0; 3]);
        let c = soft_attention(&mut g, &fs, uniform).unwrap();
        assert!((g.value(c)[0] - 3.0).abs() < 1e-12);
        assert!((g.value(c)[1] - 13.0 / 3.0).abs() < 1e-12);
        let wrong = g.vector(&[0.5, 0.5]);
        assert!(matches!(soft_attention(&mut g, &fs, wrong), Err(Error::Dimension { .. })));
    }

    fn attn_cell(n_h: usize, seed: u64) -> (ParamSet, AttnGruCell) {
        let mut ps = ParamSet::new();
        let c = AttnGruCell::new(&mut ps, "agru", n_h, &mut ChaCha8Rng::seed_from_u64(seed));
        (ps, c)
    }

    #[test]
    fn attention_gru_examples() {
        let (ps, cell) = attn_cell(2, 3);
        let mut g = Graph::with_params(&ps);
        let fs = facts(&mut g, &[&[1.0, 2.0], &[-0.5, 0.3], &[0.7, -0.1]]);
        let zero = g.vector(&[0.0, 0.0, 0.0]);
        let c = attention_gru(&mut g, &cell, &fs, zero).unwrap();
        assert_eq!(g.value(c), &[0.0, 0.0]);

        let last = g.vector(&[0.0, 0.0, 1.0]);
        let c = attention_gru(&mut g, &cell, &fs, last).unwrap();
        let h0 = g.zeros(2);
        let direct = cell.candidate(&mut g, fs.facts[2], h0).unwrap();
        assert_eq!(g.value(c), g.value(direct));
    }

    #[test]
    fn joint_permutation_soft_invariant_attn_gru_not() {
        let (ps, cell) = attn_cell(3, 4);
        let mut g = Graph::with_params(&ps);
        let rows: [&[f64]; 3] = [&[1.0, 2.0, -1.0], &[-0.5, 0.3, 0.8], &[0.7, -0.1, 0.2]];
        let gates = [0.2, 0.5, 0.3];
        let fs = facts(&mut g, &rows);
        let gv = g.vector(&gates);
        let perm = [2usize, 0, 1];
        let pf = facts(&mut g, &perm.map(|i| rows[i]));
        let pg = g.vector(&perm.map(|i| gates[i]));

        let a = soft_attention(&mut g, &fs, gv).unwrap();
        let b = soft_attention(&mut g, &pf, pg).unwrap();
        for (x, y) in g.value(a).iter().zip(g.value(b)) {
            assert!((x - y).abs() < 1e-12);
        }
        let a = attention_gru(&mut g, &cell, &fs, gv).unwrap();
        let b = attention_gru(&mut g, &cell, &pf, pg).unwrap();
        assert!(g.value(a).iter().zip(g.value(b)).any(|(x, y)| (x - y).abs() > 1e-6));
    }

    #[test]
    fn memory_update_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ps = ParamSet::new();
        let relu = MemoryUpdate::new(&mut ps, "relu", UpdateKind::Relu, 2, &mut rng);
        let gru = MemoryUpdate::new(&mut ps, "gru", UpdateKind::Gru, 2, &mut rng);
        ps.zero_all();
        let mut g = Graph::with_params(&ps);
        let m = g.vector(&[0.4, -0.8]);
        let c = g.vector(&[1.0, 1.0]);
        let q = g.vector(&[-1.0, 0.5]);
        let out = relu.apply(&mut g, m, c, q).unwrap();
        assert_eq!(g.value(out), &[0.0, 0.0]);
        let out = gru.apply(&mut g, m, c, q).unwrap();
        assert_eq!(g.value(out), &[0.2, -0.4]);

        let MemoryUpdate::Relu { w, b } = relu else { unreachable!() };
        let mut ps2 = ps.clone();
        *ps2.value_mut(w) = Tensor::filled(&[2, 6], 0.3);
        *ps2.value_mut(b) = Tensor::filled(&[2], -100.0);
        let mut g = Graph::with_params(&ps2);
        let m = g.vector(&[0.4, -0.8]);
        let c = g.vector(&[1.0, 1.0]);
        let q = g.vector(&[-1.0, 0.5]);
        let out = MemoryUpdate::Relu { w, b }.apply(&mut g, m, c, q).unwrap();
        assert_eq!(g.value(out), &[0.0, 0.0]);
    }

    #[test]
    fn missing_pass_parameters_are_a_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ps = ParamSet::new();
        let ups = vec![MemoryUpdate::new(&mut ps, "u", UpdateKind::Relu, 2, &mut rng)];
        let mut g = Graph::with_params(&ps);
        let m = g.zeros(2);
        assert!(memory_update(&mut g, &ups, Tying::Untied, m, m, m, 1).is_ok());
        assert!(matches!(
            memory_update(&mut g, &ups, Tying::Untied, m, m, m, 2),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_passes_is_rejected() {
        let cfg = EpisodicConfig {
            passes: 0,
            attention: AttentionKind::Soft,
            update: UpdateKind::Gru,
            weights: Tying::Tied,
        };
        let mut ps = ParamSet::new();
        assert!(EpisodicMemory::new(&mut ps, cfg, 2, 2, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn single_pass_with_one_hot_gates_composes() {
        // Force a one-hot gate by making the scorer respond only to fact 1.
        let cfg = EpisodicConfig {
            passes: 1,
            attention: AttentionKind::Soft,
            update: UpdateKind::Relu,
            weights: Tying::Tied,
        };
        let mut ps = ParamSet::new();
        let mem = EpisodicMemory::new(&mut ps, cfg, 2, 2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let s = &mem.scorers[0];
        // score = 1000 * tanh(z[0]) where z[0] = f[0] * q[0]
        let mut w1 = Tensor::zeros(&[2, 8]);
        w1.set(0, 0, 1.0);
        *ps.value_mut(s.w1) = w1;
        *ps.value_mut(s.w2) = Tensor::from_rows(&[&[1000.0, 0.0]]);
        let mut g = Graph::with_params(&ps);
        let fs = facts(&mut g, &[&[0.0, 1.0], &[1.0, -1.0], &[0.0, 0.5]]);
        let q = g.vector(&[1.0, 0.2]);
        let trace = mem.run(&mut g, &fs, q).unwrap();
        assert_eq!(g.value(trace.gates[0])[1], 1.0);
        let expected = mem.updates[0].apply(&mut g, q, fs.facts[1], q).unwrap();
        assert_eq!(g.value(trace.final_memory()), g.value(expected));
    }

    #[test]
    fn second_pass_gates_depend_on_first_memory() {
        let cfg = EpisodicConfig {
            passes: 2,
            attention: AttentionKind::AttnGru,
            update: UpdateKind::Gru,
            weights: Tying::Tied,
        };
        let mut ps = ParamSet::new();
        let mem = EpisodicMemory::new(&mut ps, cfg, 3, 3, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let mut g = Graph::with_params(&ps);
        let fs = facts(&mut g, &[&[0.3, 1.0, -0.2], &[1.0, -1.0, 0.4], &[-0.6, 0.5, 0.9]]);
        let q = g.vector(&[1.0, 0.2, -0.5]);
        let trace = mem.run(&mut g, &fs, q).unwrap();
        assert_eq!(trace.gates.len(), 2);
        assert_ne!(g.value(trace.memories[1]), g.value(trace.memories[0]));
        assert_ne!(g.value(trace.gates[0]), g.value(trace.gates[1]));
    }

    #[test]
    fn untied_single_pass_matches_tied() {
        for attention in [AttentionKind::Soft, AttentionKind::AttnGru] {
            for update in [UpdateKind::Gru, UpdateKind::Relu] {
                let mk = |weights| EpisodicConfig {
                    passes: 1,
                    attention,
                    update,
                    weights,
                };
                let mut tied_ps = ParamSet::new();
                let tied = EpisodicMemory::new(&mut tied_ps, mk(Tying::Tied), 3, 3, &mut ChaCha8Rng::seed_from_u64(2))
                    .unwrap();
                let mut untied_ps = ParamSet::new();
                let untied =
                    EpisodicMemory::new(&mut untied_ps, mk(Tying::Untied), 3, 3, &mut ChaCha8Rng::seed_from_u64(99))
                        .unwrap();
                // same parameters, different names
                for ((_, a), (id, _)) in tied_ps.iter().zip(untied_ps.clone().iter()) {
                    *untied_ps.value_mut(id) = a.value.clone();
                }
                let rows: [&[f64]; 2] = [&[0.3, 1.0, -0.2], &[1.0, -1.0, 0.4]];
                let q = [1.0, 0.2, -0.5];
                let mut g = Graph::with_params(&tied_ps);
                let fs = facts(&mut g, &rows);
                let qv = g.vector(&q);
                let a = tied.run(&mut g, &fs, qv).unwrap();
                let a = g.value(a.final_memory()).to_vec();
                let mut g = Graph::with_params(&untied_ps);
                let fs = facts(&mut g, &rows);
                let qv = g.vector(&q);
                let b = untied.run(&mut g, &fs, qv).unwrap();
                assert_eq!(a, g.value(b.final_memory()));
            }
        }
    }
}
