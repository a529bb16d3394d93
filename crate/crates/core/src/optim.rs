//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::params::{ParamGrads, ParamSet};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Fails without touching `params` if any gradient
    /// entry is not finite.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamGrads) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::Training(format!(
                "optimizer state covers {} parameters, model has {}",
                self.m.len(),
                params.len()
            )));
        }
        for id in params.ids() {
            if !grads.get(id).is_finite() {
                return Err(Error::Training(format!(
                    "non-finite gradient for parameter {}",
                    params.get(id).name
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let i = id.index();
            let g = grads.get(id).data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params.value_mut(id).data_mut();
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamKind;

    fn single(value: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.add("x", ParamKind::Weight, Tensor::scalar(value));
        ps
    }

    fn grads(ps: &ParamSet, g: f64) -> ParamGrads {
        let mut grads = ParamGrads::zeros_like(ps);
        let id = ps.id("x").unwrap();
        grads.get_mut(id).data_mut()[0] = g;
        grads
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut ps = single(0.5);
        let mut adam = Adam::new(&ps, 0.001);
        let g = grads(&ps, 1.0);
        adam.step(&mut ps, &g).unwrap();
        let x = ps.value(ps.id("x").unwrap()).data()[0];
        assert!((x - (0.5 - 0.001)).abs() < 1e-9, "{x}");
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut ps = single(0.25);
        let mut adam = Adam::new(&ps, 0.01);
        for _ in 0..5 {
            let g = grads(&ps, 0.0);
            adam.step(&mut ps, &g).unwrap();
        }
        assert_eq!(ps.value(ps.id("x").unwrap()).data()[0], 0.25);
    }

    #[test]
    fn repeated_runs_are_identical() {
        let run = || {
            let mut ps = single(1.0);
            let mut adam = Adam::new(&ps, 0.05);
            for k in 0..10 {
                let g = grads(&ps, (k as f64).sin());
                adam.step(&mut ps, &g).unwrap();
            }
            ps.value(ps.id("x").unwrap()).data()[0]
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut ps = single(1.0);
        let mut adam = Adam::new(&ps, 0.01);
        let g = grads(&ps, f64::NAN);
        let err = adam.step(&mut ps, &g).unwrap_err();
        assert!(err.to_string().ends_with("parameter x"), "{err}");
        assert_eq!(ps.value(ps.id("x").unwrap()).data()[0], 1.0);
        assert_eq!(adam.steps(), 0);
    }
}
