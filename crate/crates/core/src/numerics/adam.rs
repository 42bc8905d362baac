use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Optimizer hyperparameters. `weight_decay` is applied decoupled from the
/// gradient, scaled by the learning rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        AdamConfig {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Tensor,
    v: Tensor,
    step: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl AdamState {
    pub fn new(shape: &[usize], cfg: &AdamConfig) -> Self {
        AdamState {
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            step: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Tensor {
        &self.m
    }

    pub fn second_moment(&self) -> &Tensor {
        &self.v
    }

    /// `θ ← θ(1 − ηλ) − η · m̂ / (√v̂ + ε)` with bias-corrected moments.
    pub fn step(&mut self, param: &mut Tensor, grad: &Tensor, lr: f64, weight_decay: f64) -> Result<()> {
        if param.shape() != grad.shape() || param.shape() != self.m.shape() {
            return Err(Error::shape("adam_step", param.shape(), grad.shape()));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let decay = 1.0 - lr * weight_decay;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let values = param.data_mut();
        let (m, v) = (self.m.data_mut(), self.v.data_mut());
        for (i, &g) in grad.data().iter().enumerate() {
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            values[i] = values[i] * decay - lr * m_hat / (v_hat.sqrt() + eps);
        }
        if !param.is_finite() {
            return Err(Error::NonFinite { op: "adam_step" });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(x: f64) -> Tensor {
        Tensor::vector(vec![x])
    }

    #[test]
    fn single_step_matches_hand_evaluation() {
        // m̂ = 0.5, v̂ = 0.25, Δ = -0.01 · 0.5 / (0.5 + 1e-8)
        let cfg = AdamConfig::new(0.01, 0.0);
        let mut p = one(1.0);
        let mut s = AdamState::new(&[1], &cfg);
        s.step(&mut p, &one(0.5), 0.01, 0.0).unwrap();
        let expected = 1.0 - 0.01 * 0.5 / (0.5 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
        assert!((p.data()[0] - 0.99).abs() < 1e-9);
        assert_eq!(s.steps(), 1);
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let cfg = AdamConfig::new(0.05, 0.0);
        let mut p = Tensor::vector(vec![1.5, -2.0, 0.25]);
        let before = p.clone();
        let mut s = AdamState::new(&[3], &cfg);
        for _ in 0..5 {
            s.step(&mut p, &Tensor::zeros(&[3]), 0.05, 0.0).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn decoupled_decay_shrinks_by_factor() {
        let (lr, wd) = (0.01, 0.5);
        let cfg = AdamConfig::new(lr, wd);
        let mut p = Tensor::vector(vec![2.0, -4.0]);
        let mut s = AdamState::new(&[2], &cfg);
        s.step(&mut p, &Tensor::zeros(&[2]), lr, wd).unwrap();
        let f = 1.0 - lr * wd;
        assert!((p.data()[0] - 2.0 * f).abs() < 1e-15);
        assert!((p.data()[1] + 4.0 * f).abs() < 1e-15);
    }

    #[test]
    fn step_counter_increments() {
        let cfg = AdamConfig::new(0.01, 0.0);
        let mut p = one(0.0);
        let mut s = AdamState::new(&[1], &cfg);
        for expected in 1..=4 {
            s.step(&mut p, &one(1.0), 0.01, 0.0).unwrap();
            assert_eq!(s.steps(), expected);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let cfg = AdamConfig::new(0.01, 0.0);
        let mut p = Tensor::zeros(&[2]);
        let mut s = AdamState::new(&[2], &cfg);
        assert!(s.step(&mut p, &Tensor::zeros(&[3]), 0.01, 0.0).is_err());
    }
}
