//! Bias-corrected Adam over a flat parameter vector.

use crate::error::{NnError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(lr: f64, param_len: usize) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; param_len],
            v: vec![0.0; param_len],
        }
    }

    /// One update over the whole parameter vector.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::ShapeMismatch {
                context: "adam_step",
                a: vec![params.len(), grads.len()],
                b: vec![self.m.len()],
            });
        }
        self.step = self
            .step
            .checked_add(1)
            .ok_or(NnError::BadConfig("adam step counter overflow".into()))?;
        let b1t = 1.0 - self.beta1.powi(self.step as i32);
        let b2t = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(0.1, 2);
        s.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_is_signed_lr() {
        // Bias correction makes m_hat/sqrt(v_hat) = sign(g) up to eps.
        let mut p = vec![0.0, 0.0];
        let mut s = AdamState::new(0.001, 2);
        s.step(&mut p, &[3.0, -0.25]).unwrap();
        assert!((p[0] + 0.001).abs() < 1e-8);
        assert!((p[1] - 0.001).abs() < 1e-8);
    }

    #[test]
    fn quadratic_descends_to_zero() {
        // f(w) = w^2, grad = 2w, from w=1 at lr 0.1.
        let mut p = vec![1.0];
        let mut s = AdamState::new(0.1, 1);
        for _ in 0..100 {
            let g = vec![2.0 * p[0]];
            s.step(&mut p, &g).unwrap();
        }
        assert!(p[0].abs() < 0.05, "w = {}", p[0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(0.1, 2);
        assert!(s.step(&mut p, &[1.0]).is_err());
    }
}
