use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    /// Settings for the aligners and critics.
    pub const ADVERSARIAL: AdamConfig = AdamConfig { lr: 1e-4, beta1: 0.5, beta2: 0.9, eps: 1e-8 };
    /// Settings for standalone predictor training.
    pub const PREDICTOR: AdamConfig = AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 };

    pub fn with_lr(self, lr: f64) -> Self {
        Self { lr, ..self }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self::PREDICTOR
    }
}

/// Adam moments for one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self { config, step: 0, m: vec![0.0; num_params], v: vec![0.0; num_params] }
    }

    /// Applies one bias-corrected Adam update. With `maximize` the gradient is
    /// negated, i.e. the update ascends.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], maximize: bool) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state for {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Diverged(format!("non-finite gradient at parameter {i}")));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - libm::pow(beta1, self.step as f64);
        let bc2 = 1.0 - libm::pow(beta2, self.step as f64);
        let sign = if maximize { -1.0 } else { 1.0 };
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let g = sign * g;
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (libm::sqrt(v_hat) + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(AdamConfig::PREDICTOR, 3);
        let mut p = vec![1.0, -2.0, 3.0];
        s.step(&mut p, &[0.0; 3], false).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        // m̂ = g and v̂ = g², so the step is −α·g/(|g| + ε).
        let cfg = AdamConfig::ADVERSARIAL;
        let grads = [0.3, -2.0, 5e-3];
        let mut p = vec![0.0; 3];
        AdamState::new(cfg, 3).step(&mut p, &grads, false).unwrap();
        for (pi, g) in p.iter().zip(grads) {
            let expected = -cfg.lr * g / (g.abs() + cfg.eps);
            assert!((pi - expected).abs() < 1e-15);
            assert!((pi + cfg.lr * g.signum()).abs() < 1e-9);
        }
    }

    #[test]
    fn maximize_mirrors_minimize() {
        let grads = [0.7, -0.1, 2.0];
        let mut a = vec![0.0; 3];
        let mut b = vec![0.0; 3];
        let mut sa = AdamState::new(AdamConfig::PREDICTOR, 3);
        let mut sb = AdamState::new(AdamConfig::PREDICTOR, 3);
        for _ in 0..5 {
            sa.step(&mut a, &grads, false).unwrap();
            sb.step(&mut b, &grads, true).unwrap();
        }
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut s = AdamState::new(AdamConfig::PREDICTOR, 2);
        let mut p = vec![0.0; 2];
        assert!(matches!(s.step(&mut p, &[1.0, f64::NAN], false), Err(Error::Diverged(_))));
        assert_eq!(s.step, 0);
    }
}
