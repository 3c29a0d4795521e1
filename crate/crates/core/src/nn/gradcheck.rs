//! Finite-difference verification of analytic parameter gradients.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::Network;
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Number of parameters probed; all of them when the net is smaller.
    pub samples: usize,
    /// Absolute disagreement below which a probe counts as exact (round-off).
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { step: 1e-6, samples: 200, abs_floor: 1e-9, seed: 0 }
    }
}

/// Relative disagreement `|a − n| / (|a| + |n| + 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-12)
}

/// Compares `grad` (analytic, length = number of parameters) against central
/// differences of `objective` evaluated on perturbed copies of `net`.
/// Returns the worst relative error over the probed parameters.
pub fn check_params<F>(net: &Network, grad: &[f64], objective: F, cfg: GradCheckConfig) -> Result<f64>
where
    F: Fn(&Network) -> Result<f64>,
{
    let n = net.num_params();
    let indices: Vec<usize> = if n <= cfg.samples {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        (0..cfg.samples).map(|_| rng.random_range(0..n)).collect()
    };
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in indices {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + cfg.step;
        let plus = objective(&probe)?;
        probe.params_mut()[i] = orig - cfg.step;
        let minus = objective(&probe)?;
        probe.params_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * cfg.step);
        if (grad[i] - numeric).abs() > cfg.abs_floor {
            worst = worst.max(relative_error(grad[i], numeric));
        }
    }
    Ok(worst)
}

/// Gradient check of a network under a scalar loss of its output.
///
/// `loss` returns the loss value and its gradient with respect to the output.
pub fn grad_check<L>(net: &Network, batch: &Tensor, loss: L, cfg: GradCheckConfig) -> Result<f64>
where
    L: Fn(&Tensor) -> Result<(f64, Tensor)>,
{
    let (out, tape) = net.forward(batch)?;
    let (_, upstream) = loss(&out)?;
    let grad = net.param_grads(&tape, &upstream)?;
    check_params(net, &grad, |probe| Ok(loss(&probe.predict(batch)?)?.0), cfg)
}
