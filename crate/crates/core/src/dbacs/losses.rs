use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::DbacsModel;
use crate::error::{Error, Result};
use crate::nn::{Network, Tensor};

/// Window length of the 1-D structural similarity.
pub const SSIM_WINDOW: usize = 11;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Mean absolute error.
pub fn mae_loss(pred: &[f64], truth: &[f64]) -> Result<f64> {
    Ok(mae_with_grad(pred, truth)?.0)
}

/// Mean absolute error and its gradient with respect to `pred`
/// (zero at exact ties).
pub fn mae_with_grad(pred: &[f64], truth: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions vs {} labels", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    let grad = pred.iter().zip(truth).map(|(p, t)| sign(p - t) / n).collect();
    Ok((loss, grad))
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Elementwise mean of `|a − b|` and its gradient with respect to `a`.
pub(crate) fn l1_with_grad(a: &Tensor, b: &Tensor) -> Result<(f64, Tensor)> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!("cycled batch {:?} vs original {:?}", a.shape(), b.shape())));
    }
    let n = a.as_slice().len().max(1) as f64;
    let mut grad = Tensor::zeros(a.batch(), a.len(), a.channels());
    let mut loss = 0.0;
    for ((g, x), y) in grad.as_mut_slice().iter_mut().zip(a.as_slice()).zip(b.as_slice()) {
        loss += (x - y).abs();
        *g = sign(x - y) / n;
    }
    Ok((loss / n, grad))
}

/// `(L_cycle_S, L_cycle_T)`: elementwise mean L1 distance between each batch
/// and its round trip `F(G(x_S))`, `G(F(x_T))`.
pub fn cycle_loss(f: &Network, g: &Network, x_s: &Tensor, x_t: &Tensor) -> Result<(f64, f64)> {
    let cyc_s = l1_with_grad(&f.predict(&g.predict(x_s)?)?, x_s)?.0;
    let cyc_t = l1_with_grad(&g.predict(&f.predict(x_t)?)?, x_t)?.0;
    Ok((cyc_s, cyc_t))
}

/// Mean scalar critic output over a batch.
pub(crate) fn critic_mean(critic: &Network, x: &Tensor) -> Result<f64> {
    let out = critic.predict(x)?;
    Ok(out.scalars()?.iter().sum::<f64>() / x.batch().max(1) as f64)
}

/// `(L_adv_S, L_adv_T)` with `L_adv_S = E[D_A(x_S)] − E[D_A(F(x_T))]` and
/// `L_adv_T = E[D_B(x_T)] − E[D_B(G(x_S))]`.
pub fn adversarial_losses(model: &DbacsModel, x_s: &Tensor, x_t: &Tensor) -> Result<(f64, f64)> {
    let aligned_t = model.f.predict(x_t)?;
    let aligned_s = model.g.predict(x_s)?;
    let adv_s = critic_mean(&model.d_a, x_s)? - critic_mean(&model.d_a, &aligned_t)?;
    let adv_t = critic_mean(&model.d_b, x_t)? - critic_mean(&model.d_b, &aligned_s)?;
    Ok((adv_s, adv_t))
}

/// `ε·real + (1 − ε)·fake` with one uniform `ε` per sample.
pub fn interpolate(real: &Tensor, fake: &Tensor, seed: u64) -> Result<Tensor> {
    if !real.same_shape(fake) {
        return Err(Error::Shape(format!("real batch {:?} vs fake batch {:?}", real.shape(), fake.shape())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = fake.clone();
    for b in 0..real.batch() {
        let eps: f64 = rng.random_range(0.0..1.0);
        for (o, r) in out.sample_mut(b).iter_mut().zip(real.sample(b)) {
            *o = eps * r + (1.0 - eps) * *o;
        }
    }
    Ok(out)
}

fn check_scalar_critic(critic: &Network) -> Result<()> {
    if critic.output_shape() != (1, 1) {
        return Err(Error::Shape(format!("critic must emit one scalar per sample, emits {:?}", critic.output_shape())));
    }
    Ok(())
}

/// Per-sample input gradients of a scalar critic at `x`, with the tape.
fn input_gradients(critic: &Network, x: &Tensor) -> Result<(Tensor, crate::nn::Tape)> {
    let (_, tape) = critic.forward(x)?;
    let grad = critic.backward(&tape, &Tensor::filled(x.batch(), 1, 1, 1.0), None)?;
    Ok((grad, tape))
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Mean over the batch of `(‖∇_x critic(x̂)‖₂ − 1)²` at interpolates `x̂`.
pub fn gradient_penalty(critic: &Network, real: &Tensor, fake: &Tensor, seed: u64) -> Result<f64> {
    check_scalar_critic(critic)?;
    if real.batch() == 0 {
        return Ok(0.0);
    }
    let x_hat = interpolate(real, fake, seed)?;
    let (grad, _) = input_gradients(critic, &x_hat)?;
    let b = real.batch();
    Ok((0..b).map(|i| {
        let d = norm(grad.sample(i)) - 1.0;
        d * d
    }).sum::<f64>() / b as f64)
}

/// Gradient penalty and its gradient with respect to the critic parameters.
///
/// `∂‖g_i‖/∂θ = ∂(J_i v_i)/∂θ` with `v_i = g_i/‖g_i‖` held fixed, where
/// `J_i v_i` is the critic linearized at `x̂_i` applied to `v_i`. This is
/// exact for piecewise-linear critics, which is therefore required.
pub fn gradient_penalty_with_grad(critic: &Network, real: &Tensor, fake: &Tensor, seed: u64) -> Result<(f64, Vec<f64>)> {
    check_scalar_critic(critic)?;
    if !critic.is_piecewise_linear() {
        return Err(Error::Contract(format!("gradient-penalty gradients need a piecewise-linear critic")));
    }
    let mut grads = vec![0.0; critic.num_params()];
    let b = real.batch();
    if b == 0 {
        return Ok((0.0, grads));
    }
    let x_hat = interpolate(real, fake, seed)?;
    let (mut direction, tape) = input_gradients(critic, &x_hat)?;
    let mut upstream = Tensor::zeros(b, 1, 1);
    let mut penalty = 0.0;
    for i in 0..b {
        let n = norm(direction.sample(i));
        penalty += (n - 1.0) * (n - 1.0);
        let v = direction.sample_mut(i);
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        } else {
            v.fill(0.0);
        }
        *upstream.at_mut(i, 0, 0) = 2.0 * (n - 1.0) / b as f64;
    }
    let (_, lin_tape) = critic.linearize(&tape, &direction)?;
    critic.backward(&lin_tape, &upstream, Some(&mut grads))?;
    Ok((penalty / b as f64, grads))
}

fn ssim_constants(range: f64) -> (f64, f64) {
    let r = if range > 0.0 { range } else { 1.0 };
    ((SSIM_K1 * r) * (SSIM_K1 * r), (SSIM_K2 * r) * (SSIM_K2 * r))
}

/// Mean structural similarity between `x` and `y` over every channel and
/// every sliding window of [`SSIM_WINDOW`] steps (the whole series when
/// shorter). `ranges` holds the per-channel data range.
pub fn ssim(x: &Tensor, y: &Tensor, ranges: &[f64]) -> Result<f64> {
    Ok(ssim_with_grad(x, y, ranges)?.0)
}

/// SSIM and its gradient with respect to `x`.
pub fn ssim_with_grad(x: &Tensor, y: &Tensor, ranges: &[f64]) -> Result<(f64, Tensor)> {
    if !x.same_shape(y) {
        return Err(Error::Shape(format!("SSIM inputs {:?} vs {:?}", x.shape(), y.shape())));
    }
    let (batch, len, channels) = x.shape();
    if ranges.len() != channels {
        return Err(Error::Shape(format!("{} ranges for {channels} channels", ranges.len())));
    }
    let mut grad = Tensor::zeros(batch, len, channels);
    if batch == 0 || len == 0 {
        return Ok((0.0, grad));
    }
    let w = SSIM_WINDOW.min(len);
    let windows = len - w + 1;
    let count = (batch * channels * windows) as f64;
    let nw = w as f64;
    let mut total = 0.0;
    for b in 0..batch {
        for (c, range) in ranges.iter().enumerate() {
            let (c1, c2) = ssim_constants(*range);
            for start in 0..windows {
                let xs = (start..start + w).map(|t| x.at(b, t, c));
                let ys = (start..start + w).map(|t| y.at(b, t, c));
                let mx = xs.clone().sum::<f64>() / nw;
                let my = ys.clone().sum::<f64>() / nw;
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for (a, bb) in xs.zip(ys) {
                    vx += (a - mx) * (a - mx);
                    vy += (bb - my) * (bb - my);
                    cxy += (a - mx) * (bb - my);
                }
                vx /= nw;
                vy /= nw;
                cxy /= nw;
                let a1 = 2.0 * mx * my + c1;
                let a2 = 2.0 * cxy + c2;
                let b1 = mx * mx + my * my + c1;
                let b2 = vx + vy + c2;
                let s = a1 * a2 / (b1 * b2);
                total += s;
                for t in start..start + w {
                    let dx = x.at(b, t, c) - mx;
                    let dy = y.at(b, t, c) - my;
                    let d = (2.0 * my * a2 + a1 * 2.0 * dy) / (nw * b1 * b2) - s * (2.0 * mx / (nw * b1) + 2.0 * dx / (nw * b2));
                    *grad.at_mut(b, t, c) += d / count;
                }
            }
        }
    }
    Ok((total / count, grad))
}
