use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{gradient_penalty_with_grad, l1_with_grad, mae_with_grad, ssim_with_grad};
use super::model::{DbacsModel, LossHistory, LossWeights, TrainSchedule};
use crate::datasets::SampleSet;
use crate::error::{Error, Result};
use crate::nn::{AdamState, Network, Tensor};

/// Adam moments for the four adversarially trained networks.
#[derive(Debug, Clone, PartialEq)]
pub struct DbacsOptimizers {
    pub f: AdamState,
    pub g: AdamState,
    pub d_a: AdamState,
    pub d_b: AdamState,
}

impl DbacsOptimizers {
    pub fn new(model: &DbacsModel, schedule: &TrainSchedule) -> Self {
        Self {
            f: AdamState::new(schedule.aligner_adam, model.f.num_params()),
            g: AdamState::new(schedule.aligner_adam, model.g.num_params()),
            d_a: AdamState::new(schedule.critic_adam, model.d_a.num_params()),
            d_b: AdamState::new(schedule.critic_adam, model.d_b.num_params()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticReport {
    pub adv_s: f64,
    pub adv_t: f64,
    pub gp_a: f64,
    pub gp_b: f64,
    /// `adv_s + adv_t − λ_gp·(gp_a + gp_b)`, the ascended objective.
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignerReport {
    /// `mean D_A(F(x_T))`.
    pub critic_score_s: f64,
    /// `mean D_B(G(x_S))`.
    pub critic_score_t: f64,
    pub cyc_s: f64,
    pub cyc_t: f64,
    pub pred: Option<f64>,
    /// The descended objective.
    pub total: f64,
}

fn ensure_finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged(format!("{what} is {v}")))
    }
}

/// Wasserstein estimate of one critic and the gradient of
/// `mean D(real) − mean D(fake) − λ·GP` with respect to its parameters.
fn critic_side(critic: &Network, real: &Tensor, fake: &Tensor, lambda_gp: f64, seed: u64) -> Result<(f64, f64, Vec<f64>)> {
    let mut grads = vec![0.0; critic.num_params()];
    let score = |x: &Tensor, sign: f64, grads: &mut [f64]| -> Result<f64> {
        let (out, tape) = critic.forward(x)?;
        let b = x.batch().max(1) as f64;
        critic.backward(&tape, &Tensor::filled(x.batch(), 1, 1, sign / b), Some(grads))?;
        Ok(out.scalars()?.iter().sum::<f64>() / b)
    };
    let adv = score(real, 1.0, &mut grads)? - score(fake, -1.0, &mut grads)?;
    let (gp, gp_grads) = gradient_penalty_with_grad(critic, real, fake, seed)?;
    for (g, p) in grads.iter_mut().zip(&gp_grads) {
        *g -= lambda_gp * p;
    }
    Ok((adv, gp, grads))
}

/// Critic objective and its gradients for `D_A` and `D_B`; aligners are only
/// evaluated.
pub fn critic_objective(
    model: &DbacsModel,
    x_s: &Tensor,
    x_t: &Tensor,
    weights: &LossWeights,
    seed: u64,
) -> Result<(CriticReport, Vec<f64>, Vec<f64>)> {
    let aligned_t = model.f.predict(x_t)?;
    let aligned_s = model.g.predict(x_s)?;
    let (adv_s, gp_a, grad_a) = critic_side(&model.d_a, x_s, &aligned_t, weights.gp, seed)?;
    let (adv_t, gp_b, grad_b) = critic_side(&model.d_b, x_t, &aligned_s, weights.gp, seed ^ 0xA5A5_5A5A_DEAD_BEEF)?;
    let total = adv_s + adv_t - weights.gp * (gp_a + gp_b);
    Ok((CriticReport { adv_s, adv_t, gp_a, gp_b, total }, grad_a, grad_b))
}

/// One ascent step of both critics. Only `d_a` and `d_b` change.
pub fn critic_step(
    model: &mut DbacsModel,
    x_s: &Tensor,
    x_t: &Tensor,
    weights: &LossWeights,
    opt: &mut DbacsOptimizers,
    seed: u64,
) -> Result<CriticReport> {
    let (report, grad_a, grad_b) = critic_objective(model, x_s, x_t, weights, seed)?;
    ensure_finite("critic objective", report.total)?;
    opt.d_a.step(model.d_a.params_mut(), &grad_a, true)?;
    opt.d_b.step(model.d_b.params_mut(), &grad_b, true)?;
    Ok(report)
}

/// Labeled target runs for the semi-supervised prediction term.
pub struct LabeledBatch<'a> {
    pub x: &'a Tensor,
    pub y: &'a [f64],
}

/// Aligner objective and its gradients for `F` and `G`; critics and the
/// predictor are only evaluated.
pub fn aligner_objective(
    model: &DbacsModel,
    x_s: &Tensor,
    x_t: &Tensor,
    labeled: Option<LabeledBatch<'_>>,
    weights: &LossWeights,
) -> Result<(AlignerReport, Vec<f64>, Vec<f64>)> {
    if weights.pred > 0.0 && labeled.is_none() {
        return Err(Error::Config(format!("pred weight {} needs a labeled target batch", weights.pred)));
    }
    let mut grad_f = vec![0.0; model.f.num_params()];
    let mut grad_g = vec![0.0; model.g.num_params()];

    // target → source → target
    let (aligned_t, tape_f) = model.f.forward(x_t)?;
    let bt = x_t.batch().max(1) as f64;
    let (score_s, tape_da) = model.d_a.forward(&aligned_t)?;
    let critic_score_s = score_s.scalars()?.iter().sum::<f64>() / bt;
    let mut d_aligned_t = model.d_a.backward(&tape_da, &Tensor::filled(x_t.batch(), 1, 1, -weights.adv_s / bt), None)?;
    let (cycled_t, tape_gc) = model.g.forward(&aligned_t)?;
    let (cyc_t, mut d_cyc) = l1_with_grad(&cycled_t, x_t)?;
    d_cyc.as_mut_slice().iter_mut().for_each(|v| *v *= weights.cyc);
    d_aligned_t.add_assign(&model.g.backward(&tape_gc, &d_cyc, Some(&mut grad_g))?)?;

    // source → target → source
    let (aligned_s, tape_g) = model.g.forward(x_s)?;
    let bs = x_s.batch().max(1) as f64;
    let (score_t, tape_db) = model.d_b.forward(&aligned_s)?;
    let critic_score_t = score_t.scalars()?.iter().sum::<f64>() / bs;
    let mut d_aligned_s = model.d_b.backward(&tape_db, &Tensor::filled(x_s.batch(), 1, 1, -weights.adv_t / bs), None)?;
    let (cycled_s, tape_fc) = model.f.forward(&aligned_s)?;
    let (cyc_s, mut d_cyc) = l1_with_grad(&cycled_s, x_s)?;
    d_cyc.as_mut_slice().iter_mut().for_each(|v| *v *= weights.cyc);
    d_aligned_s.add_assign(&model.f.backward(&tape_fc, &d_cyc, Some(&mut grad_f))?)?;

    let mut pred = None;
    if let (Some(batch), true) = (labeled, weights.pred > 0.0) {
        let (aligned_l, tape_fl) = model.f.forward(batch.x)?;
        let (p, tape_p) = model.predictor.forward(&aligned_l)?;
        let (mae, g) = mae_with_grad(p.scalars()?, batch.y)?;
        let up = Tensor::from_vec(g.len(), 1, 1, g.iter().map(|v| v * weights.pred).collect())?;
        let d_aligned_l = model.predictor.backward(&tape_p, &up, None)?;
        model.f.backward(&tape_fl, &d_aligned_l, Some(&mut grad_f))?;
        pred = Some(mae);
    }

    model.f.backward(&tape_f, &d_aligned_t, Some(&mut grad_f))?;
    model.g.backward(&tape_g, &d_aligned_s, Some(&mut grad_g))?;
    let total = -weights.adv_s * critic_score_s - weights.adv_t * critic_score_t
        + weights.cyc * (cyc_s + cyc_t)
        + weights.pred * pred.unwrap_or(0.0);
    Ok((AlignerReport { critic_score_s, critic_score_t, cyc_s, cyc_t, pred, total }, grad_f, grad_g))
}

/// One descent step of both aligners. Only `f` and `g` change.
pub fn aligner_step(
    model: &mut DbacsModel,
    x_s: &Tensor,
    x_t: &Tensor,
    labeled: Option<LabeledBatch<'_>>,
    weights: &LossWeights,
    opt: &mut DbacsOptimizers,
) -> Result<AlignerReport> {
    let (report, grad_f, grad_g) = aligner_objective(model, x_s, x_t, labeled, weights)?;
    ensure_finite("aligner objective", report.total)?;
    opt.f.step(model.f.params_mut(), &grad_f, false)?;
    opt.g.step(model.g.params_mut(), &grad_g, false)?;
    Ok(report)
}

/// Maps runs through an aligner. An empty batch maps to an empty batch.
pub fn apply_aligner(net: &Network, x: &Tensor) -> Result<Tensor> {
    let (len, ch) = net.input_shape();
    if (x.len(), x.channels()) != (len, ch) {
        return Err(Error::Shape(format!(
            "aligner expects {len}x{ch} runs, got {}x{}",
            x.len(),
            x.channels()
        )));
    }
    if x.batch() == 0 {
        let (ol, oc) = net.output_shape();
        return Ok(Tensor::zeros(0, ol, oc));
    }
    net.predict(x)
}

/// For every reference label, the index of the candidate with the closest
/// label; ties go to the lowest index.
pub fn pair_by_label(reference: &[f64], candidates: &[f64]) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    Ok(reference
        .iter()
        .map(|r| {
            let mut best = 0;
            for (j, c) in candidates.iter().enumerate() {
                if (c - r).abs() < (candidates[best] - r).abs() {
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Per-channel value range over every run of a set.
pub fn channel_ranges<S: SampleSet + ?Sized>(data: &S) -> Vec<f64> {
    let c = data.channels();
    let mut lo = vec![f64::INFINITY; c];
    let mut hi = vec![f64::NEG_INFINITY; c];
    for i in 0..data.num_samples() {
        for (k, v) in data.series(i).iter().enumerate() {
            lo[k % c] = lo[k % c].min(*v);
            hi[k % c] = hi[k % c].max(*v);
        }
    }
    lo.iter().zip(&hi).map(|(l, h)| if h > l { h - l } else { 0.0 }).collect()
}

/// Mean SSIM of `net(input_i)` against `reference_i` over index pairs.
pub fn mean_pair_ssim<A, B>(net: &Network, inputs: &A, references: &B, pairs: &[(usize, usize)], ranges: &[f64]) -> Result<f64>
where
    A: SampleSet + ?Sized,
    B: SampleSet + ?Sized,
{
    if pairs.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut total = 0.0;
    for chunk in pairs.chunks(128) {
        let x: Vec<usize> = chunk.iter().map(|p| p.0).collect();
        let y: Vec<usize> = chunk.iter().map(|p| p.1).collect();
        let out = net.predict(&inputs.batch(&x)?)?;
        total += ssim_with_grad(&out, &references.batch(&y)?, ranges)?.0 * chunk.len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// `(input index, reference index)` pairs used to pretrain `F` and `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainPairs {
    /// Target input → source reference.
    pub f: Vec<(usize, usize)>,
    /// Source input → target reference.
    pub g: Vec<(usize, usize)>,
}

/// Label-nearest pairing: each source run is matched to its closest-label
/// target run for `F`, and each target run to its closest-label source run
/// for `G`.
pub fn pretrain_pairs<S, T>(source: &S, target: &T) -> Result<PretrainPairs>
where
    S: SampleSet + ?Sized,
    T: SampleSet + ?Sized,
{
    let ys: Vec<f64> = (0..source.num_samples()).map(|i| source.label(i)).collect();
    let yt: Vec<f64> = (0..target.num_samples()).map(|i| target.label(i)).collect();
    if ys.is_empty() || yt.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let f = pair_by_label(&ys, &yt)?.into_iter().enumerate().map(|(i, j)| (j, i)).collect();
    let g = pair_by_label(&yt, &ys)?.into_iter().enumerate().map(|(j, i)| (i, j)).collect();
    Ok(PretrainPairs { f, g })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    /// Mean training-pair SSIM of `F` after each epoch.
    pub ssim_f: Vec<f64>,
    pub ssim_g: Vec<f64>,
}

fn pretrain_one<A, B>(
    net: &mut Network,
    inputs: &A,
    references: &B,
    pairs: &[(usize, usize)],
    schedule: &TrainSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>>
where
    A: SampleSet + ?Sized,
    B: SampleSet + ?Sized,
{
    let ranges = channel_ranges(references);
    let mut adam = AdamState::new(schedule.pretrain_adam, net.num_params());
    let mut order = pairs.to_vec();
    let mut per_epoch = Vec::with_capacity(schedule.pretrain_epochs);
    for _ in 0..schedule.pretrain_epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(schedule.batch_size) {
            let x: Vec<usize> = chunk.iter().map(|p| p.0).collect();
            let y: Vec<usize> = chunk.iter().map(|p| p.1).collect();
            let (out, tape) = net.forward(&inputs.batch(&x)?)?;
            let (s, mut g) = ssim_with_grad(&out, &references.batch(&y)?, &ranges)?;
            ensure_finite("pretraining SSIM", s)?;
            // loss is 1 − SSIM
            g.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
            let grads = net.param_grads(&tape, &g)?;
            adam.step(net.params_mut(), &grads, false)?;
            total += s * chunk.len() as f64;
        }
        per_epoch.push(total / order.len().max(1) as f64);
    }
    Ok(per_epoch)
}

/// SSIM pretraining of both aligners on label-nearest pairs. Reads the
/// labels of both sets (for pairing only).
pub fn pretrain_aligners<S, T>(model: &mut DbacsModel, source: &S, target: &T, schedule: &TrainSchedule) -> Result<PretrainReport>
where
    S: SampleSet + ?Sized,
    T: SampleSet + ?Sized,
{
    schedule.validate()?;
    let pairs = pretrain_pairs(source, target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed ^ 0x5EED_0F_A11C);
    let ssim_f = pretrain_one(&mut model.f, target, source, &pairs.f, schedule, &mut rng)?;
    let ssim_g = pretrain_one(&mut model.g, source, target, &pairs.g, schedule, &mut rng)?;
    Ok(PretrainReport { ssim_f, ssim_g })
}

/// Log of an adversarial run plus the index batches of the final aligner
/// step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: LossHistory,
    pub last_source_batch: Vec<usize>,
    pub last_target_batch: Vec<usize>,
}

/// A run stopped by an error, with everything logged before it.
#[derive(Debug)]
pub struct TrainAbort {
    pub error: Error,
    pub history: LossHistory,
}

impl From<TrainAbort> for Error {
    fn from(a: TrainAbort) -> Self {
        a.error
    }
}

fn draw(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, n, k.min(n)).into_vec()
}

/// Adversarial training: per iteration, `critic_steps` critic updates then
/// one aligner update, each on freshly drawn batches. The predictor stays
/// frozen. Target labels are read only when `weights.pred > 0`, and then
/// only from `labeled_target`.
pub fn train_dbacs<S, T>(
    model: &mut DbacsModel,
    source: &S,
    target: &T,
    labeled_target: Option<&dyn SampleSet>,
    schedule: &TrainSchedule,
    weights: &LossWeights,
) -> core::result::Result<TrainOutcome, TrainAbort>
where
    S: SampleSet + ?Sized,
    T: SampleSet + ?Sized,
{
    let mut history = LossHistory::default();
    let mut last = (Vec::new(), Vec::new());
    let result = (|| -> Result<()> {
        schedule.validate()?;
        weights.validate()?;
        if weights.pred > 0.0 && labeled_target.map_or(true, |l| l.num_samples() == 0) {
            return Err(Error::Config(format!("pred weight {} needs labeled target runs", weights.pred)));
        }
        let (ns, nt) = (source.num_samples(), target.num_samples());
        if ns == 0 || nt == 0 {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        let bs = schedule.batch_size.min(ns).min(nt);
        let iterations = ns.div_ceil(schedule.batch_size);
        let mut opt = DbacsOptimizers::new(model, schedule);
        let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
        let mut step = 0;
        for epoch in 0..schedule.epochs {
            for _ in 0..iterations {
                let mut critic = None;
                for _ in 0..schedule.critic_steps {
                    let xs = source.batch(&draw(&mut rng, ns, bs))?;
                    let xt = target.batch(&draw(&mut rng, nt, bs))?;
                    let seed = rng.next_u64();
                    critic = Some(critic_step(model, &xs, &xt, weights, &mut opt, seed)?);
                }
                let is = draw(&mut rng, ns, bs);
                let it = draw(&mut rng, nt, bs);
                let xs = source.batch(&is)?;
                let xt = target.batch(&it)?;
                let labeled = match (weights.pred > 0.0, labeled_target) {
                    (true, Some(l)) => {
                        let idx = draw(&mut rng, l.num_samples(), bs);
                        let y: Vec<f64> = idx.iter().map(|&i| l.label(i)).collect();
                        Some((l.batch(&idx)?, y))
                    }
                    _ => None,
                };
                let report = aligner_step(
                    model,
                    &xs,
                    &xt,
                    labeled.as_ref().map(|(x, y)| LabeledBatch { x, y }),
                    weights,
                    &mut opt,
                )?;
                if let Some(c) = critic {
                    history.push(step, epoch, "adv_S", c.adv_s);
                    history.push(step, epoch, "adv_T", c.adv_t);
                    history.push(step, epoch, "gp_A", c.gp_a);
                    history.push(step, epoch, "gp_B", c.gp_b);
                }
                history.push(step, epoch, "cyc_S", report.cyc_s);
                history.push(step, epoch, "cyc_T", report.cyc_t);
                if let Some(p) = report.pred {
                    history.push(step, epoch, "pred", p);
                }
                last = (is, it);
                step += 1;
            }
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(TrainOutcome { history, last_source_batch: last.0, last_target_batch: last.1 }),
        Err(error) => Err(TrainAbort { error, history }),
    }
}
