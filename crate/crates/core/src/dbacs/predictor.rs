use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{mae_loss, mae_with_grad};
use crate::datasets::SampleSet;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Network, Tensor};

const PREDICT_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorSchedule {
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for PredictorSchedule {
    fn default() -> Self {
        Self { max_epochs: 200, batch_size: 32, patience: 20, val_fraction: 0.1, seed: 0, adam: AdamConfig::PREDICTOR }
    }
}

/// Outcome of standalone predictor training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorFit {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_mae: f64,
    /// MAE of the restored best weights over every training index.
    pub train_mae: f64,
}

/// Runs `net` over the selected samples in chunks and returns one scalar per
/// sample.
pub fn predict_scalars<S: SampleSet + ?Sized>(net: &Network, data: &S, indices: &[usize]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(PREDICT_CHUNK) {
        let y = net.predict(&data.batch(chunk)?)?;
        out.extend_from_slice(y.scalars()?);
    }
    Ok(out)
}

/// MAE of `net` against the labels of the selected samples.
pub fn evaluate_mae<S: SampleSet + ?Sized>(net: &Network, data: &S, indices: &[usize]) -> Result<f64> {
    let pred = predict_scalars(net, data, indices)?;
    let truth: Vec<f64> = indices.iter().map(|&i| data.label(i)).collect();
    mae_loss(&pred, &truth)
}

/// Trains a scalar regressor with MAE, holding out a seeded validation
/// share for early stopping, and restores the best validation weights.
pub fn train_predictor<S: SampleSet + ?Sized>(
    net: &mut Network,
    data: &S,
    indices: &[usize],
    schedule: &PredictorSchedule,
) -> Result<PredictorFit> {
    if indices.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: indices.len() });
    }
    if schedule.batch_size == 0 || !(0.0..1.0).contains(&schedule.val_fraction) {
        return Err(Error::Config(format!("predictor schedule needs batch_size >= 1 and val_fraction in [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut order = indices.to_vec();
    order.shuffle(&mut rng);
    let n_val = (libm::round(schedule.val_fraction * order.len() as f64) as usize).clamp(1, order.len() - 1);
    let (val, train) = order.split_at(n_val);
    let mut train = train.to_vec();
    let val_truth: Vec<f64> = val.iter().map(|&i| data.label(i)).collect();

    let mut adam = AdamState::new(schedule.adam, net.num_params());
    let mut best = (f64::INFINITY, 0, net.params().to_vec());
    let mut epochs_run = 0;
    for epoch in 0..schedule.max_epochs {
        epochs_run = epoch + 1;
        train.shuffle(&mut rng);
        for batch in train.chunks(schedule.batch_size) {
            let x = data.batch(batch)?;
            let truth: Vec<f64> = batch.iter().map(|&i| data.label(i)).collect();
            let (out, tape) = net.forward(&x)?;
            let (_, g) = mae_with_grad(out.scalars()?, &truth)?;
            let grads = net.param_grads(&tape, &Tensor::from_vec(g.len(), 1, 1, g)?)?;
            adam.step(net.params_mut(), &grads, false)?;
        }
        let val_mae = mae_loss(&predict_scalars(net, data, val)?, &val_truth)?;
        if !val_mae.is_finite() {
            return Err(Error::Diverged(format!("predictor validation MAE is {val_mae} at epoch {epoch}")));
        }
        if val_mae < best.0 {
            best = (val_mae, epoch, net.params().to_vec());
        } else if epoch - best.1 >= schedule.patience {
            break;
        }
    }
    net.params_mut().copy_from_slice(&best.2);
    let train_mae = evaluate_mae(net, data, indices)?;
    Ok(PredictorFit { epochs_run, best_epoch: best.1, best_val_mae: best.0, train_mae })
}
