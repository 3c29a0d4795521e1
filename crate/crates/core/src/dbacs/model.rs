use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::arch::ArchPreset;
use crate::error::{Error, Result};
use crate::nn::{fingerprint, AdamConfig, Network};

/// Every loss term the trainer can log. There is deliberately no identity
/// loss.
pub const LOSS_NAMES: [&str; 7] = ["adv_S", "adv_T", "cyc_S", "cyc_T", "pred", "gp_A", "gp_B"];

/// Predictor, both aligners and both critics.
///
/// `f` maps target runs into the source feature space, `g` the reverse;
/// `d_a` judges source-space runs, `d_b` target-space runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelParts")]
pub struct DbacsModel {
    pub predictor: Network,
    pub f: Network,
    pub g: Network,
    pub d_a: Network,
    pub d_b: Network,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelParts {
    predictor: Network,
    f: Network,
    g: Network,
    d_a: Network,
    d_b: Network,
}

impl TryFrom<ModelParts> for DbacsModel {
    type Error = Error;

    fn try_from(p: ModelParts) -> Result<Self> {
        DbacsModel::from_parts(p.predictor, p.f, p.g, p.d_a, p.d_b)
    }
}

impl DbacsModel {
    /// Fresh networks for runs of `len` steps with `c_s` source and `c_t`
    /// target channels.
    pub fn new(preset: ArchPreset, len: usize, c_s: usize, c_t: usize, seed: u64) -> Result<Self> {
        let sub = |k: u64| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k);
        Self::from_parts(
            Network::new(len, c_s, preset.predictor(len), sub(1))?,
            Network::new(len, c_t, preset.aligner(len, c_s, true)?, sub(2))?,
            Network::new(len, c_s, preset.aligner(len, c_t, false)?, sub(3))?,
            Network::new(len, c_s, preset.critic(len), sub(4))?,
            Network::new(len, c_t, preset.critic(len), sub(5))?,
        )
    }

    /// Assembles a model after checking that the five shapes agree.
    pub fn from_parts(predictor: Network, f: Network, g: Network, d_a: Network, d_b: Network) -> Result<Self> {
        let (len, c_s) = predictor.input_shape();
        let (_, c_t) = f.input_shape();
        let checks = [
            ("predictor output", predictor.output_shape(), (1, 1)),
            ("F output", f.output_shape(), (len, c_s)),
            ("F input", f.input_shape(), (len, c_t)),
            ("G input", g.input_shape(), (len, c_s)),
            ("G output", g.output_shape(), (len, c_t)),
            ("D_A input", d_a.input_shape(), (len, c_s)),
            ("D_A output", d_a.output_shape(), (1, 1)),
            ("D_B input", d_b.input_shape(), (len, c_t)),
            ("D_B output", d_b.output_shape(), (1, 1)),
        ];
        for (what, got, want) in checks {
            if got != want {
                return Err(Error::Shape(format!("{what} is {got:?}, expected {want:?}")));
            }
        }
        Ok(Self { predictor, f, g, d_a, d_b })
    }

    /// `(len, channels)` of source runs.
    pub fn source_shape(&self) -> (usize, usize) {
        self.predictor.input_shape()
    }

    pub fn target_shape(&self) -> (usize, usize) {
        self.f.input_shape()
    }

    pub fn aligner_fingerprint(&self) -> u64 {
        fingerprint(&[self.f.params(), self.g.params()].concat())
    }

    pub fn critic_fingerprint(&self) -> u64 {
        fingerprint(&[self.d_a.params(), self.d_b.params()].concat())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub adv_s: f64,
    pub adv_t: f64,
    pub pred: f64,
    pub cyc: f64,
    pub gp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { adv_s: 1.0, adv_t: 1.0, pred: 0.0, cyc: 10.0, gp: 10.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("adv_s", self.adv_s), ("adv_t", self.adv_t), ("pred", self.pred), ("cyc", self.cyc), ("gp", self.gp)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("loss weight {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub critic_steps: usize,
    pub pretrain_epochs: usize,
    pub seed: u64,
    pub aligner_adam: AdamConfig,
    pub critic_adam: AdamConfig,
    pub pretrain_adam: AdamConfig,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 32,
            critic_steps: 5,
            pretrain_epochs: 20,
            seed: 0,
            aligner_adam: AdamConfig::ADVERSARIAL,
            critic_adam: AdamConfig::ADVERSARIAL,
            pretrain_adam: AdamConfig::PREDICTOR,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.critic_steps == 0 {
            return Err(Error::Config(format!("batch_size and critic_steps must be >= 1")));
        }
        Ok(())
    }
}

/// One logged loss value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss_name: String,
    pub value: f64,
}

/// Append-only training log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub records: Vec<LossRecord>,
}

impl LossHistory {
    pub fn push(&mut self, step: usize, epoch: usize, name: &str, value: f64) {
        debug_assert!(LOSS_NAMES.contains(&name));
        self.records.push(LossRecord { step, epoch, loss_name: String::from(name), value });
    }

    /// Values of one loss in logging order.
    pub fn series(&self, name: &str) -> Vec<f64> {
        self.records.iter().filter(|r| r.loss_name == name).map(|r| r.value).collect()
    }

    /// Mean of one loss over one epoch.
    pub fn epoch_mean(&self, name: &str, epoch: usize, abs: bool) -> Option<f64> {
        let vals: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.loss_name == name && r.epoch == epoch)
            .map(|r| if abs { r.value.abs() } else { r.value })
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn last(&self, name: &str) -> Option<&LossRecord> {
        self.records.iter().rev().find(|r| r.loss_name == name)
    }
}
