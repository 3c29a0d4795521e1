//! Dual aligners, dual Wasserstein critics and a frozen predictor trained
//! with cycle consistency.

mod arch;
mod losses;
mod model;
mod predictor;
mod train;

pub use arch::{ArchPreset, REFERENCE_LEN};
pub use losses::{
    adversarial_losses, cycle_loss, gradient_penalty, gradient_penalty_with_grad, interpolate, mae_loss, mae_with_grad, ssim,
    ssim_with_grad, SSIM_WINDOW,
};
pub use model::{DbacsModel, LossHistory, LossRecord, LossWeights, TrainSchedule, LOSS_NAMES};
pub use predictor::{evaluate_mae, predict_scalars, train_predictor, PredictorFit, PredictorSchedule};
pub use train::{
    aligner_objective, aligner_step, apply_aligner, channel_ranges, critic_objective, critic_step, mean_pair_ssim, pair_by_label,
    pretrain_aligners, pretrain_pairs, train_dbacs, AlignerReport, CriticReport, DbacsOptimizers, LabeledBatch, PretrainPairs,
    PretrainReport, TrainAbort, TrainOutcome,
};
