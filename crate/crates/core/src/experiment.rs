//! Cross-validated experiment stages: fold preparation, DBACS and baseline
//! training per fold, and per-fold evaluation. Everything here is pure; the
//! toolkit handles files and parallelism.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    cca_fit, coral_align, coral_series, label_paired_rows, latent_series, pca_pair, select_cca_k, time_step_rows, Side,
    SubspaceKind, SubspaceModel,
};
use crate::datasets::{
    apply_normalization, denormalize_label, fit_normalization, kfold_split, DomainDataset, Fold, Normalization, SampleSet,
    SeriesSet, SubsetView,
};
use crate::dbacs::{
    apply_aligner, pair_by_label, predict_scalars, pretrain_aligners, train_dbacs, train_predictor, ArchPreset, DbacsModel,
    LossHistory, LossWeights, PredictorFit, PredictorSchedule, PretrainReport, TrainAbort, TrainSchedule,
};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::metrics::{
    fid, flatten_runs, pearson_per_component, random_halves, DomainDistanceReport, FidSpace, MaePair, MaeRow, MaeTable,
    PearsonReport, FID_DIMS,
};
use crate::nn::Network;

/// How many canonical components the CCA baseline keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CcaComponents {
    /// Best held-out mean correlation over `{5, 10, …}`.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub pca_components: usize,
    pub cca_components: CcaComponents,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { pca_components: 10, cca_components: CcaComponents::Auto }
    }
}

/// Everything that shapes training and evaluation once the data exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub preset: ArchPreset,
    pub weights: LossWeights,
    pub schedule: TrainSchedule,
    pub predictor: PredictorSchedule,
    pub baselines: BaselineConfig,
    pub folds: usize,
    pub fid_dims: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: ArchPreset::Desk,
            weights: LossWeights::default(),
            schedule: TrainSchedule { epochs: 80, ..TrainSchedule::default() },
            predictor: PredictorSchedule::default(),
            baselines: BaselineConfig::default(),
            folds: 5,
            fid_dims: FID_DIMS,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.schedule.validate()?;
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be >= 2, got {}", self.folds)));
        }
        if self.fid_dims == 0 || self.baselines.pca_components == 0 {
            return Err(Error::Config(format!("fid_dims and pca_components must be >= 1")));
        }
        if self.baselines.cca_components == CcaComponents::Fixed(0) {
            return Err(Error::Config(format!("cca_components must be >= 1")));
        }
        Ok(())
    }

    /// Independent seed for one stream of one fold.
    pub fn seed_for(&self, fold: usize, stream: u64) -> u64 {
        let mut z = self.seed ^ (fold as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

const STREAM_SPLIT_S: u64 = 1;
const STREAM_SPLIT_T: u64 = 2;
const STREAM_P_SOURCE: u64 = 3;
const STREAM_P_TARGET: u64 = 4;
const STREAM_MODEL: u64 = 5;
const STREAM_TRAIN: u64 = 6;
const STREAM_LATENT: u64 = 7;
const STREAM_HALVES: u64 = 8;

/// Affine map between two label normalizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub scale: f64,
    pub offset: f64,
}

impl LabelMap {
    /// Normalized `from` labels to normalized `to` labels through raw units.
    pub fn between(from: &Normalization, to: &Normalization) -> Self {
        let a = denormalize_label(from, 0.0);
        let b = denormalize_label(from, 1.0);
        let span = to.label_max - to.label_min;
        let span = if span > 0.0 { span } else { 1.0 };
        Self { scale: (b - a) / span, offset: (a - to.label_min) / span }
    }

    pub fn apply(&self, y: f64) -> f64 {
        self.scale * y + self.offset
    }

    pub fn inverse(&self) -> Self {
        Self { scale: 1.0 / self.scale, offset: -self.offset / self.scale }
    }
}

/// Both domains of one CV fold, normalized with constants fitted on that
/// fold's training runs.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldData {
    pub index: usize,
    pub source: DomainDataset,
    pub target: DomainDataset,
    pub source_split: Fold,
    pub target_split: Fold,
}

impl FoldData {
    pub fn source_norm(&self) -> Result<&Normalization> {
        self.source.normalization().ok_or_else(|| Error::Data(format!("fold {} source is not normalized", self.index)))
    }

    pub fn target_norm(&self) -> Result<&Normalization> {
        self.target.normalization().ok_or_else(|| Error::Data(format!("fold {} target is not normalized", self.index)))
    }

    /// Source label units to target label units.
    pub fn label_map(&self) -> Result<LabelMap> {
        Ok(LabelMap::between(self.source_norm()?, self.target_norm()?))
    }

    pub fn len(&self) -> Result<usize> {
        let ls = self.source.uniform_len().ok_or_else(|| Error::Data(format!("source runs have unequal lengths")))?;
        let lt = self.target.uniform_len().ok_or_else(|| Error::Data(format!("target runs have unequal lengths")))?;
        if ls != lt {
            return Err(Error::Shape(format!("source runs have {ls} steps, target runs {lt}")));
        }
        Ok(ls)
    }
}

/// The train/test splits of both domains for every fold.
pub fn fold_splits(n_source: usize, n_target: usize, cfg: &ExperimentConfig) -> Result<Vec<(Fold, Fold)>> {
    let s = kfold_split(n_source, cfg.folds, cfg.seed_for(0, STREAM_SPLIT_S))?;
    let t = kfold_split(n_target, cfg.folds, cfg.seed_for(0, STREAM_SPLIT_T))?;
    Ok(s.into_iter().zip(t).collect())
}

/// Normalizes structurally preprocessed domains for one fold.
pub fn prepare_fold(source: &DomainDataset, target: &DomainDataset, index: usize, splits: (Fold, Fold)) -> Result<FoldData> {
    let (source_split, target_split) = splits;
    let s_norm = fit_normalization(source, &source_split.train)?;
    let t_norm = fit_normalization(target, &target_split.train)?;
    let fold = FoldData {
        index,
        source: apply_normalization(source, &s_norm),
        target: apply_normalization(target, &t_norm),
        source_split,
        target_split,
    };
    fold.len()?;
    Ok(fold)
}

pub fn prepare_folds(source: &DomainDataset, target: &DomainDataset, cfg: &ExperimentConfig) -> Result<Vec<FoldData>> {
    fold_splits(source.len(), target.len(), cfg)?
        .into_iter()
        .enumerate()
        .map(|(i, s)| prepare_fold(source, target, i, s))
        .collect()
}

fn fit_predictor<S: SampleSet + ?Sized>(
    preset: ArchPreset,
    data: &S,
    indices: &[usize],
    schedule: &PredictorSchedule,
    seed: u64,
) -> Result<(Network, PredictorFit)> {
    let len = data.series_len();
    let mut net = Network::new(len, data.channels(), preset.predictor(len), seed)?;
    let fit = train_predictor(&mut net, data, indices, &PredictorSchedule { seed, ..*schedule })?;
    Ok((net, fit))
}

/// Everything DBACS training produces for one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbacsArtifacts {
    /// Trained aligners and critics; `model.predictor` is the frozen
    /// dedicated source model.
    pub model: DbacsModel,
    /// `F` as initialized, before pretraining.
    pub f_init: Network,
    pub target_predictor: Network,
    pub source_fit: PredictorFit,
    pub target_fit: PredictorFit,
    pub pretrain: PretrainReport,
    pub history: LossHistory,
}

/// Dedicated predictors, SSIM pretraining and adversarial training on the
/// fold's training runs. A divergence carries the partial loss history.
pub fn train_dbacs_fold(fold: &FoldData, cfg: &ExperimentConfig) -> core::result::Result<DbacsArtifacts, TrainAbort> {
    let plain = |error: Error| TrainAbort { error, history: LossHistory::default() };
    cfg.validate().map_err(plain)?;
    let len = fold.len().map_err(plain)?;
    let (s_train, t_train) = (&fold.source_split.train, &fold.target_split.train);
    let (p_source, source_fit) =
        fit_predictor(cfg.preset, &fold.source, s_train, &cfg.predictor, cfg.seed_for(fold.index, STREAM_P_SOURCE)).map_err(plain)?;
    let (target_predictor, target_fit) =
        fit_predictor(cfg.preset, &fold.target, t_train, &cfg.predictor, cfg.seed_for(fold.index, STREAM_P_TARGET)).map_err(plain)?;

    let fresh = DbacsModel::new(cfg.preset, len, fold.source.channels(), fold.target.channels(), cfg.seed_for(fold.index, STREAM_MODEL))
        .map_err(plain)?;
    let f_init = fresh.f.clone();
    let mut model = DbacsModel::from_parts(p_source, fresh.f, fresh.g, fresh.d_a, fresh.d_b).map_err(plain)?;

    let schedule = TrainSchedule { seed: cfg.seed_for(fold.index, STREAM_TRAIN), ..cfg.schedule };
    let source_view = SubsetView::new(&fold.source, s_train);
    let target_view = SubsetView::new(&fold.target, t_train);
    let pretrain = pretrain_aligners(&mut model, &source_view, &target_view, &schedule).map_err(plain)?;
    let outcome = train_dbacs(&mut model, &source_view, &target_view, None, &schedule, &cfg.weights)?;
    Ok(DbacsArtifacts { model, f_init, target_predictor, source_fit, target_fit, pretrain, history: outcome.history })
}

fn mae_mapped(pred: &[f64], truth: &[f64], map: Option<LabelMap>) -> f64 {
    let n = pred.len().max(1) as f64;
    pred.iter()
        .zip(truth)
        .map(|(p, t)| (map.map_or(*p, |m| m.apply(*p)) - t).abs())
        .sum::<f64>()
        / n
}

fn split_mae<S: SampleSet + ?Sized>(net: &Network, data: &S, split: &Fold, map: Option<LabelMap>) -> Result<MaePair> {
    let eval = |idx: &[usize]| -> Result<f64> {
        let pred = predict_scalars(net, data, idx)?;
        let truth: Vec<f64> = idx.iter().map(|&i| data.label(i)).collect();
        Ok(mae_mapped(&pred, &truth, map))
    };
    Ok(MaePair { train: eval(&split.train)?, test: eval(&split.test)? })
}

/// Maps every run of a set through an aligner, keeping labels.
pub fn align_all<S: SampleSet + ?Sized>(net: &Network, data: &S) -> Result<SeriesSet> {
    let idx: Vec<usize> = (0..data.num_samples()).collect();
    let mut series = Vec::with_capacity(idx.len());
    for chunk in idx.chunks(256) {
        let out = apply_aligner(net, &data.batch(chunk)?)?;
        series.extend((0..out.batch()).map(|b| out.sample(b).to_vec()));
    }
    let (len, c) = net.output_shape();
    SeriesSet::new(len, c, series, idx.iter().map(|&i| data.label(i)).collect())
}

/// Pearson correlation per source channel between aligned target runs and
/// their closest-label source runs, over all time steps.
fn aligned_pearson(source: &DomainDataset, source_idx: &[usize], aligned: &SeriesSet, target_idx: &[usize], map: LabelMap) -> Result<PearsonReport> {
    let ys: Vec<f64> = source_idx.iter().map(|&i| map.apply(source.label(i))).collect();
    let yt: Vec<f64> = target_idx.iter().map(|&i| aligned.label(i)).collect();
    let partner = pair_by_label(&yt, &ys)?;
    let s_rows = time_step_rows(source, &partner.iter().map(|&j| source_idx[j]).collect::<Vec<_>>())?;
    let a_rows = time_step_rows(aligned, target_idx)?;
    pearson_per_component(&a_rows, &s_rows)
}

/// Test-split predictions for the scatter and correlation diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPredictions {
    pub truth: Vec<f64>,
    /// `P(F(x_T))` in target label units.
    pub aligned: Vec<f64>,
    pub dedicated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbacsFoldMetrics {
    pub fold: usize,
    /// Rows `lower-bound` and `dbacs`.
    pub table: MaeTable,
    pub fid: DomainDistanceReport,
    pub pearson: PearsonReport,
    pub test_predictions: AlignedPredictions,
}

pub const LOWER_BOUND_ROW: &str = "lower-bound";
pub const DBACS_ROW: &str = "dbacs";

/// FID of source runs against target runs mapped by `F` before and after
/// training, in a PCA space of flattened source runs; inner distances from
/// random halves of each domain.
pub fn domain_distances(fold: &FoldData, f_init: &Network, f_trained: &Network, dims: usize, seed: u64) -> Result<DomainDistanceReport> {
    let all_s: Vec<usize> = (0..fold.source.len()).collect();
    let all_t: Vec<usize> = (0..fold.target.len()).collect();
    let flat_s = flatten_runs(&fold.source, &all_s)?;
    let space = FidSpace::fit(&flat_s, dims)?;
    let es = space.embed(&flat_s)?;
    let before = space.embed(&flatten_runs(&align_all(f_init, &fold.target)?, &all_t)?)?;
    let after = space.embed(&flatten_runs(&align_all(f_trained, &fold.target)?, &all_t)?)?;

    let flat_t = flatten_runs(&fold.target, &all_t)?;
    let et = FidSpace::fit(&flat_t, dims)?.embed(&flat_t)?;
    let inner = |m: &Mat, salt: u64| -> Result<f64> {
        let (a, b) = random_halves(m.rows(), seed ^ salt);
        fid(&select_rows(m, &a)?, &select_rows(m, &b)?)
    };
    Ok(DomainDistanceReport {
        inner_source: inner(&es, 1)?,
        inner_target: inner(&et, 2)?,
        outer_before: fid(&es, &before)?,
        outer_after: fid(&es, &after)?,
        n_source: all_s.len(),
        n_target: all_t.len(),
        dims: space.projection.latent_dim(),
    })
}

fn select_rows(m: &Mat, rows: &[usize]) -> Result<Mat> {
    let mut data = Vec::with_capacity(rows.len() * m.cols());
    for &r in rows {
        data.extend_from_slice(m.row(r));
    }
    Mat::from_vec(rows.len(), m.cols(), data)
}

/// Lower-bound and DBACS MAE, FID block and Pearson block for one fold.
pub fn evaluate_dbacs_fold(fold: &FoldData, art: &DbacsArtifacts, cfg: &ExperimentConfig) -> Result<DbacsFoldMetrics> {
    let map = fold.label_map()?;
    let source_mae = split_mae(&art.model.predictor, &fold.source, &fold.source_split, None)?;
    let dedicated_target = split_mae(&art.target_predictor, &fold.target, &fold.target_split, None)?;
    let aligned = align_all(&art.model.f, &fold.target)?;
    let aligned_target = split_mae(&art.model.predictor, &aligned, &fold.target_split, Some(map))?;
    let table = MaeTable {
        rows: vec![
            MaeRow { name: LOWER_BOUND_ROW.to_string(), source: source_mae, target: dedicated_target },
            MaeRow { name: DBACS_ROW.to_string(), source: source_mae, target: aligned_target },
        ],
    };
    let test = &fold.target_split.test;
    let test_predictions = AlignedPredictions {
        truth: test.iter().map(|&i| fold.target.label(i)).collect(),
        aligned: predict_scalars(&art.model.predictor, &aligned, test)?.into_iter().map(|p| map.apply(p)).collect(),
        dedicated: predict_scalars(&art.target_predictor, &fold.target, test)?,
    };
    Ok(DbacsFoldMetrics {
        fold: fold.index,
        table,
        fid: domain_distances(fold, &art.f_init, &art.model.f, cfg.fid_dims, cfg.seed_for(fold.index, STREAM_HALVES))?,
        pearson: aligned_pearson(&fold.source, &fold.source_split.train, &aligned, test, map)?,
        test_predictions,
    })
}

/// Latent-space model variants of the baseline tables.
pub const BASELINE_VARIANTS: [&str; 4] = ["source", "target", "both", "coral_both"];

/// Row name such as `pca_coral_both`.
pub fn baseline_row(kind: SubspaceKind, variant: &str) -> String {
    let prefix = match kind {
        SubspaceKind::Pca => "pca",
        SubspaceKind::Cca => "cca",
    };
    format!("{prefix}_{variant}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineArtifacts {
    /// Fitted projections with the CORAL map attached.
    pub subspace: SubspaceModel,
    /// Latent predictors in the order of [`BASELINE_VARIANTS`].
    pub predictors: Vec<Network>,
    pub fits: Vec<PredictorFit>,
    /// For CCA: target run paired with each source training run.
    pub pairing: Vec<usize>,
}

/// Latent sets of one fold: source, target, CORAL-recolored source, and
/// the union used by the `both` variants (source labels in target units).
struct LatentSets {
    source: SeriesSet,
    target: SeriesSet,
    coral_source: SeriesSet,
}

fn latent_sets(fold: &FoldData, subspace: &SubspaceModel) -> Result<LatentSets> {
    let all_s: Vec<usize> = (0..fold.source.len()).collect();
    let all_t: Vec<usize> = (0..fold.target.len()).collect();
    let source = latent_series(subspace, &fold.source, &all_s, Side::Source)?;
    let target = latent_series(subspace, &fold.target, &all_t, Side::Target)?;
    let coral = subspace.coral.as_ref().ok_or_else(|| Error::Contract(format!("subspace model has no CORAL map")))?;
    let coral_source = coral_series(coral, &source)?;
    Ok(LatentSets { source, target, coral_source })
}

/// Stacks source runs (labels mapped to target units) and target runs.
fn union(source: &SeriesSet, target: &SeriesSet, map: LabelMap) -> Result<SeriesSet> {
    let mut series = Vec::with_capacity(source.num_samples() + target.num_samples());
    let mut labels = Vec::with_capacity(series.capacity());
    for i in 0..source.num_samples() {
        series.push(source.series(i).to_vec());
        labels.push(map.apply(source.label(i)));
    }
    for i in 0..target.num_samples() {
        series.push(target.series(i).to_vec());
        labels.push(target.label(i));
    }
    SeriesSet::new(source.series_len(), source.channels(), series, labels)
}

/// Fits PCA or CCA (+CORAL) on the fold's training runs and trains the four
/// latent predictors.
pub fn train_baseline_fold(fold: &FoldData, cfg: &ExperimentConfig, kind: SubspaceKind) -> Result<BaselineArtifacts> {
    cfg.validate()?;
    let len = fold.len()?;
    let (s_train, t_train) = (&fold.source_split.train, &fold.target_split.train);
    let (mut subspace, pairing) = match kind {
        SubspaceKind::Pca => {
            let rs = time_step_rows(&fold.source, s_train)?;
            let rt = time_step_rows(&fold.target, t_train)?;
            (pca_pair(&rs, &rt, cfg.baselines.pca_components)?, Vec::new())
        }
        SubspaceKind::Cca => {
            let (rs, rt, pairing) = label_paired_rows(&fold.source, s_train, &fold.target, t_train)?;
            let k = match cfg.baselines.cca_components {
                CcaComponents::Fixed(k) => k,
                CcaComponents::Auto => select_cca_k(&rs, &rt, len, cfg.seed_for(fold.index, STREAM_LATENT))?,
            };
            (cca_fit(&rs, &rt, k)?, pairing)
        }
    };
    let zs = subspace.projection(Side::Source)?.apply(&time_step_rows(&fold.source, s_train)?)?;
    let zt = subspace.projection(Side::Target)?.apply(&time_step_rows(&fold.target, t_train)?)?;
    subspace.coral = Some(coral_align(&zs, &zt)?.0);

    let sets = latent_sets(fold, &subspace)?;
    let map = fold.label_map()?;
    let n_s = fold.source.len();
    let both_idx: Vec<usize> = s_train.iter().copied().chain(t_train.iter().map(|i| i + n_s)).collect();
    let plain_union = union(&sets.source, &sets.target, map)?;
    let coral_union = union(&sets.coral_source, &sets.target, map)?;
    let jobs: [(&SeriesSet, &[usize]); 4] =
        [(&sets.source, s_train), (&sets.target, t_train), (&plain_union, &both_idx), (&coral_union, &both_idx)];

    let mut predictors = Vec::with_capacity(4);
    let mut fits = Vec::with_capacity(4);
    for (v, (data, idx)) in jobs.iter().enumerate() {
        let seed = cfg.seed_for(fold.index, 100 + 10 * kind as u64 + v as u64);
        let (net, fit) = fit_predictor(cfg.preset, *data, idx, &cfg.predictor, seed)?;
        predictors.push(net);
        fits.push(fit);
    }
    Ok(BaselineArtifacts { subspace, predictors, fits, pairing })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFoldMetrics {
    pub fold: usize,
    pub kind: SubspaceKind,
    pub table: MaeTable,
    /// Correlation per latent component between label-paired source and
    /// target training runs.
    pub pearson: PearsonReport,
    /// Latent time-step FID, source vs target.
    pub latent_fid_before: f64,
    /// Latent time-step FID, CORAL-recolored source vs target.
    pub latent_fid_after: f64,
    pub latent_dim: usize,
}

/// PCA and CCA baseline rows for one fold. Predictions are converted to the label
/// units of the domain they are scored on.
pub fn evaluate_baseline_fold(fold: &FoldData, art: &BaselineArtifacts) -> Result<BaselineFoldMetrics> {
    if art.predictors.len() != BASELINE_VARIANTS.len() {
        return Err(Error::Contract(format!("expected {} latent predictors, got {}", BASELINE_VARIANTS.len(), art.predictors.len())));
    }
    let kind = art.subspace.kind;
    let sets = latent_sets(fold, &art.subspace)?;
    let to_target = fold.label_map()?;
    let to_source = to_target.inverse();
    let mut rows = Vec::with_capacity(4);
    for (v, name) in BASELINE_VARIANTS.iter().enumerate() {
        let net = &art.predictors[v];
        // which units the predictor speaks
        let source_units = v == 0;
        let source_eval = if *name == "coral_both" { &sets.coral_source } else { &sets.source };
        let source = split_mae(net, source_eval, &fold.source_split, (!source_units).then_some(to_source))?;
        let target = split_mae(net, &sets.target, &fold.target_split, source_units.then_some(to_target))?;
        rows.push(MaeRow { name: baseline_row(kind, name), source, target });
    }

    let (s_train, t_train) = (&fold.source_split.train, &fold.target_split.train);
    let ys: Vec<f64> = s_train.iter().map(|&i| to_target.apply(fold.source.label(i))).collect();
    let yt: Vec<f64> = t_train.iter().map(|&i| fold.target.label(i)).collect();
    let partner: Vec<usize> = pair_by_label(&ys, &yt)?.into_iter().map(|j| t_train[j]).collect();
    let pearson = pearson_per_component(&time_step_rows(&sets.source, s_train)?, &time_step_rows(&sets.target, &partner)?)?;

    let zs = time_step_rows(&sets.source, s_train)?;
    let zc = time_step_rows(&sets.coral_source, s_train)?;
    let zt = time_step_rows(&sets.target, t_train)?;
    Ok(BaselineFoldMetrics {
        fold: fold.index,
        kind,
        table: MaeTable { rows },
        pearson,
        latent_fid_before: fid(&zs, &zt)?,
        latent_fid_after: fid(&zc, &zt)?,
        latent_dim: art.subspace.latent_dim(),
    })
}
