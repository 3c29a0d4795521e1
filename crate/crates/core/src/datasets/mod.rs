//! Dual-equipment benchmark data: generation, preprocessing and splitting.

mod generator;
mod preprocess;
mod split;
mod types;

pub use generator::{generate_pair, generate_pair_with_truth, permutation_equivalent, DomainTruth, GeneratorConfig, SyntheticTruth};
pub use preprocess::{
    apply_normalization, denormalize_label, fit_normalization, preprocess, preprocess_structure, quantile, resample_linear,
    PreprocessParams,
};
pub use split::{kfold_split, Fold};
pub use types::{DomainDataset, DomainTag, LabelAudit, Normalization, PreprocessRecord, SampleSet, SeriesSample, SeriesSet, SubsetView};
