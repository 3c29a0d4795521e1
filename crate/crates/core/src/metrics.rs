//! Evaluation: Fréchet distance between sample sets, per-component Pearson
//! correlation, MAE tables and their fold averages.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{pearson, Projection};
use crate::datasets::SampleSet;
use crate::error::{Error, Result};
use crate::linalg::{covariance, sqrtm_psd, sym_eig, Mat};

/// Dimensions of the shared feature space FID is computed in.
pub const FID_DIMS: usize = 32;

/// Fréchet distance with the negative trace residue that was clamped away.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidResult {
    pub value: f64,
    /// How far below zero the raw value was (0 when it was not).
    pub residue: f64,
}

/// `‖μ_X − μ_Y‖² + tr(Σ_X + Σ_Y − 2·(Σ_X^{1/2} Σ_Y Σ_X^{1/2})^{1/2})`,
/// clamped at 0.
pub fn fid_detailed(x: &Mat, y: &Mat) -> Result<FidResult> {
    if x.cols() != y.cols() {
        return Err(Error::Shape(format!("FID needs equal dims, got {} and {}", x.cols(), y.cols())));
    }
    let (mx, my) = (x.column_means(), y.column_means());
    let mean_gap: f64 = mx.iter().zip(&my).map(|(a, b)| (a - b) * (a - b)).sum();
    let (sx, sy) = (covariance(x, false)?, covariance(y, false)?);
    let root_x = sqrtm_psd(&sx)?;
    let cross = sqrtm_psd(&root_x.matmul(&sy)?.matmul(&root_x)?.symmetrized())?;
    let raw = mean_gap + sx.trace() + sy.trace() - 2.0 * cross.trace();
    Ok(FidResult { value: raw.max(0.0), residue: (-raw).max(0.0) })
}

pub fn fid(x: &Mat, y: &Mat) -> Result<f64> {
    Ok(fid_detailed(x, y)?.value)
}

/// Per-component correlations; degenerate components report 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonReport {
    pub r: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl PearsonReport {
    pub fn count_above(&self, threshold: f64) -> usize {
        self.r.iter().filter(|r| **r > threshold).count()
    }
}

/// Column-wise Pearson correlation of two row-paired matrices.
pub fn pearson_per_component(a: &Mat, b: &Mat) -> Result<PearsonReport> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::Shape(format!(
            "paired matrices differ: {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if a.cols() == 0 {
        return Err(Error::Shape(format!("no components to correlate")));
    }
    let (mut r, mut degenerate) = (Vec::new(), Vec::new());
    for j in 0..a.cols() {
        let v = pearson(&a.column(j), &b.column(j));
        r.push(v.unwrap_or(0.0));
        degenerate.push(v.is_none());
    }
    Ok(PearsonReport { r, degenerate })
}

/// One row per run: the whole `len x channels` series flattened.
pub fn flatten_runs<S: SampleSet + ?Sized>(data: &S, indices: &[usize]) -> Result<Mat> {
    let width = data.series_len() * data.channels();
    let mut rows = Vec::with_capacity(indices.len() * width);
    for &i in indices {
        rows.extend_from_slice(data.series(i));
    }
    Mat::from_vec(indices.len(), width, rows)
}

/// PCA of flattened runs, fitted once and shared by every set compared in
/// it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidSpace {
    pub projection: Projection,
}

impl FidSpace {
    /// Fits at most `dims` components (fewer if the data has fewer columns
    /// or rows).
    pub fn fit(flat: &Mat, dims: usize) -> Result<Self> {
        let k = dims.min(flat.cols()).min(flat.rows().saturating_sub(1));
        if k == 0 {
            return Err(Error::InsufficientSamples { needed: 2, got: flat.rows() });
        }
        let eig = sym_eig(&covariance(flat, false)?)?;
        let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
        let explained = eig.values[..k].iter().map(|v| if total > 0.0 { v.max(0.0) / total } else { 0.0 }).collect();
        Ok(Self { projection: Projection { mean: flat.column_means(), weights: eig.vectors.leading_columns(k), explained } })
    }

    pub fn embed(&self, flat: &Mat) -> Result<Mat> {
        self.projection.apply(flat)
    }
}

/// Splits `0..n` into two seeded halves.
pub fn random_halves(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let second = idx.split_off(n / 2);
    (idx, second)
}

/// Inner versus outer domain distance.
///
/// Inner distances compare two random halves of one domain. The outer
/// distance compares source runs with target runs mapped into the source
/// space, before (untrained aligner) and after alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainDistanceReport {
    pub inner_source: f64,
    pub inner_target: f64,
    pub outer_before: f64,
    pub outer_after: f64,
    pub n_source: usize,
    pub n_target: usize,
    pub dims: usize,
}

impl DomainDistanceReport {
    pub fn mean(reports: &[DomainDistanceReport]) -> Option<DomainDistanceReport> {
        let n = reports.len() as f64;
        let first = reports.first()?;
        let avg = |f: fn(&DomainDistanceReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(DomainDistanceReport {
            inner_source: avg(|r| r.inner_source),
            inner_target: avg(|r| r.inner_target),
            outer_before: avg(|r| r.outer_before),
            outer_after: avg(|r| r.outer_after),
            n_source: first.n_source,
            n_target: first.n_target,
            dims: first.dims,
        })
    }
}

/// MAE on the train and test split of one domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaePair {
    pub train: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeRow {
    pub name: String,
    pub source: MaePair,
    pub target: MaePair,
}

/// Rows of models × columns {source train, source test, target train,
/// target test}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeTable {
    pub rows: Vec<MaeRow>,
}

pub const TABLE_HEADER: &str = "model,source_train,source_test,target_train,target_test";

impl MaeTable {
    pub fn row(&self, name: &str) -> Option<&MaeRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TABLE_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.name, r.source.train, r.source.test, r.target.train, r.target.test
            ));
        }
        out
    }

    /// Cellwise arithmetic mean of tables with identical row names.
    pub fn mean(tables: &[MaeTable]) -> Result<MaeTable> {
        let first = tables.first().ok_or(Error::InsufficientSamples { needed: 1, got: 0 })?;
        for t in tables {
            let same = t.rows.len() == first.rows.len() && t.rows.iter().zip(&first.rows).all(|(a, b)| a.name == b.name);
            if !same {
                return Err(Error::Contract(format!("fold tables have different rows")));
            }
        }
        let n = tables.len() as f64;
        let rows = first
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let avg = |f: fn(&MaeRow) -> f64| tables.iter().map(|t| f(&t.rows[i])).sum::<f64>() / n;
                MaeRow {
                    name: r.name.clone(),
                    source: MaePair { train: avg(|r| r.source.train), test: avg(|r| r.source.test) },
                    target: MaePair { train: avg(|r| r.target.train), test: avg(|r| r.target.test) },
                }
            })
            .collect();
        Ok(MaeTable { rows })
    }
}
