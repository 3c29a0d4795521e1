//! Linear alignment baselines: PCA subspaces, CORAL whiten-recolor and CCA
//! weight pairs.
//!
//! Time series enter as time-step rows (`samples·len x channels`), so every
//! time step is treated as its own observation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{SampleSet, SeriesSet};
use crate::dbacs::pair_by_label;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, covariance, floor_spectrum, inv_sqrtm_floored, solve_lower, solve_upper_transposed, spd_solve, sqrtm_psd, sym_eig, Mat, RIDGE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceKind {
    Pca,
    Cca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Source,
    Target,
}

/// Centering mean and `d x k` projection weights for one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub mean: Vec<f64>,
    pub weights: Mat,
    /// Explained-variance ratios of the kept components (PCA only).
    pub explained: Vec<f64>,
}

impl Projection {
    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.weights.cols()
    }

    /// `(X − mean)·W`.
    pub fn apply(&self, x: &Mat) -> Result<Mat> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!("projection expects {} columns, got {}", self.input_dim(), x.cols())));
        }
        x.center_with(&self.mean)?.matmul(&self.weights)
    }

    /// `Z·Wᵀ + mean`; the least-squares inverse when `W` has orthonormal
    /// columns.
    pub fn reconstruct(&self, z: &Mat) -> Result<Mat> {
        let mut x = z.matmul(&self.weights.transpose())?;
        for i in 0..x.rows() {
            for (v, m) in x.row_mut(i).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(x)
    }
}

/// Fitted CORAL map `z ↦ (z − source_mean)·A + target_mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coral {
    pub a: Mat,
    pub source_mean: Vec<f64>,
    pub target_mean: Vec<f64>,
}

impl Coral {
    pub fn apply(&self, z: &Mat) -> Result<Mat> {
        let mut out = z.center_with(&self.source_mean)?.matmul(&self.a)?;
        for i in 0..out.rows() {
            for (v, m) in out.row_mut(i).iter_mut().zip(&self.target_mean) {
                *v += m;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceModel {
    pub kind: SubspaceKind,
    pub source: Option<Projection>,
    pub target: Option<Projection>,
    /// Canonical correlations, descending (CCA only).
    pub correlations: Vec<f64>,
    pub coral: Option<Coral>,
}

impl SubspaceModel {
    pub fn projection(&self, side: Side) -> Result<&Projection> {
        match side {
            Side::Source => self.source.as_ref(),
            Side::Target => self.target.as_ref(),
        }
        .ok_or_else(|| Error::Contract(format!("{:?} model has no {side:?} projection", self.kind)))
    }

    pub fn latent_dim(&self) -> usize {
        self.source.as_ref().or(self.target.as_ref()).map_or(0, Projection::latent_dim)
    }
}

fn pca_projection(x: &Mat, k: usize) -> Result<Projection> {
    let (n, d) = (x.rows(), x.cols());
    if k == 0 || k > d {
        return Err(Error::Config(format!("PCA needs 1 <= k <= {d}, got {k}")));
    }
    if n <= k {
        return Err(Error::InsufficientSamples { needed: k + 1, got: n });
    }
    let mean = x.column_means();
    let eig = sym_eig(&covariance(x, false)?)?;
    let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
    let explained = eig.values[..k]
        .iter()
        .map(|v| if total > 0.0 { v.max(0.0) / total } else { 0.0 })
        .collect();
    Ok(Projection { mean, weights: eig.vectors.leading_columns(k), explained })
}

/// Top-`k` principal components of `x`, stored as the source projection.
pub fn pca_fit(x: &Mat, k: usize) -> Result<SubspaceModel> {
    Ok(SubspaceModel {
        kind: SubspaceKind::Pca,
        source: Some(pca_projection(x, k)?),
        target: None,
        correlations: Vec::new(),
        coral: None,
    })
}

/// Separate `k`-component PCAs of both domains.
pub fn pca_pair(source: &Mat, target: &Mat, k: usize) -> Result<SubspaceModel> {
    Ok(SubspaceModel {
        kind: SubspaceKind::Pca,
        source: Some(pca_projection(source, k)?),
        target: Some(pca_projection(target, k)?),
        correlations: Vec::new(),
        coral: None,
    })
}

/// Explained-variance ratios of every component of `x`, descending.
pub fn explained_variance(x: &Mat) -> Result<Vec<f64>> {
    let eig = sym_eig(&covariance(x, false)?)?;
    let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
    Ok(eig.values.iter().map(|v| if total > 0.0 { v.max(0.0) / total } else { 0.0 }).collect())
}

/// Smallest `k` whose cumulative ratio reaches `threshold` (at least 1);
/// sums within 1e-12 of the threshold count as reaching it.
pub fn select_k_by_variance(ratios: &[f64], threshold: f64) -> Result<usize> {
    let total: f64 = ratios.iter().sum();
    if ratios.is_empty() || total > 1.0 + 1e-9 {
        return Err(Error::Contract(format!("ratios must be nonempty and sum to at most 1, got sum {total}")));
    }
    let mut cum = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        cum += r;
        if cum >= threshold - 1e-12 {
            return Ok(i + 1);
        }
    }
    Err(Error::Config(format!("threshold {threshold} exceeds total coverage {total}")))
}

/// CORAL between two latent sets: `A = C_S^{-1/2}·C_T^{1/2}` with the
/// source spectrum floored before whitening, and the recolored source.
pub fn coral_align(s_lat: &Mat, t_lat: &Mat) -> Result<(Coral, Mat)> {
    if s_lat.cols() != t_lat.cols() {
        return Err(Error::Shape(format!("CORAL needs equal latent dims, got {} and {}", s_lat.cols(), t_lat.cols())));
    }
    let cs = covariance(s_lat, false)?;
    let ct = covariance(t_lat, false)?;
    let a = inv_sqrtm_floored(&cs, RIDGE)?.matmul(&sqrtm_psd(&ct)?)?;
    let coral = Coral { a, source_mean: s_lat.column_means(), target_mean: t_lat.column_means() };
    let aligned = coral.apply(s_lat)?;
    Ok((coral, aligned))
}

/// Cross-covariance `Σ (s_i − μ_S)(t_i − μ_T)ᵀ / (n − 1)`.
pub fn cross_covariance(s: &Mat, t: &Mat) -> Result<Mat> {
    let n = s.rows();
    if t.rows() != n {
        return Err(Error::Shape(format!("paired views need equal rows, got {n} and {}", t.rows())));
    }
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let sc = s.center_with(&s.column_means())?;
    let tc = t.center_with(&t.column_means())?;
    Ok(sc.transpose().matmul(&tc)?.scale(1.0 / (n - 1) as f64))
}

/// Pearson correlation of two equal-length vectors; `None` if either has
/// zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len().min(b.len());
    if n < 2 {
        return None;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

/// CCA on row-paired views.
///
/// With `C_SS = L·Lᵀ` the generalized problem
/// `C_ST·C_TT⁻¹·C_TS·w = ρ²·C_SS·w` becomes the symmetric problem
/// `L⁻¹·C_ST·C_TT⁻¹·C_TS·L⁻ᵀ·u = ρ²·u` with `w_S = L⁻ᵀ·u`, and
/// `w_T = C_TT⁻¹·C_TS·w_S / ρ`. Both weights have unit canonical variance
/// under the floored covariances. The reported correlations are
/// the Pearson correlations of the training variates.
pub fn cca_fit(s: &Mat, t: &Mat, k: usize) -> Result<SubspaceModel> {
    let n = s.rows();
    if t.rows() != n {
        return Err(Error::Shape(format!("paired views need equal rows, got {n} and {}", t.rows())));
    }
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let max_k = s.cols().min(t.cols());
    if k == 0 || k > max_k {
        return Err(Error::Config(format!("CCA needs 1 <= k <= {max_k}, got {k}")));
    }
    let css = floor_spectrum(&covariance(s, false)?, RIDGE)?;
    let ctt = floor_spectrum(&covariance(t, false)?, RIDGE)?;
    let cst = cross_covariance(s, t)?;
    let l = cholesky(&css)?;
    // C_TT⁻¹·C_TS
    let back = spd_solve(&ctt, &cst.transpose())?;
    let inner = cst.matmul(&back)?.symmetrized();
    let half = solve_lower(&l, &inner)?;
    let m = solve_lower(&l, &half.transpose())?.symmetrized();
    let eig = sym_eig(&m)?;
    let rho: Vec<f64> = eig.values[..k].iter().map(|v| libm::sqrt(v.max(0.0))).collect();
    if let Some((i, r)) = rho.iter().enumerate().find(|(_, r)| **r < 1e-12) {
        return Err(Error::Contract(format!("canonical correlation {i} is {r:e}; k = {k} exceeds the cross-covariance rank")));
    }
    let w_s = solve_upper_transposed(&l, &eig.vectors.leading_columns(k))?;
    let mut w_t = back.matmul(&w_s)?;
    for i in 0..w_t.rows() {
        for (v, r) in w_t.row_mut(i).iter_mut().zip(&rho) {
            *v /= r;
        }
    }
    let source = Projection { mean: s.column_means(), weights: w_s, explained: Vec::new() };
    let target = Projection { mean: t.column_means(), weights: w_t, explained: Vec::new() };
    let zs = source.apply(s)?;
    let zt = target.apply(t)?;
    let correlations = (0..k).map(|j| pearson(&zs.column(j), &zt.column(j)).unwrap_or(0.0)).collect();
    Ok(SubspaceModel { kind: SubspaceKind::Cca, source: Some(source), target: Some(target), correlations, coral: None })
}

/// Latent coordinates of `x` on one side, centered by the stored mean.
pub fn project(model: &SubspaceModel, x: &Mat, side: Side) -> Result<Mat> {
    model.projection(side)?.apply(x)
}

/// Every time step of the selected runs as one row (`len·|indices| x C`).
pub fn time_step_rows<S: SampleSet + ?Sized>(data: &S, indices: &[usize]) -> Result<Mat> {
    let (len, c) = (data.series_len(), data.channels());
    let mut rows = Vec::with_capacity(indices.len() * len * c);
    for &i in indices {
        rows.extend_from_slice(data.series(i));
    }
    Mat::from_vec(indices.len() * len, c, rows)
}

/// Inverse of [`time_step_rows`]: regroups consecutive blocks of `len` rows
/// into runs.
pub fn rows_to_series(rows: &Mat, len: usize, labels: Vec<f64>) -> Result<SeriesSet> {
    if len == 0 || rows.rows() != len * labels.len() {
        return Err(Error::Shape(format!("{} rows do not split into {} runs of {len}", rows.rows(), labels.len())));
    }
    let block = len * rows.cols();
    let series = rows.as_slice().chunks(block).map(<[f64]>::to_vec).collect();
    SeriesSet::new(len, rows.cols(), series, labels)
}

/// Projects the selected runs step by step into a `k`-channel latent set.
pub fn latent_series<S: SampleSet + ?Sized>(model: &SubspaceModel, data: &S, indices: &[usize], side: Side) -> Result<SeriesSet> {
    let z = project(model, &time_step_rows(data, indices)?, side)?;
    rows_to_series(&z, data.series_len(), indices.iter().map(|&i| data.label(i)).collect())
}

/// Applies a CORAL map to every time step of a latent set.
pub fn coral_series(coral: &Coral, data: &SeriesSet) -> Result<SeriesSet> {
    let idx: Vec<usize> = (0..data.num_samples()).collect();
    let z = coral.apply(&time_step_rows(data, &idx)?)?;
    rows_to_series(&z, data.series_len(), data.labels().to_vec())
}

/// Row-paired time-step matrices for CCA: every source run is matched to
/// the target run with the closest label and their time steps are paired
/// in order. Returns `(S rows, T rows, target index per source run)`.
pub fn label_paired_rows<S, T>(source: &S, s_idx: &[usize], target: &T, t_idx: &[usize]) -> Result<(Mat, Mat, Vec<usize>)>
where
    S: SampleSet + ?Sized,
    T: SampleSet + ?Sized,
{
    if source.series_len() != target.series_len() {
        return Err(Error::Shape(format!("run lengths differ: {} vs {}", source.series_len(), target.series_len())));
    }
    let ys: Vec<f64> = s_idx.iter().map(|&i| source.label(i)).collect();
    let yt: Vec<f64> = t_idx.iter().map(|&i| target.label(i)).collect();
    let pairing: Vec<usize> = pair_by_label(&ys, &yt)?.into_iter().map(|j| t_idx[j]).collect();
    Ok((time_step_rows(source, s_idx)?, time_step_rows(target, &pairing)?, pairing))
}

/// Candidate component counts `{5, 10, …}` up to `max_k` (`max_k` itself
/// when it is below 5).
pub fn cca_k_grid(max_k: usize) -> Vec<usize> {
    let grid: Vec<usize> = (1..).map(|i| 5 * i).take_while(|k| *k <= max_k).collect();
    if grid.is_empty() && max_k > 0 {
        vec![max_k]
    } else {
        grid
    }
}

/// Picks the grid value with the highest mean held-out canonical
/// correlation. Pairs (blocks of `len` rows) are split 80/20 under `seed`;
/// ties go to the smaller k.
pub fn select_cca_k(s_rows: &Mat, t_rows: &Mat, len: usize, seed: u64) -> Result<usize> {
    let max_k = s_rows.cols().min(t_rows.cols());
    let runs = s_rows.rows() / len.max(1);
    if runs < 5 || s_rows.rows() != t_rows.rows() || runs * len != s_rows.rows() {
        return Err(Error::InsufficientSamples { needed: 5, got: runs });
    }
    let mut order: Vec<usize> = (0..runs).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held = (runs / 5).max(1);
    let gather = |m: &Mat, blocks: &[usize]| -> Result<Mat> {
        let mut data = Vec::with_capacity(blocks.len() * len * m.cols());
        for &b in blocks {
            for r in b * len..(b + 1) * len {
                data.extend_from_slice(m.row(r));
            }
        }
        Mat::from_vec(blocks.len() * len, m.cols(), data)
    };
    let (val, fit) = order.split_at(held);
    let (fs, ft) = (gather(s_rows, fit)?, gather(t_rows, fit)?);
    let (vs, vt) = (gather(s_rows, val)?, gather(t_rows, val)?);
    let full = cca_fit(&fs, &ft, max_k)?;
    let zs = project(&full, &vs, Side::Source)?;
    let zt = project(&full, &vt, Side::Target)?;
    let held_r: Vec<f64> = (0..max_k).map(|j| pearson(&zs.column(j), &zt.column(j)).unwrap_or(0.0)).collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for k in cca_k_grid(max_k) {
        let mean = held_r[..k].iter().sum::<f64>() / k as f64;
        if mean > best.0 {
            best = (mean, k);
        }
    }
    Ok(best.1)
}
