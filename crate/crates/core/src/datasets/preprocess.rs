use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::types::{DomainDataset, Normalization, PreprocessRecord, SeriesSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessParams {
    pub iqr_multiplier: f64,
    /// Per-sample peak-to-peak bound for a noise-constant channel.
    pub noise_range: f64,
    /// Per-step least-squares slope bound for a noise-constant channel.
    pub noise_slope: f64,
    /// Share of samples that must look constant for the channel to go.
    pub noise_fraction: f64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self { iqr_multiplier: 1.5, noise_range: 0.01, noise_slope: 1e-4, noise_fraction: 0.95 }
    }
}

/// Linear-interpolated quantile of unsorted data, `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn channel_values<'a>(s: &'a SeriesSample, c: usize, channels: usize) -> impl Iterator<Item = f64> + 'a {
    s.values.iter().skip(c).step_by(channels).copied()
}

fn keep_channels(ds: &mut DomainDataset, keep: &[bool]) -> Vec<String> {
    let c = ds.channels();
    let removed = ds.channel_names.iter().zip(keep).filter(|(_, k)| !**k).map(|(n, _)| n.clone()).collect();
    ds.channel_names = ds.channel_names.iter().zip(keep).filter(|(_, k)| **k).map(|(n, _)| n.clone()).collect();
    for s in &mut ds.samples {
        s.values = s.values.iter().enumerate().filter(|(i, _)| keep[i % c]).map(|(_, v)| *v).collect();
    }
    removed
}

fn collapse_check(ds: &DomainDataset, step: &str) -> Result<()> {
    if ds.channels() == 0 {
        return Err(Error::PipelineCollapse(format!("{step} removed every channel")));
    }
    if ds.is_empty() {
        return Err(Error::PipelineCollapse(format!("{step} removed every sample")));
    }
    Ok(())
}

fn drop_constant(ds: &mut DomainDataset) -> Result<()> {
    let c = ds.channels();
    let keep: Vec<bool> = (0..c)
        .map(|k| {
            let first = ds.samples[0].values[k];
            ds.samples.iter().any(|s| channel_values(s, k, c).any(|v| v != first))
        })
        .collect();
    let removed = keep_channels(ds, &keep);
    ds.push_log(PreprocessRecord::DropConstantChannels { removed });
    collapse_check(ds, "constant-channel removal")
}

/// Least-squares slope of `y` against its step index.
fn slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    if y.len() < 2 {
        return 0.0;
    }
    let tm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dt = i as f64 - tm;
        sxy += dt * (v - ym);
        sxx += dt * dt;
    }
    sxy / sxx
}

fn drop_noise_constant(ds: &mut DomainDataset, p: &PreprocessParams) -> Result<()> {
    let c = ds.channels();
    let keep: Vec<bool> = (0..c)
        .map(|k| {
            let flat = ds
                .samples
                .iter()
                .filter(|s| {
                    let y: Vec<f64> = channel_values(s, k, c).collect();
                    let hi = y.iter().copied().fold(f64::MIN, f64::max);
                    let lo = y.iter().copied().fold(f64::MAX, f64::min);
                    hi - lo < p.noise_range && slope(&y).abs() < p.noise_slope
                })
                .count();
            (flat as f64) < p.noise_fraction * ds.len() as f64
        })
        .collect();
    let removed = keep_channels(ds, &keep);
    ds.push_log(PreprocessRecord::DropNoiseConstantChannels { removed });
    collapse_check(ds, "noise-constant-channel removal")
}

fn retain_samples(ds: &mut DomainDataset, keep: impl Fn(&SeriesSample) -> bool) -> Vec<u64> {
    let (kept, dropped): (Vec<_>, Vec<_>) = core::mem::take(&mut ds.samples).into_iter().partition(|s| keep(s));
    ds.samples = kept;
    dropped.into_iter().map(|s| s.id).collect()
}

fn drop_label_outliers(ds: &mut DomainDataset, p: &PreprocessParams) -> Result<()> {
    let labels = ds.labels();
    let q1 = quantile(&labels, 0.25);
    let q3 = quantile(&labels, 0.75);
    let iqr = q3 - q1;
    let (lower, upper) = (q1 - p.iqr_multiplier * iqr, q3 + p.iqr_multiplier * iqr);
    let removed = retain_samples(ds, |s| s.label >= lower && s.label <= upper);
    ds.push_log(PreprocessRecord::DropLabelOutliers { lower, upper, removed });
    collapse_check(ds, "label-outlier removal")
}

fn drop_length_outliers(ds: &mut DomainDataset) -> Result<()> {
    let lens: Vec<f64> = ds.samples.iter().map(|s| s.raw_len as f64).collect();
    let (lower, upper) = (quantile(&lens, 0.25), quantile(&lens, 0.75));
    let removed = retain_samples(ds, |s| (s.raw_len as f64) >= lower && (s.raw_len as f64) <= upper);
    ds.push_log(PreprocessRecord::DropLengthOutliers { lower, upper, removed });
    collapse_check(ds, "length-outlier removal")
}

/// Linear interpolation of a `len x channels` series onto `target` evenly
/// spaced points spanning the same time range.
pub fn resample_linear(values: &[f64], channels: usize, target: usize) -> Vec<f64> {
    let len = values.len() / channels;
    if len == target {
        return values.to_vec();
    }
    let mut out = Vec::with_capacity(target * channels);
    for i in 0..target {
        let pos = if target > 1 { i as f64 * (len - 1) as f64 / (target - 1) as f64 } else { 0.0 };
        let lo = (pos as usize).min(len - 1);
        let hi = (lo + 1).min(len - 1);
        let w = pos - lo as f64;
        for c in 0..channels {
            let a = values[lo * channels + c];
            let b = values[hi * channels + c];
            out.push(a + w * (b - a));
        }
    }
    out
}

fn resample(ds: &mut DomainDataset) -> Result<()> {
    let c = ds.channels();
    let lens: Vec<f64> = ds.samples.iter().map(|s| s.len(c) as f64).collect();
    let target = libm::round(quantile(&lens, 0.5)) as usize;
    if target < 2 {
        return Err(Error::PipelineCollapse(format!("median series length {target} is too short")));
    }
    for s in &mut ds.samples {
        s.values = resample_linear(&s.values, c, target);
    }
    ds.push_log(PreprocessRecord::Resample { len: target });
    Ok(())
}

/// Steps 1–5: constant and noise-constant channels, label and length
/// outliers, then resampling to the median retained length.
pub fn preprocess_structure(raw: &DomainDataset, params: &PreprocessParams) -> Result<DomainDataset> {
    if raw.is_empty() {
        return Err(Error::PipelineCollapse(format!("{} dataset is empty", raw.tag.as_str())));
    }
    let mut ds = raw.clone();
    drop_constant(&mut ds)?;
    drop_noise_constant(&mut ds, params)?;
    drop_label_outliers(&mut ds, params)?;
    drop_length_outliers(&mut ds)?;
    resample(&mut ds)?;
    Ok(ds)
}

/// Full pipeline: structural steps followed by min-max normalization fitted
/// on every retained sample.
pub fn preprocess(raw: &DomainDataset, params: &PreprocessParams) -> Result<DomainDataset> {
    let ds = preprocess_structure(raw, params)?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let norm = fit_normalization(&ds, &all)?;
    Ok(apply_normalization(&ds, &norm))
}

/// Per-channel and label min/max over the selected samples.
pub fn fit_normalization(ds: &DomainDataset, indices: &[usize]) -> Result<Normalization> {
    if indices.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let c = ds.channels();
    let mut channel_min = alloc::vec![f64::INFINITY; c];
    let mut channel_max = alloc::vec![f64::NEG_INFINITY; c];
    let (mut label_min, mut label_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in indices {
        let s = &ds.samples[i];
        for (k, v) in s.values.iter().enumerate() {
            channel_min[k % c] = channel_min[k % c].min(*v);
            channel_max[k % c] = channel_max[k % c].max(*v);
        }
        label_min = label_min.min(s.label);
        label_max = label_max.max(s.label);
    }
    Ok(Normalization { channel_min, channel_max, label_min, label_max })
}

fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span > 0.0 {
        (v - lo) / span
    } else {
        v - lo
    }
}

/// Applies fixed min-max constants to every sample; never refits.
pub fn apply_normalization(ds: &DomainDataset, norm: &Normalization) -> DomainDataset {
    let c = ds.channels();
    let mut out = ds.clone();
    for s in &mut out.samples {
        for (k, v) in s.values.iter_mut().enumerate() {
            *v = scale(*v, norm.channel_min[k % c], norm.channel_max[k % c]);
        }
        s.label = scale(s.label, norm.label_min, norm.label_max);
    }
    out.push_log(PreprocessRecord::Normalize(norm.clone()));
    out
}

/// Maps a normalized label back to raw units.
pub fn denormalize_label(norm: &Normalization, y: f64) -> f64 {
    let span = norm.label_max - norm.label_min;
    if span > 0.0 {
        norm.label_min + y * span
    } else {
        norm.label_min + y
    }
}
