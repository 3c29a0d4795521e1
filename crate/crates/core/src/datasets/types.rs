use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nn::Tensor;

/// One process run: a `len x channels` series (row-major by time step) and
/// its metrology label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub id: u64,
    pub values: Vec<f64>,
    pub label: f64,
    /// Number of time steps before resampling.
    pub raw_len: usize,
}

impl SeriesSample {
    pub fn len(&self, channels: usize) -> usize {
        if channels == 0 {
            0
        } else {
            self.values.len() / channels
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Source,
    Target,
}

impl DomainTag {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainTag::Source => "source",
            DomainTag::Target => "target",
        }
    }
}

/// Min-max constants per channel and for the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub channel_min: Vec<f64>,
    pub channel_max: Vec<f64>,
    pub label_min: f64,
    pub label_max: f64,
}

/// Applied preprocessing step, in application order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum PreprocessRecord {
    DropConstantChannels { removed: Vec<String> },
    DropNoiseConstantChannels { removed: Vec<String> },
    DropLabelOutliers { lower: f64, upper: f64, removed: Vec<u64> },
    DropLengthOutliers { lower: f64, upper: f64, removed: Vec<u64> },
    Resample { len: usize },
    Normalize(Normalization),
}

/// Samples from one equipment type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDataset {
    pub tag: DomainTag,
    pub channel_names: Vec<String>,
    pub samples: Vec<SeriesSample>,
    log: Vec<PreprocessRecord>,
}

impl DomainDataset {
    pub fn new(tag: DomainTag, channel_names: Vec<String>, samples: Vec<SeriesSample>) -> Result<Self> {
        let c = channel_names.len();
        for s in &samples {
            if c == 0 || s.values.len() % c != 0 {
                return Err(Error::Data(format!(
                    "sample {} has {} values, not a multiple of {c} channels",
                    s.id,
                    s.values.len()
                )));
            }
            if s.values.iter().any(|v| !v.is_finite()) || !s.label.is_finite() {
                return Err(Error::Data(format!("sample {} contains non-finite values", s.id)));
            }
        }
        Ok(Self { tag, channel_names, samples, log: Vec::new() })
    }

    /// Rebuilds a dataset with an existing preprocessing log (for loaders).
    pub fn with_log(mut self, log: Vec<PreprocessRecord>) -> Self {
        self.log = log;
        self
    }

    pub fn log(&self) -> &[PreprocessRecord] {
        &self.log
    }

    pub(crate) fn push_log(&mut self, record: PreprocessRecord) {
        self.log.push(record);
    }

    pub fn channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Common series length, if every sample has the same one.
    pub fn uniform_len(&self) -> Option<usize> {
        let c = self.channels();
        let first = self.samples.first()?.len(c);
        self.samples.iter().all(|s| s.len(c) == first).then_some(first)
    }

    /// Most recent normalization constants, if any.
    pub fn normalization(&self) -> Option<&Normalization> {
        self.log.iter().rev().find_map(|r| match r {
            PreprocessRecord::Normalize(n) => Some(n),
            _ => None,
        })
    }

    pub fn labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> DomainDataset {
        DomainDataset {
            tag: self.tag,
            channel_names: self.channel_names.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            log: self.log.clone(),
        }
    }

    /// Stacks the selected samples into a tensor; requires uniform length.
    pub fn tensor(&self, indices: &[usize]) -> Result<Tensor> {
        let len = self.uniform_len().ok_or_else(|| Error::Data(format!("{} samples have unequal lengths", self.tag.as_str())))?;
        Tensor::stack(indices.iter().map(|&i| self.samples[i].values.as_slice()), len, self.channels())
    }

    pub fn all_tensor(&self) -> Result<Tensor> {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.tensor(&idx)
    }

    /// Flattens every time step of the selected samples into one row
    /// (`samples·len x channels`).
    pub fn time_step_rows(&self, indices: &[usize]) -> Result<Mat> {
        let c = self.channels();
        let mut data = Vec::new();
        for &i in indices {
            data.extend_from_slice(&self.samples[i].values);
        }
        let rows = data.len() / c.max(1);
        Mat::from_vec(rows, c, data)
    }
}

/// Read access to a labeled collection of equal-shape series.
///
/// DBACS training consumes datasets through this trait so label reads can
/// be audited.
pub trait SampleSet {
    fn num_samples(&self) -> usize;
    fn series_len(&self) -> usize;
    fn channels(&self) -> usize;
    fn series(&self, i: usize) -> &[f64];
    fn label(&self, i: usize) -> f64;

    fn batch(&self, indices: &[usize]) -> Result<Tensor> {
        Tensor::stack(indices.iter().map(|&i| self.series(i)), self.series_len(), self.channels())
    }
}

impl SampleSet for DomainDataset {
    fn num_samples(&self) -> usize {
        self.len()
    }

    fn series_len(&self) -> usize {
        self.uniform_len().unwrap_or(0)
    }

    fn channels(&self) -> usize {
        self.channel_names.len()
    }

    fn series(&self, i: usize) -> &[f64] {
        &self.samples[i].values
    }

    fn label(&self, i: usize) -> f64 {
        self.samples[i].label
    }
}

/// Restricts a `SampleSet` to a subset of indices.
pub struct SubsetView<'a, S: SampleSet + ?Sized> {
    inner: &'a S,
    indices: &'a [usize],
}

impl<'a, S: SampleSet + ?Sized> SubsetView<'a, S> {
    pub fn new(inner: &'a S, indices: &'a [usize]) -> Self {
        Self { inner, indices }
    }
}

impl<S: SampleSet + ?Sized> SampleSet for SubsetView<'_, S> {
    fn num_samples(&self) -> usize {
        self.indices.len()
    }
    fn series_len(&self) -> usize {
        self.inner.series_len()
    }
    fn channels(&self) -> usize {
        self.inner.channels()
    }
    fn series(&self, i: usize) -> &[f64] {
        self.inner.series(self.indices[i])
    }
    fn label(&self, i: usize) -> f64 {
        self.inner.label(self.indices[i])
    }
}

/// Counts label reads on the wrapped set.
pub struct LabelAudit<'a, S: SampleSet + ?Sized> {
    inner: &'a S,
    reads: Cell<usize>,
}

impl<'a, S: SampleSet + ?Sized> LabelAudit<'a, S> {
    pub fn new(inner: &'a S) -> Self {
        Self { inner, reads: Cell::new(0) }
    }

    pub fn label_reads(&self) -> usize {
        self.reads.get()
    }
}

impl<S: SampleSet + ?Sized> SampleSet for LabelAudit<'_, S> {
    fn num_samples(&self) -> usize {
        self.inner.num_samples()
    }
    fn series_len(&self) -> usize {
        self.inner.series_len()
    }
    fn channels(&self) -> usize {
        self.inner.channels()
    }
    fn series(&self, i: usize) -> &[f64] {
        self.inner.series(i)
    }
    fn label(&self, i: usize) -> f64 {
        self.reads.set(self.reads.get() + 1);
        self.inner.label(i)
    }
}

/// Owned equal-shape series with labels, e.g. latent projections or
/// aligned runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSet {
    len: usize,
    channels: usize,
    series: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

impl SeriesSet {
    pub fn new(len: usize, channels: usize, series: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if series.len() != labels.len() {
            return Err(Error::Shape(format!("{} series vs {} labels", series.len(), labels.len())));
        }
        if let Some(i) = series.iter().position(|s| s.len() != len * channels) {
            return Err(Error::Shape(format!("series {i} has {} values, expected {}", series[i].len(), len * channels)));
        }
        Ok(Self { len, channels, series, labels })
    }

    /// Splits a batch tensor into per-sample series.
    pub fn from_tensor(x: &Tensor, labels: Vec<f64>) -> Result<Self> {
        let series = (0..x.batch()).map(|b| x.sample(b).to_vec()).collect();
        Self::new(x.len(), x.channels(), series, labels)
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }
}

impl SampleSet for SeriesSet {
    fn num_samples(&self) -> usize {
        self.series.len()
    }
    fn series_len(&self) -> usize {
        self.len
    }
    fn channels(&self) -> usize {
        self.channels
    }
    fn series(&self, i: usize) -> &[f64] {
        &self.series[i]
    }
    fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }
}
