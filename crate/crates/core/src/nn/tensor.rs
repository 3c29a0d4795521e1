use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Batch of sequences laid out as `[batch][len][channels]`.
///
/// Dense outputs after a flatten are represented with `len == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    batch: usize,
    len: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(batch: usize, len: usize, channels: usize) -> Self {
        Self { batch, len, channels, data: vec![0.0; batch * len * channels] }
    }

    pub fn filled(batch: usize, len: usize, channels: usize, value: f64) -> Self {
        Self { batch, len, channels, data: vec![value; batch * len * channels] }
    }

    pub fn from_vec(batch: usize, len: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * len * channels {
            return Err(Error::Shape(format!(
                "tensor {batch}x{len}x{channels} needs {} values, got {}",
                batch * len * channels,
                data.len()
            )));
        }
        Ok(Self { batch, len, channels, data })
    }

    /// Stacks equally shaped `len x channels` samples into one batch.
    pub fn stack<'a>(samples: impl IntoIterator<Item = &'a [f64]>, len: usize, channels: usize) -> Result<Self> {
        let mut data = Vec::new();
        let mut batch = 0;
        for s in samples {
            if s.len() != len * channels {
                return Err(Error::Shape(format!(
                    "sample {batch} has {} values, expected {len}x{channels}",
                    s.len()
                )));
            }
            data.extend_from_slice(s);
            batch += 1;
        }
        Ok(Self { batch, len, channels, data })
    }

    #[inline]
    pub fn batch(&self) -> usize {
        self.batch
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.len, self.channels)
    }

    #[inline]
    pub fn sample_size(&self) -> usize {
        self.len * self.channels
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn sample(&self, b: usize) -> &[f64] {
        let n = self.sample_size();
        &self.data[b * n..(b + 1) * n]
    }

    #[inline]
    pub fn sample_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.sample_size();
        &mut self.data[b * n..(b + 1) * n]
    }

    #[inline]
    pub fn at(&self, b: usize, t: usize, c: usize) -> f64 {
        self.data[(b * self.len + t) * self.channels + c]
    }

    #[inline]
    pub fn at_mut(&mut self, b: usize, t: usize, c: usize) -> &mut f64 {
        &mut self.data[(b * self.len + t) * self.channels + c]
    }

    /// Same data viewed as a different shape.
    pub fn reshaped(self, len: usize, channels: usize) -> Result<Self> {
        if len * channels != self.len * self.channels {
            return Err(Error::Shape(format!(
                "cannot reshape {}x{} samples to {len}x{channels}",
                self.len, self.channels
            )));
        }
        Ok(Self { batch: self.batch, len, channels, data: self.data })
    }

    /// Selects batch entries by index.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.sample_size());
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        Self { batch: indices.len(), len: self.len, channels: self.channels, data }
    }

    /// One scalar per batch entry; requires a `1 x 1` sample shape.
    pub fn scalars(&self) -> Result<&[f64]> {
        if self.sample_size() != 1 {
            return Err(Error::Shape(format!("expected scalar outputs, got {}x{}", self.len, self.channels)));
        }
        Ok(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape() == other.shape()
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Shape(format!("{:?} += {:?}", self.shape(), other.shape())));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}
