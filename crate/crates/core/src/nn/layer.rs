use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed negative slope of every LeakyReLU.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Left zero padding of `kernel - 1`; output length equals input length.
    Causal,
    /// Valid convolution; output length is `len - kernel + 1`.
    None,
}

/// One layer of a sequential network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d { filters: usize, kernel: usize, padding: Padding },
    /// Applied to the channel axis at every time step.
    Dense { units: usize },
    LeakyRelu,
    Sigmoid,
    /// Identity activation.
    Linear,
    Maxpool1d { size: usize },
    Upsample1d { size: usize },
    Flatten,
}

impl LayerSpec {
    pub fn conv(filters: usize, kernel: usize) -> Self {
        LayerSpec::Conv1d { filters, kernel, padding: Padding::Causal }
    }

    pub fn dense(units: usize) -> Self {
        LayerSpec::Dense { units }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::LeakyRelu => "leaky_relu",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Linear => "linear",
            LayerSpec::Maxpool1d { .. } => "maxpool1d",
            LayerSpec::Upsample1d { .. } => "upsample1d",
            LayerSpec::Flatten => "flatten",
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv1d { .. } | LayerSpec::Dense { .. })
    }

    /// Output `(len, channels)` for an input of `(len, channels)`.
    pub(crate) fn output_shape(&self, index: usize, len: usize, channels: usize) -> Result<(usize, usize)> {
        let fail = |msg: String| Error::Shape(format!("layer {index} ({}): {msg}", self.name()));
        match *self {
            LayerSpec::Conv1d { filters, kernel, padding } => {
                if kernel == 0 || filters == 0 {
                    return Err(fail(format!("kernel {kernel} and filters {filters} must be >= 1")));
                }
                match padding {
                    Padding::Causal => Ok((len, filters)),
                    Padding::None if kernel <= len => Ok((len - kernel + 1, filters)),
                    Padding::None => Err(fail(format!("kernel {kernel} longer than input length {len}"))),
                }
            }
            LayerSpec::Dense { units } => {
                if units == 0 {
                    return Err(fail(String::from("units must be >= 1")));
                }
                Ok((len, units))
            }
            LayerSpec::LeakyRelu | LayerSpec::Sigmoid | LayerSpec::Linear => Ok((len, channels)),
            LayerSpec::Maxpool1d { size } => {
                if size == 0 || len / size == 0 {
                    return Err(fail(format!("pool size {size} does not fit length {len}")));
                }
                Ok((len / size, channels))
            }
            LayerSpec::Upsample1d { size } => {
                if size == 0 {
                    return Err(fail(String::from("upsample size must be >= 1")));
                }
                Ok((len * size, channels))
            }
            LayerSpec::Flatten => Ok((1, len * channels)),
        }
    }
}
