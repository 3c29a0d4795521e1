use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::LayerSpec;

/// Run length the full-size topologies were designed for.
pub const REFERENCE_LEN: usize = 360;
const DESK_FILTER_SCALE: f64 = 0.5;
const DESK_DENSE_CAP: usize = 128;

/// Network size preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchPreset {
    /// Same layer pattern as `PaperArch`; kernels scaled with run length,
    /// half the filters, dense layers capped at 128 units.
    #[default]
    Desk,
    PaperArch,
}

impl ArchPreset {
    pub fn name(self) -> &'static str {
        match self {
            ArchPreset::Desk => "desk",
            ArchPreset::PaperArch => "paper-arch",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(ArchPreset::Desk),
            "paper-arch" => Ok(ArchPreset::PaperArch),
            other => Err(Error::Config(format!("unknown preset '{other}' (expected desk or paper-arch)"))),
        }
    }

    /// Kernel for a run of `len` steps; desk kernels are `k·len/360`
    /// rounded up to the next odd integer.
    pub fn kernel(self, paper_kernel: usize, len: usize) -> usize {
        match self {
            ArchPreset::PaperArch => paper_kernel,
            ArchPreset::Desk => {
                let k = libm::ceil(paper_kernel as f64 * len as f64 / REFERENCE_LEN as f64) as usize;
                (k | 1).max(1)
            }
        }
    }

    pub fn filters(self, paper_filters: usize) -> usize {
        match self {
            ArchPreset::PaperArch => paper_filters,
            ArchPreset::Desk => (libm::round(paper_filters as f64 * DESK_FILTER_SCALE) as usize).max(2),
        }
    }

    pub fn dense(self, paper_units: usize) -> usize {
        match self {
            ArchPreset::PaperArch => paper_units,
            ArchPreset::Desk => paper_units.min(DESK_DENSE_CAP),
        }
    }

    /// Predictor: three causal conv blocks, max pooling, flatten, two dense
    /// layers with a sigmoid output.
    pub fn predictor(self, len: usize) -> Vec<LayerSpec> {
        let mut layers = Vec::new();
        for (f, k) in [(32, 53), (16, 33), (8, 33)] {
            layers.push(LayerSpec::conv(self.filters(f), self.kernel(k, len)));
            layers.push(LayerSpec::LeakyRelu);
        }
        layers.extend([
            LayerSpec::Maxpool1d { size: 2 },
            LayerSpec::Flatten,
            LayerSpec::dense(16),
            LayerSpec::LeakyRelu,
            LayerSpec::dense(1),
            LayerSpec::Sigmoid,
        ]);
        layers
    }

    /// Critic: three causal conv blocks with pools 4, 2, 2, then a dense
    /// stack with a linear scalar output.
    pub fn critic(self, len: usize) -> Vec<LayerSpec> {
        let mut layers = Vec::new();
        for (f, pool) in [(24, 4), (16, 2), (8, 2)] {
            layers.push(LayerSpec::conv(self.filters(f), self.kernel(17, len)));
            layers.push(LayerSpec::LeakyRelu);
            layers.push(LayerSpec::Maxpool1d { size: pool });
        }
        layers.push(LayerSpec::Flatten);
        for units in [512, 256, 128, 64, 32] {
            layers.push(LayerSpec::dense(self.dense(units)));
            layers.push(LayerSpec::LeakyRelu);
        }
        layers.push(LayerSpec::dense(1));
        layers
    }

    /// Aligner with `out_channels` outputs. Pools of 2 and 3 after blocks 1
    /// and 2 are undone by upsampling 3 and 2 after blocks 4 and 5, so the
    /// run length is preserved.
    pub fn aligner(self, len: usize, out_channels: usize, to_source: bool) -> Result<Vec<LayerSpec>> {
        if len % 6 != 0 {
            return Err(Error::Config(format!("aligners need a run length divisible by 6, got {len}")));
        }
        let filters: [usize; 5] = if to_source { [48, 42, 36, 32, 32] } else { [32, 36, 42, 46, 48] };
        let kernels = [37, 37, 37, 37, 57];
        let mut layers = Vec::new();
        for (block, (f, k)) in filters.iter().zip(kernels).enumerate() {
            layers.push(LayerSpec::conv(self.filters(*f), self.kernel(k, len)));
            layers.push(LayerSpec::LeakyRelu);
            match block {
                0 => layers.push(LayerSpec::Maxpool1d { size: 2 }),
                1 => layers.push(LayerSpec::Maxpool1d { size: 3 }),
                3 => layers.push(LayerSpec::Upsample1d { size: 3 }),
                4 => layers.push(LayerSpec::Upsample1d { size: 2 }),
                _ => {}
            }
        }
        layers.extend(vec![LayerSpec::conv(out_channels, self.kernel(7, len)), LayerSpec::Linear]);
        Ok(layers)
    }
}
