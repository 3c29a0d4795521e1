//! Run configuration: one JSON document with a section per stage.
//!
//! Unknown keys are rejected everywhere and every error carries a JSON
//! pointer into the document. `configs/schema.json` describes the format.

use std::path::{Path, PathBuf};

use dbacs_core::datasets::{GeneratorConfig, PreprocessParams};
use dbacs_core::dbacs::ArchPreset;
use dbacs_core::experiment::ExperimentConfig;
use serde::{Deserialize, Serialize};

use crate::error::{ToolError, ToolResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub generator: GeneratorConfig,
    pub preprocessing: PreprocessParams,
    pub experiment: ExperimentConfig,
    /// Run directory; `--out` takes precedence.
    pub output: Option<PathBuf>,
    /// Overrides both `generator.seed` and `experiment.seed` when set.
    pub seed: Option<u64>,
    /// Fold whose DBACS model feeds the matching report and the scatter plot.
    pub match_fold: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            preprocessing: PreprocessParams::default(),
            experiment: ExperimentConfig::default(),
            output: None,
            seed: None,
            match_fold: 0,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub preset: Option<String>,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        let part = match seg {
            Segment::Seq { index } => index.to_string(),
            Segment::Map { key } => key.replace('~', "~0").replace('/', "~1"),
            Segment::Enum { variant } => variant.clone(),
            Segment::Unknown => continue,
        };
        out.push('/');
        out.push_str(&part);
    }
    out
}

fn validation(pointer: &str, e: dbacs_core::Error) -> ToolError {
    match e {
        dbacs_core::Error::Config(m) => ToolError::config(pointer, m),
        other => ToolError::config(pointer, other.to_string()),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> ToolResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = pointer_of(e.path());
            ToolError::config(pointer, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> ToolResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ToolError::missing(path, "run configuration"),
            _ => ToolError::io(path, e),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> ToolResult<()> {
        self.generator.validate().map_err(|e| validation("/generator", e))?;
        self.experiment.validate().map_err(|e| validation("/experiment", e))?;
        let p = &self.preprocessing;
        for (key, v) in [("iqr_multiplier", p.iqr_multiplier), ("noise_range", p.noise_range), ("noise_slope", p.noise_slope)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ToolError::config(format!("/preprocessing/{key}"), "must be finite and >= 0"));
            }
        }
        if !(p.noise_fraction > 0.0 && p.noise_fraction <= 1.0) {
            return Err(ToolError::config("/preprocessing/noise_fraction", "must be in (0, 1]"));
        }
        if self.match_fold >= self.experiment.folds {
            return Err(ToolError::config(
                "/match_fold",
                format!("fold {} does not exist with {} folds", self.match_fold, self.experiment.folds),
            ));
        }
        Ok(())
    }

    /// Applies command-line overrides and folds `seed` into both sections,
    /// so the result is the exact configuration a run used.
    pub fn resolve(mut self, o: &Overrides) -> ToolResult<Self> {
        if let Some(out) = &o.out {
            self.output = Some(out.clone());
        }
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if let Some(seed) = self.seed.take() {
            self.generator.seed = seed;
            self.experiment.seed = seed;
        }
        if let Some(name) = &o.preset {
            self.experiment.preset = ArchPreset::parse(name).map_err(|e| validation("/experiment/preset", e))?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn out_dir(&self) -> ToolResult<&Path> {
        self.output.as_deref().ok_or_else(|| ToolError::config("/output", "no output directory: set `output` or pass --out"))
    }

    /// The configuration with machine-local fields cleared, as embedded in
    /// reports that must not depend on where a run was written.
    pub fn portable(&self) -> Self {
        Self { output: None, ..self.clone() }
    }
}
