//! Paths inside a run directory. Every per-fold artifact has its own file,
//! so parallel folds never write to the same place.

use std::path::{Path, PathBuf};

use dbacs_core::baselines::SubspaceKind;
use dbacs_core::datasets::DomainTag;
use serde::{Deserialize, Serialize};

/// Trainable model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Dbacs,
    PcaCoral,
    Cca,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Dbacs, ModelKind::PcaCoral, ModelKind::Cca];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dbacs => "dbacs",
            ModelKind::PcaCoral => "pca-coral",
            ModelKind::Cca => "cca",
        }
    }

    pub fn subspace(self) -> Option<SubspaceKind> {
        match self {
            ModelKind::Dbacs => None,
            ModelKind::PcaCoral => Some(SubspaceKind::Pca),
            ModelKind::Cca => Some(SubspaceKind::Cca),
        }
    }

    /// Aggregate table written by `report`.
    pub fn table_file(self) -> &'static str {
        match self {
            ModelKind::Dbacs => "table1_dbacs.csv",
            ModelKind::PcaCoral => "table2_pca.csv",
            ModelKind::Cca => "table3_cca.csv",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Snapshot of the resolved configuration of the latest command.
    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn raw(&self, tag: DomainTag) -> PathBuf {
        self.root.join("data").join("raw").join(tag.as_str())
    }

    /// Structurally preprocessed data; normalization happens per fold.
    pub fn processed(&self, tag: DomainTag) -> PathBuf {
        self.root.join("data").join("processed").join(tag.as_str())
    }

    pub fn checkpoint(&self, kind: ModelKind, fold: usize) -> PathBuf {
        self.root.join("checkpoints").join(kind.name()).join(format!("fold_{fold}.json"))
    }

    pub fn fragment(&self, kind: ModelKind, fold: usize) -> PathBuf {
        self.root.join("metrics").join(kind.name()).join(format!("fold_{fold}.json"))
    }

    pub fn fold_losses(&self, fold: usize) -> PathBuf {
        self.root.join("logs").join("dbacs").join(format!("fold_{fold}.csv"))
    }

    pub fn losses(&self) -> PathBuf {
        self.root.join("logs").join("losses.csv")
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.json")
    }

    /// Wall-clock measurements, kept apart from the reproducible metrics.
    pub fn timing(&self) -> PathBuf {
        self.root.join("timing.json")
    }

    pub fn table(&self, file: &str) -> PathBuf {
        self.root.join("tables").join(file)
    }

    pub fn plot(&self, file: &str) -> PathBuf {
        self.root.join("plots").join(file)
    }

    pub fn match_report(&self) -> PathBuf {
        self.root.join("match").join("report.json")
    }

    pub fn match_curves(&self, channel: usize) -> PathBuf {
        self.root.join("match").join("curves").join(format!("channel_{channel}.csv"))
    }

    pub fn match_plot(&self, channel: usize) -> PathBuf {
        self.root.join("plots").join("match").join(format!("channel_{channel}.svg"))
    }
}
