//! The aggregate experiment report and its derived tables.

use dbacs_core::experiment::{BaselineFoldMetrics, DbacsFoldMetrics};
use dbacs_core::matching::{median, MatchReport};
use dbacs_core::metrics::{DomainDistanceReport, MaeTable};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{ToolError, ToolResult};
use crate::layout::ModelKind;

/// Per-fold metric files as written by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fragments {
    pub dbacs: Vec<DbacsFoldMetrics>,
    /// Empty when the baseline was not evaluated.
    pub pca_coral: Vec<BaselineFoldMetrics>,
    pub cca: Vec<BaselineFoldMetrics>,
}

/// Count of components with correlation above 0.5, per fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonSummary {
    pub model: ModelKind,
    pub components: usize,
    pub above_half_per_fold: Vec<usize>,
    pub mean_above_half: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSummary {
    /// Relative to the run directory.
    pub report: String,
    pub fold: usize,
    pub nearest_middle_fraction: f64,
    pub median_cycle_source: f64,
    pub median_cycle_target: f64,
}

impl MatchSummary {
    pub fn new(report: &MatchReport, path: &str, fold: usize) -> Self {
        Self {
            report: path.to_string(),
            fold,
            nearest_middle_fraction: report.nearest_middle_fraction,
            median_cycle_source: median(&report.cycle_source).unwrap_or(f64::NAN),
            median_cycle_target: median(&report.cycle_target).unwrap_or(f64::NAN),
        }
    }
}

/// Everything `metrics.json` holds. Contains no wall-clock data, so a
/// re-run from the same configuration reproduces it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Resolved configuration without the output directory.
    pub config: RunConfig,
    pub seed: u64,
    pub folds: usize,
    /// Fold means of the `lower-bound` and `dbacs` rows.
    pub table1: MaeTable,
    pub table2: Option<MaeTable>,
    pub table3: Option<MaeTable>,
    /// Fold mean of the domain distances.
    pub fid: DomainDistanceReport,
    pub pearson: Vec<PearsonSummary>,
    pub matching: Option<MatchSummary>,
    pub fragments: Fragments,
}

fn pearson_summary(model: ModelKind, reports: &[&dbacs_core::metrics::PearsonReport]) -> PearsonSummary {
    let above: Vec<usize> = reports.iter().map(|r| r.count_above(0.5)).collect();
    PearsonSummary {
        model,
        components: reports.first().map_or(0, |r| r.r.len()),
        mean_above_half: above.iter().sum::<usize>() as f64 / above.len().max(1) as f64,
        above_half_per_fold: above,
    }
}

impl ExperimentReport {
    /// Aggregates fragments; every table is the cellwise fold mean.
    pub fn build(config: RunConfig, fragments: Fragments, matching: Option<MatchSummary>) -> ToolResult<Self> {
        let tables = |v: &[BaselineFoldMetrics]| -> ToolResult<Option<MaeTable>> {
            if v.is_empty() {
                return Ok(None);
            }
            Ok(Some(MaeTable::mean(&v.iter().map(|m| m.table.clone()).collect::<Vec<_>>())?))
        };
        let table1 = MaeTable::mean(&fragments.dbacs.iter().map(|m| m.table.clone()).collect::<Vec<_>>())?;
        let fid = DomainDistanceReport::mean(&fragments.dbacs.iter().map(|m| m.fid).collect::<Vec<_>>())
            .ok_or_else(|| ToolError::Data("no DBACS fold metrics to aggregate".into()))?;
        let mut pearson = vec![pearson_summary(ModelKind::Dbacs, &fragments.dbacs.iter().map(|m| &m.pearson).collect::<Vec<_>>())];
        for (kind, v) in [(ModelKind::PcaCoral, &fragments.pca_coral), (ModelKind::Cca, &fragments.cca)] {
            if !v.is_empty() {
                pearson.push(pearson_summary(kind, &v.iter().map(|m| &m.pearson).collect::<Vec<_>>()));
            }
        }
        Ok(Self {
            seed: config.experiment.seed,
            folds: config.experiment.folds,
            config,
            table1,
            table2: tables(&fragments.pca_coral)?,
            table3: tables(&fragments.cca)?,
            fid,
            pearson,
            matching,
            fragments,
        })
    }

    pub fn fid_csv(&self) -> String {
        let mut out = String::from("fold,inner_source,inner_target,outer_before,outer_after\n");
        let rows = self.fragments.dbacs.iter().map(|m| (m.fold.to_string(), &m.fid)).chain([("mean".to_string(), &self.fid)]);
        for (name, r) in rows {
            out.push_str(&format!("{name},{},{},{},{}\n", r.inner_source, r.inner_target, r.outer_before, r.outer_after));
        }
        out
    }
}
