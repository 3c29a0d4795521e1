//! The CLI stages. Each reads its inputs from the run directory, writes its
//! outputs there, and never touches the directories it reads from.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use dbacs_core::datasets::{generate_pair, preprocess_structure, DomainDataset, DomainTag};
use dbacs_core::dbacs::LossHistory;
use dbacs_core::experiment::{
    align_all, evaluate_baseline_fold, evaluate_dbacs_fold, fold_splits, prepare_fold, train_baseline_fold, train_dbacs_fold,
    BaselineArtifacts, BaselineFoldMetrics, DbacsArtifacts, DbacsFoldMetrics, FoldData,
};
use dbacs_core::matching::{cross_domain_match, GroupName, MatchReport};
use dbacs_core::metrics::{flatten_runs, FidSpace};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::dataset_io::{load_dataset, read_json, save_dataset, to_json_pretty, write_json};
use crate::error::{ToolError, ToolResult};
use crate::layout::{ModelKind, RunDir};
use crate::report::{ExperimentReport, Fragments, MatchSummary};
use crate::svg;

pub const LOSS_HEADER: &str = "fold,step,epoch,loss,value";

/// A resolved configuration plus where and how wide to run.
pub struct Context {
    pub cfg: RunConfig,
    pub run: RunDir,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(cfg: RunConfig, jobs: usize) -> ToolResult<Self> {
        let run = RunDir::new(cfg.out_dir()?);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| ToolError::config("", format!("cannot start {jobs} worker threads: {e}")))?;
        Ok(Self { cfg, run, pool })
    }

    /// Records the exact configuration of the current command.
    fn snapshot(&self) -> ToolResult<()> {
        write_json(&self.run.config(), &self.cfg)
    }

    fn processed(&self) -> ToolResult<(DomainDataset, DomainDataset)> {
        let load = |tag| {
            let dir = self.run.processed(tag);
            require(&dir.join(crate::dataset_io::MANIFEST), "run `dbacs preprocess` first")?;
            load_dataset(&dir)
        };
        Ok((load(DomainTag::Source)?, load(DomainTag::Target)?))
    }

    fn folds(&self) -> ToolResult<Vec<FoldData>> {
        let (s, t) = self.processed()?;
        let splits = fold_splits(s.len(), t.len(), &self.cfg.experiment)?;
        Ok(splits.into_iter().enumerate().map(|(i, sp)| prepare_fold(&s, &t, i, sp)).collect::<Result<_, _>>()?)
    }

    fn fold(&self, index: usize) -> ToolResult<FoldData> {
        let (s, t) = self.processed()?;
        let split = fold_splits(s.len(), t.len(), &self.cfg.experiment)?.swap_remove(index);
        Ok(prepare_fold(&s, &t, index, split)?)
    }

    /// Runs `f` on every item in parallel and returns the first error in
    /// item order, so failures do not depend on scheduling.
    fn par_each<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> ToolResult<R> + Sync) -> ToolResult<Vec<R>> {
        let results: Vec<ToolResult<R>> = self.pool.install(|| items.par_iter().map(&f).collect());
        results.into_iter().collect()
    }
}

fn require(path: &Path, hint: &str) -> ToolResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(ToolError::missing(path, hint))
    }
}

fn write_text(path: &Path, text: &str) -> ToolResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| ToolError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| ToolError::io(path, e))
}

pub fn gen_data(ctx: &Context) -> ToolResult<()> {
    ctx.snapshot()?;
    let (source, target) = generate_pair(&ctx.cfg.generator)?;
    save_dataset(&source, &ctx.run.raw(DomainTag::Source))?;
    save_dataset(&target, &ctx.run.raw(DomainTag::Target))
}

/// Structural preprocessing of both raw domains. Normalization constants
/// depend on the CV split and are fitted per fold at training time.
pub fn preprocess(ctx: &Context) -> ToolResult<()> {
    ctx.snapshot()?;
    for tag in [DomainTag::Source, DomainTag::Target] {
        let dir = ctx.run.raw(tag);
        require(&dir.join(crate::dataset_io::MANIFEST), "run `dbacs gen-data` first")?;
        let processed = preprocess_structure(&load_dataset(&dir)?, &ctx.cfg.preprocessing)?;
        save_dataset(&processed, &ctx.run.processed(tag))?;
    }
    Ok(())
}

fn losses_csv(fold: usize, history: &LossHistory) -> String {
    let mut out = String::with_capacity(history.records.len() * 32);
    for r in &history.records {
        out.push_str(&format!("{fold},{},{},{},{}\n", r.step, r.epoch, r.loss_name, r.value));
    }
    out
}

fn train_fold(ctx: &Context, kind: ModelKind, fold: &FoldData) -> ToolResult<()> {
    let path = ctx.run.checkpoint(kind, fold.index);
    match kind.subspace() {
        None => match train_dbacs_fold(fold, &ctx.cfg.experiment) {
            Ok(art) => {
                write_text(&ctx.run.fold_losses(fold.index), &losses_csv(fold.index, &art.history))?;
                write_json(&path, &art)
            }
            Err(abort) => {
                write_text(&ctx.run.fold_losses(fold.index), &losses_csv(fold.index, &abort.history))?;
                Err(ToolError::Diverged(format!("fold {}: {}", fold.index, abort.error)))
            }
        },
        Some(sk) => write_json(&path, &train_baseline_fold(fold, &ctx.cfg.experiment, sk)?),
    }
}

/// Concatenates the per-fold loss logs in fold order.
fn merge_losses(ctx: &Context) -> ToolResult<()> {
    let mut out = String::from(LOSS_HEADER);
    out.push('\n');
    for k in 0..ctx.cfg.experiment.folds {
        let path = ctx.run.fold_losses(k);
        if path.exists() {
            out.push_str(&std::fs::read_to_string(&path).map_err(|e| ToolError::io(&path, e))?);
        }
    }
    write_text(&ctx.run.losses(), &out)
}

pub fn train(ctx: &Context, kind: ModelKind) -> ToolResult<()> {
    ctx.snapshot()?;
    let folds = ctx.folds()?;
    let result = ctx.par_each(&folds, |f| train_fold(ctx, kind, f));
    if kind == ModelKind::Dbacs {
        merge_losses(ctx)?;
    }
    result.map(|_| ())
}

fn load_checkpoint<T: for<'de> serde::Deserialize<'de>>(ctx: &Context, kind: ModelKind, fold: usize) -> ToolResult<T> {
    let path = ctx.run.checkpoint(kind, fold);
    require(&path, &format!("run `dbacs train {}` first", kind.name()))?;
    read_json(&path)
}

fn eval_fold(ctx: &Context, kind: ModelKind, fold: &FoldData) -> ToolResult<()> {
    let path = ctx.run.fragment(kind, fold.index);
    if kind == ModelKind::Dbacs {
        let art: DbacsArtifacts = load_checkpoint(ctx, kind, fold.index)?;
        write_json(&path, &evaluate_dbacs_fold(fold, &art, &ctx.cfg.experiment)?)
    } else {
        let art: BaselineArtifacts = load_checkpoint(ctx, kind, fold.index)?;
        write_json(&path, &evaluate_baseline_fold(fold, &art)?)
    }
}

/// Per-fold metric fragments for every requested model family.
pub fn eval(ctx: &Context, kinds: &[ModelKind]) -> ToolResult<()> {
    ctx.snapshot()?;
    for &kind in kinds {
        for k in 0..ctx.cfg.experiment.folds {
            require(&ctx.run.checkpoint(kind, k), &format!("run `dbacs train {}` first", kind.name()))?;
        }
    }
    let folds = ctx.folds()?;
    let jobs: Vec<(ModelKind, &FoldData)> = kinds.iter().flat_map(|&k| folds.iter().map(move |f| (k, f))).collect();
    ctx.par_each(&jobs, |(kind, fold)| eval_fold(ctx, *kind, fold)).map(|_| ())
}

fn curves_csv(report: &MatchReport, channel: usize) -> String {
    let mut out = String::from("t");
    for g in GroupName::ALL {
        out.push_str(&format!(",target_{}", g.as_str()));
    }
    out.push_str(",mapped_source_middle\n");
    for t in 0..report.len {
        out.push_str(&t.to_string());
        for g in &report.target_groups {
            out.push(',');
            if let Some(c) = &g.curves {
                out.push_str(&c[channel][t].to_string());
            }
        }
        out.push_str(&format!(",{}\n", report.mapped_middle[channel][t]));
    }
    out
}

fn curves_svg(report: &MatchReport, channel: usize) -> String {
    let names: Vec<String> = GroupName::ALL.iter().map(|g| format!("target {}", g.as_str())).collect();
    let mut lines = Vec::new();
    for (k, g) in report.target_groups.iter().enumerate() {
        if let Some(c) = &g.curves {
            lines.push(svg::Line { label: &names[k], color: svg::PALETTE[k], dashed: false, values: &c[channel] });
        }
    }
    lines.push(svg::Line { label: "mapped source middle", color: svg::PALETTE[5], dashed: true, values: &report.mapped_middle[channel] });
    svg::line_plot(&format!("Target channel {channel}: group barycenters"), "normalized value", &lines)
}

/// Matching report for the configured fold's DBACS model.
pub fn match_groups(ctx: &Context) -> ToolResult<MatchReport> {
    ctx.snapshot()?;
    let k = ctx.cfg.match_fold;
    let art: DbacsArtifacts = load_checkpoint(ctx, ModelKind::Dbacs, k)?;
    let fold = ctx.fold(k)?;
    let report = cross_domain_match(&art.model, &fold.source, &fold.target)?;
    write_json(&ctx.run.match_report(), &report)?;
    for ch in 0..report.mapped_middle.len() {
        write_text(&ctx.run.match_curves(ch), &curves_csv(&report, ch))?;
        write_text(&ctx.run.match_plot(ch), &curves_svg(&report, ch))?;
    }
    Ok(report)
}

fn fragments<T: for<'de> serde::Deserialize<'de>>(ctx: &Context, kind: ModelKind, required: bool) -> ToolResult<Vec<T>> {
    let n = ctx.cfg.experiment.folds;
    let present = (0..n).filter(|&k| ctx.run.fragment(kind, k).exists()).count();
    if present == 0 && !required {
        return Ok(Vec::new());
    }
    (0..n)
        .map(|k| {
            let path = ctx.run.fragment(kind, k);
            require(&path, &format!("run `dbacs eval --model {}` first", kind.name()))?;
            read_json(&path)
        })
        .collect()
}

/// 2-D PCA of flattened source runs and `F`-aligned target runs.
fn scatter(ctx: &Context) -> ToolResult<()> {
    let k = ctx.cfg.match_fold;
    let art: DbacsArtifacts = load_checkpoint(ctx, ModelKind::Dbacs, k)?;
    let fold = ctx.fold(k)?;
    let all_s: Vec<usize> = (0..fold.source.len()).collect();
    let all_t: Vec<usize> = (0..fold.target.len()).collect();
    let flat_s = flatten_runs(&fold.source, &all_s)?;
    let space = FidSpace::fit(&flat_s, 2)?;
    let zs = space.embed(&flat_s)?;
    let za = space.embed(&flatten_runs(&align_all(&art.model.f, &fold.target)?, &all_t)?)?;
    let points = |m: &dbacs_core::linalg::Mat| -> Vec<(f64, f64)> {
        (0..m.rows()).map(|r| (m.row(r)[0], m.row(r).get(1).copied().unwrap_or(0.0))).collect()
    };
    let (ps, pa) = (points(&zs), points(&za));
    let mut csv = String::from("domain,pc1,pc2\n");
    for (name, pts) in [("source", &ps), ("aligned_target", &pa)] {
        for (x, y) in pts {
            csv.push_str(&format!("{name},{x},{y}\n"));
        }
    }
    write_text(&ctx.run.plot("scatter.csv"), &csv)?;
    let plot = svg::scatter_plot(
        &format!("Fold {k}: source vs aligned target (2-D PCA)"),
        "PC 1",
        "PC 2",
        &[
            svg::Points { label: "source", color: svg::PALETTE[0], xy: &ps },
            svg::Points { label: "aligned target", color: svg::PALETTE[1], xy: &pa },
        ],
    );
    write_text(&ctx.run.plot("scatter.svg"), &plot)
}

/// Aggregates the fragments into `metrics.json`, tables and plots.
pub fn report(ctx: &Context) -> ToolResult<ExperimentReport> {
    ctx.snapshot()?;
    let dbacs: Vec<DbacsFoldMetrics> = fragments(ctx, ModelKind::Dbacs, true)?;
    let pca_coral: Vec<BaselineFoldMetrics> = fragments(ctx, ModelKind::PcaCoral, false)?;
    let cca: Vec<BaselineFoldMetrics> = fragments(ctx, ModelKind::Cca, false)?;
    let match_path = ctx.run.match_report();
    let matching = if match_path.exists() {
        let r: MatchReport = read_json(&match_path)?;
        Some(MatchSummary::new(&r, "match/report.json", ctx.cfg.match_fold))
    } else {
        None
    };
    let report = ExperimentReport::build(ctx.cfg.portable(), Fragments { dbacs, pca_coral, cca }, matching)?;

    write_text(&ctx.run.table(ModelKind::Dbacs.table_file()), &report.table1.to_csv())?;
    for (kind, table) in [(ModelKind::PcaCoral, &report.table2), (ModelKind::Cca, &report.table3)] {
        if let Some(t) = table {
            write_text(&ctx.run.table(kind.table_file()), &t.to_csv())?;
        }
    }
    write_text(&ctx.run.table("fid.csv"), &report.fid_csv())?;
    scatter(ctx)?;
    write_text(&ctx.run.metrics(), &to_json_pretty(&report))?;
    Ok(report)
}

/// Every stage in order, recording wall-clock time per stage.
pub fn pipeline(ctx: &Context) -> ToolResult<ExperimentReport> {
    let mut timer = Timer::new();
    timer.stage("gen-data", || gen_data(ctx))?;
    timer.stage("preprocess", || preprocess(ctx))?;
    for kind in ModelKind::ALL {
        timer.stage(&format!("train {}", kind.name()), || train(ctx, kind))?;
    }
    timer.stage("eval", || eval(ctx, &ModelKind::ALL))?;
    timer.stage("match", || match_groups(ctx))?;
    let report = timer.stage("report", || report(ctx))?;
    timer.finish(&ctx.run, "pipeline")?;
    Ok(report)
}

/// Seconds per stage, merged into `timing.json`.
pub struct Timer {
    start: Instant,
    stages: BTreeMap<String, f64>,
}

impl Timer {
    pub fn new() -> Self {
        Self { start: Instant::now(), stages: BTreeMap::new() }
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> ToolResult<T>) -> ToolResult<T> {
        let t = Instant::now();
        let out = f();
        self.stages.insert(name.to_string(), t.elapsed().as_secs_f64());
        out
    }

    pub fn finish(mut self, run: &RunDir, total_name: &str) -> ToolResult<()> {
        self.stages.insert(total_name.to_string(), self.start.elapsed().as_secs_f64());
        let path = run.timing();
        let mut all: BTreeMap<String, f64> =
            if path.exists() { read_json(&path).unwrap_or_default() } else { BTreeMap::new() };
        all.extend(self.stages);
        write_json(&path, &all)
    }
}

impl Default for Timer {
    fn default() -> Self {
        Self::new()
    }
}
