//! One pass/fail line per acceptance criterion, then a single verdict.
//! Runs without the test harness so the lines are never captured.
//!
//! Criteria 5, 6 and 8b run the default pipeline through the CLI, which
//! takes about half an hour on one core.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use dbacs_core::baselines::{cca_fit, coral_align, cross_covariance, project, Side};
use dbacs_core::datasets::{
    generate_pair_with_truth, preprocess_structure, DomainDataset, DomainTag, GeneratorConfig, PreprocessParams, PreprocessRecord,
    SeriesSample, SyntheticTruth,
};
use dbacs_core::dbacs::{aligner_objective, critic_objective, gradient_penalty, gradient_penalty_with_grad, DbacsModel, LossWeights};
use dbacs_core::linalg::{cholesky, covariance, sqrtm_psd, sym_eig, Mat};
use dbacs_core::matching::cross_domain_match;
use dbacs_core::nn::{check_params, grad_check, GradCheckConfig, LayerSpec, Network, Padding, Tensor};
use dbacs_toolkit::report::ExperimentReport;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn max_diff(a: &Mat, b: &Mat) -> f64 {
    a.sub(b).unwrap().max_abs()
}

fn rel_frobenius(a: &Mat, b: &Mat) -> f64 {
    a.sub(b).unwrap().frobenius() / b.frobenius()
}

// ---------------------------------------------------------------- 1

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = [0.0f64; 4];
    for trial in 0..100 {
        let d = 2 + trial % 24;
        let n = d + 5 + trial;
        let x = uniform(&mut rng, n, d);

        // covariance against a two-pass sum
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                mean[j] += x[(i, j)] / n as f64;
            }
        }
        let mut brute = Mat::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                let s: f64 = (0..n).map(|i| (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b])).sum();
                brute[(a, b)] = s / (n - 1) as f64;
            }
        }
        worst[0] = worst[0].max(max_diff(&covariance(&x, false).unwrap(), &brute));

        // V diag(λ) Vᵀ
        let a = uniform(&mut rng, d, d);
        let sym = a.add(&a.transpose()).unwrap();
        let eig = sym_eig(&sym).unwrap();
        let rebuilt = eig.vectors.matmul(&Mat::diag(&eig.values)).unwrap().matmul(&eig.vectors.transpose()).unwrap();
        worst[1] = worst[1].max(max_diff(&rebuilt, &sym));

        // L Lᵀ of an SPD matrix
        let spd = a.matmul(&a.transpose()).unwrap().add(&Mat::identity(d)).unwrap();
        let l = cholesky(&spd).unwrap();
        worst[2] = worst[2].max(max_diff(&l.matmul(&l.transpose()).unwrap(), &spd));

        // S·S of a PSD matrix
        let psd = a.matmul(&a.transpose()).unwrap();
        let s = sqrtm_psd(&psd).unwrap();
        worst[3] = worst[3].max(max_diff(&s.matmul(&s).unwrap(), &psd));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst.iter().all(|w| *w <= 1e-6) && secs < 10.0,
        format!(
            "max errors cov {:.1e}, eig {:.1e}, chol {:.1e}, sqrtm {:.1e} over 100 trials each; {secs:.2}s",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

// ---------------------------------------------------------------- 2

fn random_tensor(rng: &mut ChaCha8Rng, b: usize, t: usize, c: usize) -> Tensor {
    Tensor::from_vec(b, t, c, (0..b * t * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn half_sq(y: &Tensor) -> dbacs_core::Result<(f64, Tensor)> {
    Ok((y.as_slice().iter().map(|v| 0.5 * v * v).sum(), y.clone()))
}

fn toy_model(seed: u64) -> DbacsModel {
    let aligner = || vec![LayerSpec::conv(4, 3), LayerSpec::LeakyRelu, LayerSpec::conv(3, 3), LayerSpec::Linear];
    let critic =
        || vec![LayerSpec::conv(3, 3), LayerSpec::LeakyRelu, LayerSpec::Flatten, LayerSpec::dense(4), LayerSpec::LeakyRelu, LayerSpec::dense(1)];
    DbacsModel::from_parts(
        Network::new(6, 3, vec![LayerSpec::Flatten, LayerSpec::dense(1), LayerSpec::Sigmoid], seed).unwrap(),
        Network::new(6, 3, aligner(), seed + 1).unwrap(),
        Network::new(6, 3, aligner(), seed + 2).unwrap(),
        Network::new(6, 3, critic(), seed + 3).unwrap(),
        Network::new(6, 3, critic(), seed + 4).unwrap(),
    )
    .unwrap()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let cfg = GradCheckConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut results: Vec<(String, f64)> = Vec::new();

    let kinds: Vec<(&str, Vec<LayerSpec>)> = vec![
        ("conv1d", vec![LayerSpec::conv(3, 3)]),
        ("conv1d-valid", vec![LayerSpec::Conv1d { filters: 2, kernel: 4, padding: Padding::None }]),
        ("dense", vec![LayerSpec::dense(4)]),
        ("leaky_relu", vec![LayerSpec::conv(3, 2), LayerSpec::LeakyRelu]),
        ("sigmoid", vec![LayerSpec::dense(3), LayerSpec::Sigmoid]),
        ("linear", vec![LayerSpec::dense(3), LayerSpec::Linear]),
        ("maxpool1d", vec![LayerSpec::conv(3, 3), LayerSpec::Maxpool1d { size: 3 }]),
        ("upsample1d", vec![LayerSpec::conv(2, 3), LayerSpec::Upsample1d { size: 2 }]),
        ("flatten", vec![LayerSpec::conv(2, 3), LayerSpec::Flatten, LayerSpec::dense(2)]),
    ];
    for (name, layers) in kinds {
        let net = Network::new(9, 3, layers, 7).unwrap();
        let x = random_tensor(&mut rng, 3, 9, 3);
        results.push((name.into(), grad_check(&net, &x, half_sq, cfg).unwrap()));
    }

    let model = toy_model(11);
    let (xs, xt) = (random_tensor(&mut rng, 5, 6, 3), random_tensor(&mut rng, 5, 6, 3));
    let w = LossWeights::default();

    // aligner side: adversarial + cycle terms as functions of F and G
    let aligner_total = |m: &DbacsModel| Ok(aligner_objective(m, &xs, &xt, None, &w)?.0.total);
    let (_, grad_f, grad_g) = aligner_objective(&model, &xs, &xt, None, &w).unwrap();
    let err_f = check_params(&model.f, &grad_f, |f| aligner_total(&DbacsModel { f: f.clone(), ..model.clone() }), cfg).unwrap();
    let err_g = check_params(&model.g, &grad_g, |g| aligner_total(&DbacsModel { g: g.clone(), ..model.clone() }), cfg).unwrap();
    results.push(("cycle+adversarial (F)".into(), err_f));
    results.push(("cycle+adversarial (G)".into(), err_g));

    // critic side: adversarial minus gradient penalty
    let critic_total = |m: &DbacsModel| Ok(critic_objective(m, &xs, &xt, &w, 5)?.0.total);
    let (_, grad_a, grad_b) = critic_objective(&model, &xs, &xt, &w, 5).unwrap();
    let err_a = check_params(&model.d_a, &grad_a, |d| critic_total(&DbacsModel { d_a: d.clone(), ..model.clone() }), cfg).unwrap();
    let err_b = check_params(&model.d_b, &grad_b, |d| critic_total(&DbacsModel { d_b: d.clone(), ..model.clone() }), cfg).unwrap();
    results.push(("critic objective (D_A)".into(), err_a));
    results.push(("critic objective (D_B)".into(), err_b));

    let (_, grad) = gradient_penalty_with_grad(&model.d_a, &xs, &xt, 9).unwrap();
    results.push(("gradient penalty".into(), check_params(&model.d_a, &grad, |d| gradient_penalty(d, &xs, &xt, 9), cfg).unwrap()));

    // MAE with every residual a fixed 0.3 away from its kink
    let pred = model.predictor.predict(&xs).unwrap();
    let truth: Vec<f64> = pred.as_slice().iter().enumerate().map(|(i, p)| if i % 2 == 0 { p + 0.3 } else { p - 0.3 }).collect();
    let mae = |y: &Tensor| {
        let (v, g) = dbacs_core::dbacs::mae_with_grad(y.as_slice(), &truth)?;
        Ok((v, Tensor::from_vec(g.len(), 1, 1, g)?))
    };
    results.push(("mae".into(), grad_check(&model.predictor, &xs, mae, cfg).unwrap()));

    let secs = start.elapsed().as_secs_f64();
    let (worst_name, worst) = results.iter().cloned().fold((String::new(), 0.0), |acc, (n, e)| if e > acc.1 { (n, e) } else { acc });
    check(
        worst <= 1e-4 && secs < 60.0,
        format!("{} checks, worst relative error {worst:.1e} ({worst_name}); {secs:.2}s", results.len()),
    )
}

// ---------------------------------------------------------------- 3

/// Rows with covariance `B·Bᵀ + 0.5·I`.
fn correlated(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let b = gaussian(rng, cols, cols);
    let noise = gaussian(rng, rows, cols).scale(f64::sqrt(0.5));
    gaussian(rng, rows, cols).matmul(&b.transpose()).unwrap().add(&noise).unwrap()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_cov = 0.0f64;
    for _ in 0..20 {
        let s = correlated(&mut rng, 500, 6);
        let t = correlated(&mut rng, 400, 6);
        let (_, aligned) = coral_align(&s, &t).unwrap();
        worst_cov = worst_cov.max(rel_frobenius(&covariance(&aligned, false).unwrap(), &covariance(&t, false).unwrap()));
    }
    let s = correlated(&mut rng, 500, 6);
    let (coral, _) = coral_align(&s, &s).unwrap();
    let identity_gap = max_diff(&coral.a, &Mat::identity(6));
    check(
        worst_cov <= 1e-6 && identity_gap <= 1e-8,
        format!("covariance mismatch {worst_cov:.1e} (20 draws), |A - I| {identity_gap:.1e}"),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let s = correlated(&mut rng, 800, 5);
    let same = cca_fit(&s, &s, 5).unwrap();
    let identical = same.correlations.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);

    let a = gaussian(&mut rng, 10_000, 5);
    let b = gaussian(&mut rng, 10_000, 5);
    let independent = cca_fit(&a, &b, 1).unwrap().correlations[0];

    let t = s.matmul(&gaussian(&mut rng, 5, 7)).unwrap().add(&gaussian(&mut rng, 800, 7).scale(0.01)).unwrap();
    let related = cca_fit(&s, &t, 5).unwrap();
    let weakest = related.correlations.iter().cloned().fold(f64::INFINITY, f64::min);

    let (u, v) = (project(&related, &s, Side::Source).unwrap(), project(&related, &t, Side::Target).unwrap());
    let unit = max_diff(&covariance(&u, false).unwrap(), &Mat::identity(5)).max(max_diff(&covariance(&v, false).unwrap(), &Mat::identity(5)));
    let cross = cross_covariance(&u, &v).unwrap();
    let off_diag = (0..5).flat_map(|i| (0..5).filter(move |j| *j != i).map(move |j| (i, j))).map(|ij| cross[ij].abs()).fold(0.0, f64::max);

    check(
        identical <= 1e-6 && independent <= 0.1 && weakest >= 0.99 && unit <= 1e-6,
        format!(
            "identical |r - 1| {identical:.1e}; independent top r {independent:.3}; related min r {weakest:.5}; \
             unit-variance error {unit:.1e}; off-diagonal cross {off_diag:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 5, 6, 8b

struct FullRun {
    dir: PathBuf,
    report: ExperimentReport,
    minutes: f64,
}

fn dbacs(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dbacs")).args(args).output().expect("binary runs")
}

fn run_default_pipeline(dir: &Path) -> Result<FullRun, String> {
    let _ = fs::remove_dir_all(dir);
    let start = Instant::now();
    let out = dbacs(&["--out", dir.to_str().unwrap(), "pipeline"]);
    if !out.status.success() {
        return Err(format!("default pipeline failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let report = serde_json::from_slice(&fs::read(dir.join("metrics.json")).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    Ok(FullRun { dir: dir.to_path_buf(), report, minutes: start.elapsed().as_secs_f64() / 60.0 })
}

fn criterion_5(run: &FullRun) -> Outcome {
    let r = &run.report;
    let row = |name: &str| r.table1.row(name).ok_or(format!("table 1 has no {name} row"));
    let (lower, aligned) = (row("lower-bound")?, row("dbacs")?);
    let ratio = aligned.target.test / lower.target.test;

    let frozen = r.fragments.dbacs.iter().all(|m| {
        let (l, d) = (m.table.row("lower-bound").unwrap(), m.table.row("dbacs").unwrap());
        l.source == d.source
    });

    let f = &r.fid;
    let outer_ok = f.outer_after <= 0.1 * f.outer_before;
    let inner_ok = f.inner_source < 0.05 * f.outer_before && f.inner_target < 0.05 * f.outer_before;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    check(
        ratio <= 1.25 && frozen && outer_ok && inner_ok,
        format!(
            "(a) target test MAE dbacs {:.4} / lower-bound {:.4} = {ratio:.3} (<= 1.25); (b) source rows identical in every fold: {frozen}; \
             (c) outer FID {:.3} -> {:.3}, inner {:.3}/{:.3}; wall time {:.1} min on {jobs} core(s), informational",
            aligned.target.test, lower.target.test, f.outer_before, f.outer_after, f.inner_source, f.inner_target, run.minutes
        ),
    )
}

fn criterion_6(run: &FullRun) -> Outcome {
    let r = &run.report;
    let (t2, t3) = (r.table2.as_ref().ok_or("no PCA table")?, r.table3.as_ref().ok_or("no CCA table")?);
    let csvs = ["table2_pca.csv", "table3_cca.csv"].iter().all(|f| run.dir.join("tables").join(f).is_file());
    let pca = |name: &str| t2.row(name).ok_or(format!("PCA table has no {name} row"));
    let source_only = pca("pca_source")?;
    let degradation = source_only.target.test / source_only.source.test;
    let (both, coral) = (pca("pca_both")?.target.test, pca("pca_coral_both")?.target.test);
    let cca_rows = t3.rows.len();
    check(
        csvs && cca_rows == 4 && degradation >= 1.5 && coral <= both,
        format!(
            "PCA(source) target/source test MAE {:.4}/{:.4} = {degradation:.3} (needs >= 1.5); \
             cross-domain MAE PCA(both) {both:.4} vs PCA+CORAL(both) {coral:.4}; table CSVs written: {csvs}",
            source_only.target.test, source_only.source.test
        ),
    )
}

fn criterion_8(run: Option<&FullRun>) -> Outcome {
    // (a) exact affine inverse on paired noise-free domains
    let cfg = GeneratorConfig {
        n_source: 300,
        n_target: 300,
        paired: true,
        nonlinear: false,
        sensor_noise: 0.0,
        label_noise: 0.0,
        noise_constant_channels: 0,
        label_outlier_fraction: 0.0,
        length_jitter: 0,
        length_outlier_fraction: 0.0,
        ..GeneratorConfig::default()
    };
    let (mut s, mut t, truth) = generate_pair_with_truth(&cfg).unwrap();
    let labels = s.labels();
    let lo = labels.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for ds in [&mut s, &mut t] {
        ds.samples.iter_mut().for_each(|x| x.label = (x.label - lo) / (hi - lo));
    }
    let len = s.uniform_len().unwrap();
    let dense = |c_in: usize, (w, b): (Mat, Vec<f64>)| {
        let mut net = Network::new(len, c_in, vec![LayerSpec::dense(b.len()), LayerSpec::Linear], 0).unwrap();
        let (wp, bp) = net.layer_params_mut(0);
        wp.copy_from_slice(w.as_slice());
        bp.copy_from_slice(&b);
        net
    };
    let (c_s, c_t) = (s.channels(), t.channels());
    let g = dense(c_s, SyntheticTruth::affine_map(&truth.source, &truth.target).unwrap());
    let f = dense(c_t, SyntheticTruth::affine_map(&truth.target, &truth.source).unwrap());
    let scalar = |c| Network::new(len, c, vec![LayerSpec::Flatten, LayerSpec::dense(1), LayerSpec::Sigmoid], 1).unwrap();
    let model = DbacsModel::from_parts(scalar(c_s), f, g, scalar(c_s), scalar(c_t)).unwrap();
    let report = cross_domain_match(&model, &s, &t).unwrap();
    let middle = report.target_groups[1].curves.as_ref().unwrap();
    let gap = report
        .mapped_middle
        .iter()
        .zip(middle)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);

    // (b) trained benchmark model
    let (nearest, fold) = match run.and_then(|r| r.report.matching.as_ref()) {
        Some(m) => (m.nearest_middle_fraction, m.fold),
        None => return Err(format!("(a) barycenter gap {gap:.1e}; (b) no matching summary from the default run")),
    };
    check(
        gap <= 1e-6 && nearest >= 0.8,
        format!("(a) max |mapped middle - target middle| {gap:.1e} over {c_t} channels; (b) nearest-middle share {:.0}% (fold {fold})", 100.0 * nearest),
    )
}

// ---------------------------------------------------------------- 7

#[derive(Deserialize)]
struct Fixture {
    channel_names: Vec<String>,
    samples: Vec<SeriesSample>,
}

fn criterion_7() -> Outcome {
    let text = fs::read_to_string(root().join("crates/core/tests/fixtures/preprocess_raw.json")).map_err(|e| e.to_string())?;
    let f: Fixture = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let raw = DomainDataset::new(DomainTag::Source, f.channel_names, f.samples).unwrap();
    let out = preprocess_structure(&raw, &PreprocessParams::default()).map_err(|e| e.to_string())?;
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let want = [
        PreprocessRecord::DropConstantChannels { removed: names(&["const"]) },
        PreprocessRecord::DropNoiseConstantChannels { removed: names(&["flat", "edge_flat"]) },
    ];
    let log = out.log();
    let label_removed = match log.get(2) {
        Some(PreprocessRecord::DropLabelOutliers { removed, .. }) => removed.clone(),
        _ => vec![],
    };
    let (bounds, length_removed) = match log.get(3) {
        Some(PreprocessRecord::DropLengthOutliers { lower, upper, removed }) => ((*lower, *upper), removed.clone()),
        _ => ((f64::NAN, f64::NAN), vec![]),
    };
    let ok = log.len() == 5
        && log[..2] == want
        && label_removed == [7, 15]
        && bounds == (11.0, 13.0)
        && length_removed == [3, 11, 16, 19]
        && log[4] == PreprocessRecord::Resample { len: 12 }
        && out.channel_names == names(&["live_a", "mostly_flat", "live_b"])
        && out.len() == 14;
    check(
        ok,
        format!(
            "channels kept {:?}; label outliers {label_removed:?}; length bounds {bounds:?} removing {length_removed:?}; {} of {} runs survive",
            out.channel_names,
            out.len(),
            raw.len()
        ),
    )
}

// ---------------------------------------------------------------- 9

fn criterion_9(scratch: &Path) -> Outcome {
    let cfg = root().join("configs/smoke.json");
    let (a, b) = (scratch.join("a"), scratch.join("b"));
    let run = |args: &[&str]| -> Result<(), String> {
        let out = dbacs(args);
        out.status.success().then_some(()).ok_or_else(|| format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    };
    run(&["--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "pipeline"])?;
    let first = fs::read(a.join("metrics.json")).map_err(|e| e.to_string())?;
    let snap = scratch.join("snapshot.json");
    fs::copy(a.join("config.json"), &snap).map_err(|e| e.to_string())?;

    // the whole pipeline again, in a fresh directory, from the snapshot
    run(&["--config", snap.to_str().unwrap(), "--out", b.to_str().unwrap(), "pipeline"])?;
    let fresh = fs::read(b.join("metrics.json")).map_err(|e| e.to_string())?;
    // every stage again in place, from the same snapshot
    let base = ["--config", snap.to_str().unwrap(), "--out", a.to_str().unwrap()];
    for stage in [&["gen-data"][..], &["preprocess"], &["train", "dbacs"], &["train", "pca-coral"], &["train", "cca"], &["eval"], &["match"], &["report"]] {
        run(&[&base[..], stage].concat())?;
    }
    let in_place = fs::read(a.join("metrics.json")).map_err(|e| e.to_string())?;
    check(
        first == fresh && first == in_place,
        format!("metrics.json ({} bytes) identical after a fresh re-run: {}, after per-stage re-runs: {}", first.len(), first == fresh, first == in_place),
    )
}

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let mut lines: Vec<(u8, Outcome)> = vec![(1, criterion_1()), (2, criterion_2()), (3, criterion_3()), (4, criterion_4())];
    let full = run_default_pipeline(&scratch.path().join("default"));
    match &full {
        Ok(run) => {
            lines.push((5, criterion_5(run)));
            lines.push((6, criterion_6(run)));
        }
        Err(e) => {
            lines.push((5, Err(e.clone())));
            lines.push((6, Err(e.clone())));
        }
    }
    lines.push((7, criterion_7()));
    lines.push((8, criterion_8(full.as_ref().ok())));
    lines.push((9, criterion_9(scratch.path())));
    lines.sort_by_key(|l| l.0);

    for (n, outcome) in &lines {
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS  {detail}"),
            Err(detail) => println!("criterion {n}: FAIL  {detail}"),
        }
    }
    let failed: Vec<u8> = lines.iter().filter(|l| l.1.is_err()).map(|l| l.0).collect();
    if failed.is_empty() {
        println!("acceptance: all 9 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
