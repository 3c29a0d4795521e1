//! Synthetic dual-equipment benchmark.
//!
//! Both domains observe the same latent recipe process `z(u)` (`u` is
//! normalized run time) through different sensor sets: a domain-specific
//! mixing map, per-sensor offset and gain, optional tanh warping and sensor
//! noise. The label is an affine function of the time average of one latent
//! channel plus noise. A few constant and noise-constant sensors, label
//! outliers and length outliers are planted so that every preprocessing step
//! has something to remove.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::types::{DomainDataset, DomainTag, SeriesSample};
use crate::error::{Error, Result};
use crate::linalg::{spd_solve, Mat};

/// Number of equal-length recipe steps.
const RECIPE_STEPS: usize = 6;
/// Amplitude of the planted noise-constant sensors (peak to peak below 0.01).
const NOISE_CONSTANT_AMPLITUDE: f64 = 0.004;
const LABEL_OFFSET: f64 = 100.0;
const LABEL_GAIN: f64 = 20.0;
const WARP: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub latent_dim: usize,
    /// Raw sensor counts, planted sensors included.
    pub source_channels: usize,
    pub target_channels: usize,
    /// Nominal run length.
    pub time_steps: usize,
    pub n_source: usize,
    pub n_target: usize,
    /// Sensor noise standard deviation relative to sensor gain.
    pub sensor_noise: f64,
    /// Label noise standard deviation in units of the label factor.
    pub label_noise: f64,
    pub drift: f64,
    /// Per-factor variance decay.
    pub factor_decay: f64,
    pub nonlinear: bool,
    pub constant_channels: usize,
    pub noise_constant_channels: usize,
    pub label_outlier_fraction: f64,
    /// Run lengths vary by up to this many steps around the nominal length.
    pub length_jitter: usize,
    pub length_outlier_fraction: f64,
    /// Share latent draws between domains (ground-truth scenarios only).
    pub paired: bool,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            latent_dim: 10,
            source_channels: 16,
            target_channels: 22,
            time_steps: 36,
            n_source: 1000,
            n_target: 600,
            sensor_noise: 0.01,
            label_noise: 0.15,
            drift: 0.15,
            factor_decay: 0.85,
            nonlinear: false,
            constant_channels: 1,
            noise_constant_channels: 1,
            label_outlier_fraction: 0.01,
            length_jitter: 2,
            length_outlier_fraction: 0.03,
            paired: false,
            seed: 7,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let planted = self.constant_channels + self.noise_constant_channels;
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::Config(msg)) };
        check(self.latent_dim >= 1, format!("latent_dim must be >= 1"))?;
        check(self.source_channels != self.target_channels, format!("source and target channel counts must differ"))?;
        for (name, c) in [("source", self.source_channels), ("target", self.target_channels)] {
            check(c > planted, format!("{name}_channels ({c}) must exceed planted sensors ({planted})"))?;
        }
        check(self.n_source >= 50 && self.n_target >= 50, format!("sample counts must be >= 50"))?;
        check(!self.paired || self.n_source == self.n_target, format!("paired generation needs n_source == n_target"))?;
        check(self.time_steps >= 8, format!("time_steps must be >= 8"))?;
        check(self.length_jitter < self.time_steps / 4, format!("length_jitter too large for time_steps"))?;
        for (name, v) in [
            ("sensor_noise", self.sensor_noise),
            ("label_noise", self.label_noise),
            ("drift", self.drift),
            ("label_outlier_fraction", self.label_outlier_fraction),
            ("length_outlier_fraction", self.length_outlier_fraction),
        ] {
            check(v.is_finite() && v >= 0.0, format!("{name} must be finite and >= 0"))?;
        }
        check(self.label_outlier_fraction < 0.2 && self.length_outlier_fraction < 0.2, format!("outlier fractions must be < 0.2"))?;
        check(self.factor_decay > 0.0 && self.factor_decay <= 1.0, format!("factor_decay must be in (0, 1]"))?;
        Ok(())
    }
}

/// Generating parameters of one domain's sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainTruth {
    /// `channels x latent_dim`; rows of planted sensors are zero.
    pub mixing: Mat,
    pub offsets: Vec<f64>,
    pub gains: Vec<f64>,
    pub constant_channels: Vec<usize>,
    pub noise_constant_channels: Vec<usize>,
    pub nonlinear: bool,
}

/// Ground truth behind a generated pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub source: DomainTruth,
    pub target: DomainTruth,
    pub label_factor: usize,
}

impl SyntheticTruth {
    /// Affine per-time-step map `x_to = x_from · W + b` that is exact on
    /// noise-free linear data. `W` is `channels_from x channels_to`.
    pub fn affine_map(from: &DomainTruth, to: &DomainTruth) -> Result<(Mat, Vec<f64>)> {
        if from.nonlinear || to.nonlinear {
            return Err(Error::Config(format!("exact affine map only exists for linear mixing")));
        }
        let scaled = |t: &DomainTruth| {
            let mut m = t.mixing.clone();
            for (i, g) in t.gains.iter().enumerate() {
                m.row_mut(i).iter_mut().for_each(|v| *v *= g);
            }
            m
        };
        let b_from = scaled(from);
        let b_to = scaled(to);
        // z = (BᵀB)⁻¹Bᵀ (x − o)
        let gram = b_from.transpose().matmul(&b_from)?;
        let pinv = spd_solve(&gram, &b_from.transpose())?;
        let lin = b_to.matmul(&pinv)?; // channels_to x channels_from
        let mut bias = to.offsets.clone();
        for (i, b) in bias.iter_mut().enumerate() {
            *b -= lin.row(i).iter().zip(&from.offsets).map(|(l, o)| l * o).sum::<f64>();
        }
        Ok((lin.transpose(), bias))
    }
}

struct World {
    profiles: Vec<[f64; RECIPE_STEPS]>,
    scales: Vec<f64>,
}

#[derive(Clone)]
struct Draw {
    amplitudes: Vec<f64>,
    drift: Vec<(f64, f64)>,
    raw_len: usize,
    label_noise: f64,
    label_shift: f64,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl World {
    fn new(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Self {
        let profiles = (0..cfg.latent_dim)
            .map(|j| {
                let mut p = [0.0; RECIPE_STEPS];
                for v in &mut p {
                    *v = if j == 0 { rng.random_range(0.5..1.5) } else { rng.random_range(-1.0..1.0) };
                }
                p
            })
            .collect();
        let scales = (0..cfg.latent_dim).map(|j| libm::pow(cfg.factor_decay, j as f64)).collect();
        Self { profiles, scales }
    }

    fn latent(&self, draw: &Draw, u: f64, j: usize) -> f64 {
        let step = ((u * RECIPE_STEPS as f64) as usize).min(RECIPE_STEPS - 1);
        let (c1, c2) = draw.drift[j];
        let drift = c1 * libm::sin(core::f64::consts::PI * u) + c2 * (u - 0.5);
        self.scales[j] * (draw.amplitudes[j] * self.profiles[j][step] + drift)
    }
}

fn draw_lengths(cfg: &GeneratorConfig, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let t = cfg.time_steps;
    let j = cfg.length_jitter;
    let n_out = libm::round(cfg.length_outlier_fraction * n as f64) as usize;
    let mut lens: Vec<usize> = (0..n)
        .map(|i| {
            if i < n_out {
                let delta = (t / 3).max(j + 2);
                if i % 2 == 0 {
                    t + delta
                } else {
                    t - delta
                }
            } else {
                // binomial(2j, 1/2) − j
                let heads = (0..2 * j).filter(|_| rng.random_bool(0.5)).count();
                t + heads - j
            }
        })
        .collect();
    lens.shuffle(rng);
    lens
}

fn draw_samples(cfg: &GeneratorConfig, n: usize, rng: &mut ChaCha8Rng) -> Vec<Draw> {
    let lens = draw_lengths(cfg, n, rng);
    let n_out = libm::round(cfg.label_outlier_fraction * n as f64) as usize;
    let mut outlier_flags: Vec<bool> = (0..n).map(|i| i < n_out).collect();
    outlier_flags.shuffle(rng);
    lens.into_iter()
        .zip(outlier_flags)
        .map(|(raw_len, outlier)| {
            let amplitudes = (0..cfg.latent_dim)
                .map(|j| if j == 0 { rng.random_range(0.0..1.0) } else { 1.0 + 0.35 * normal(rng) })
                .collect();
            let drift = (0..cfg.latent_dim).map(|_| (cfg.drift * normal(rng), cfg.drift * normal(rng))).collect();
            let label_noise = cfg.label_noise * normal(rng);
            let label_shift = if outlier {
                let mag = rng.random_range(3.0..5.0);
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            } else {
                0.0
            };
            Draw { amplitudes, drift, raw_len, label_noise, label_shift }
        })
        .collect()
}

fn make_truth(cfg: &GeneratorConfig, channels: usize, rng: &mut ChaCha8Rng) -> DomainTruth {
    let planted = cfg.constant_channels + cfg.noise_constant_channels;
    let mut order: Vec<usize> = (0..channels).collect();
    order.shuffle(rng);
    let constant_channels: Vec<usize> = order[..cfg.constant_channels].to_vec();
    let noise_constant_channels: Vec<usize> = order[cfg.constant_channels..planted].to_vec();
    let active: Vec<usize> = {
        let mut a = order[planted..].to_vec();
        a.sort_unstable();
        a
    };
    let l = cfg.latent_dim;
    let mut mixing = Mat::zeros(channels, l);
    let first = rng.random_range(0..l);
    for (k, &c) in active.iter().enumerate() {
        for j in 0..l {
            mixing[(c, j)] = rng.random_range(-0.25..0.25);
        }
        // sensors respond to the label factor with either sign
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        mixing[(c, 0)] = sign * rng.random_range(0.4..0.8);
        let primary = (first + k) % l;
        mixing[(c, primary)] += rng.random_range(0.8..1.2);
    }
    let offsets = (0..channels).map(|_| rng.random_range(-2.0..2.0)).collect();
    let gains = (0..channels).map(|_| rng.random_range(0.5..3.0)).collect();
    DomainTruth { mixing, offsets, gains, constant_channels, noise_constant_channels, nonlinear: cfg.nonlinear }
}

fn render(
    cfg: &GeneratorConfig,
    world: &World,
    truth: &DomainTruth,
    tag: DomainTag,
    draws: &[Draw],
    rng: &mut ChaCha8Rng,
) -> Result<DomainDataset> {
    let channels = truth.mixing.rows();
    let prefix = match tag {
        DomainTag::Source => "s",
        DomainTag::Target => "t",
    };
    let names: Vec<String> = (0..channels).map(|c| format!("{prefix}{c:02}")).collect();
    let mut samples = Vec::with_capacity(draws.len());
    let mut z = vec![0.0; cfg.latent_dim];
    for (id, draw) in draws.iter().enumerate() {
        let len = draw.raw_len;
        let mut values = Vec::with_capacity(len * channels);
        let mut z0_sum = 0.0;
        for step in 0..len {
            let u = if len > 1 { step as f64 / (len - 1) as f64 } else { 0.0 };
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = world.latent(draw, u, j);
            }
            z0_sum += z[0];
            for c in 0..channels {
                let v = if truth.constant_channels.contains(&c) {
                    truth.offsets[c]
                } else if truth.noise_constant_channels.contains(&c) {
                    truth.offsets[c] + rng.random_range(-0.5..0.5) * NOISE_CONSTANT_AMPLITUDE
                } else {
                    let mixed: f64 = truth.mixing.row(c).iter().zip(&z).map(|(m, zj)| m * zj).sum();
                    let mixed = if truth.nonlinear { libm::tanh(WARP * mixed) / WARP } else { mixed };
                    let noise = if cfg.sensor_noise > 0.0 { cfg.sensor_noise * normal(rng) } else { 0.0 };
                    truth.offsets[c] + truth.gains[c] * (mixed + noise)
                };
                values.push(v);
            }
        }
        let z0_mean = z0_sum / len as f64;
        let label = LABEL_OFFSET + LABEL_GAIN * (z0_mean + world.scales[0] * (draw.label_noise + draw.label_shift));
        samples.push(SeriesSample { id: id as u64, values, label, raw_len: len });
    }
    DomainDataset::new(tag, names, samples)
}

/// Whether some row permutation of `a` equals `b`.
pub fn permutation_equivalent(a: &Mat, b: &Mat) -> bool {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return false;
    }
    let sorted = |m: &Mat| {
        let mut rows: Vec<Vec<f64>> = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
        rows.sort_by(|x, y| x.iter().zip(y).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(core::cmp::Ordering::Equal));
        rows
    };
    sorted(a) == sorted(b)
}

/// Generates a source/target pair along with the generating parameters.
pub fn generate_pair_with_truth(cfg: &GeneratorConfig) -> Result<(DomainDataset, DomainDataset, SyntheticTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let world = World::new(cfg, &mut rng);
    let source_truth = make_truth(cfg, cfg.source_channels, &mut rng);
    let target_truth = make_truth(cfg, cfg.target_channels, &mut rng);
    if permutation_equivalent(&source_truth.mixing, &target_truth.mixing) {
        return Err(Error::Config(format!("source and target mixing maps are permutation-equivalent")));
    }
    let source_draws = draw_samples(cfg, cfg.n_source, &mut rng);
    let target_draws = if cfg.paired { source_draws.clone() } else { draw_samples(cfg, cfg.n_target, &mut rng) };
    let source = render(cfg, &world, &source_truth, DomainTag::Source, &source_draws, &mut rng)?;
    let target = render(cfg, &world, &target_truth, DomainTag::Target, &target_draws, &mut rng)?;
    Ok((source, target, SyntheticTruth { source: source_truth, target: target_truth, label_factor: 0 }))
}

/// Generates the unpaired source/target benchmark pair.
pub fn generate_pair(cfg: &GeneratorConfig) -> Result<(DomainDataset, DomainDataset)> {
    let (s, t, _) = generate_pair_with_truth(cfg)?;
    Ok((s, t))
}
