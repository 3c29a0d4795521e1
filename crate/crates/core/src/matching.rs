//! Equipment matching: label-stratified barycenters, cycled-signal
//! residuals, and mapped source signals compared against target groups.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::datasets::SampleSet;
use crate::dbacs::{apply_aligner, DbacsModel};
use crate::error::{Error, Result};
use crate::nn::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupName {
    Low,
    Middle,
    High,
}

impl GroupName {
    pub const ALL: [GroupName; 3] = [GroupName::Low, GroupName::Middle, GroupName::High];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupName::Low => "low",
            GroupName::Middle => "middle",
            GroupName::High => "high",
        }
    }

    /// Low is `[0, 0.1)`, middle `[0.4, 0.6]`, high `(0.9, 1]`.
    pub fn contains(self, label: f64) -> bool {
        match self {
            GroupName::Low => (0.0..0.1).contains(&label),
            GroupName::Middle => (0.4..=0.6).contains(&label),
            GroupName::High => label > 0.9 && label <= 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelGroup {
    pub name: GroupName,
    /// Indices into the grouped set, ascending.
    pub members: Vec<usize>,
}

/// Assigns every run to at most one of the three label groups; labels in
/// the gaps stay unassigned.
pub fn group_by_label<S: SampleSet + ?Sized>(data: &S) -> [LabelGroup; 3] {
    GroupName::ALL.map(|name| LabelGroup {
        name,
        members: (0..data.num_samples()).filter(|&i| name.contains(data.label(i))).collect(),
    })
}

/// Pointwise mean of one channel over the selected runs.
pub fn barycenter<S: SampleSet + ?Sized>(data: &S, indices: &[usize], channel: usize) -> Result<Vec<f64>> {
    if indices.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let (len, c) = (data.series_len(), data.channels());
    if channel >= c {
        return Err(Error::Shape(format!("channel {channel} out of {c}")));
    }
    let mut curve = vec![0.0; len];
    for &i in indices {
        for (t, v) in curve.iter_mut().enumerate() {
            *v += data.series(i)[t * c + channel];
        }
    }
    let n = indices.len() as f64;
    curve.iter_mut().for_each(|v| *v /= n);
    Ok(curve)
}

/// Barycenter curves of every channel.
pub fn barycenters<S: SampleSet + ?Sized>(data: &S, indices: &[usize]) -> Result<Vec<Vec<f64>>> {
    (0..data.channels()).map(|c| barycenter(data, indices, c)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleDirection {
    /// `F(G(x_S))` against `x_S`.
    Source,
    /// `G(F(x_T))` against `x_T`.
    Target,
}

/// Per-run mean absolute cycle residual.
pub fn cycle_residuals<S: SampleSet + ?Sized>(model: &DbacsModel, data: &S, direction: CycleDirection) -> Result<Vec<f64>> {
    let (first, second): (&Network, &Network) = match direction {
        CycleDirection::Source => (&model.g, &model.f),
        CycleDirection::Target => (&model.f, &model.g),
    };
    let mut out = Vec::with_capacity(data.num_samples());
    let idx: Vec<usize> = (0..data.num_samples()).collect();
    for chunk in idx.chunks(256) {
        let x = data.batch(chunk)?;
        let cycled = apply_aligner(second, &apply_aligner(first, &x)?)?;
        for b in 0..x.batch() {
            let (a, c) = (x.sample(b), cycled.sample(b));
            out.push(a.iter().zip(c).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64);
        }
    }
    Ok(out)
}

/// Barycenters of one group, absent when the group is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCurves {
    pub group: GroupName,
    pub members: usize,
    /// One curve per channel.
    pub curves: Option<Vec<Vec<f64>>>,
}

/// Gaps between the mapped source-middle barycenter and each target group
/// on one target channel, indexed low, middle, high.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGap {
    pub channel: usize,
    pub l2: [Option<f64>; 3],
    pub max_abs: [Option<f64>; 3],
    /// Group with the smallest L2 gap.
    pub nearest: Option<GroupName>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub len: usize,
    pub source_groups: Vec<GroupCurves>,
    pub target_groups: Vec<GroupCurves>,
    /// `G(source middle)` barycenters, one curve per target channel.
    pub mapped_middle: Vec<Vec<f64>>,
    pub gaps: Vec<ChannelGap>,
    /// Share of target channels whose nearest group is the middle one.
    pub nearest_middle_fraction: f64,
    pub cycle_source: Vec<f64>,
    pub cycle_target: Vec<f64>,
}

fn group_curves<S: SampleSet + ?Sized>(data: &S, group: &LabelGroup) -> Result<GroupCurves> {
    let curves = if group.members.is_empty() { None } else { Some(barycenters(data, &group.members)?) };
    Ok(GroupCurves { group: group.name, members: group.members.len(), curves })
}

fn gap(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut max_abs = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        l2 += (x - y) * (x - y);
        max_abs = max_abs.max((x - y).abs());
    }
    (libm::sqrt(l2), max_abs)
}

/// Maps the source-middle runs through `G` and compares their barycenters
/// with the target groups channel by channel.
pub fn cross_domain_match<S, T>(model: &DbacsModel, source: &S, target: &T) -> Result<MatchReport>
where
    S: SampleSet + ?Sized,
    T: SampleSet + ?Sized,
{
    let s_groups = group_by_label(source);
    let t_groups = group_by_label(target);
    let middle = &s_groups[1].members;
    if middle.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut mapped_runs = Vec::with_capacity(middle.len());
    for chunk in middle.chunks(256) {
        let out = apply_aligner(&model.g, &source.batch(chunk)?)?;
        for b in 0..out.batch() {
            mapped_runs.push(out.sample(b).to_vec());
        }
    }
    let (len, c_t) = model.g.output_shape();
    let mapped = crate::datasets::SeriesSet::new(len, c_t, mapped_runs, vec![0.5; middle.len()])?;
    let all: Vec<usize> = (0..middle.len()).collect();
    let mapped_middle = barycenters(&mapped, &all)?;

    let source_groups = s_groups.iter().map(|g| group_curves(source, g)).collect::<Result<Vec<_>>>()?;
    let target_groups = t_groups.iter().map(|g| group_curves(target, g)).collect::<Result<Vec<_>>>()?;
    if target.channels() != c_t {
        return Err(Error::Shape(format!("G emits {c_t} channels, target runs have {}", target.channels())));
    }

    let mut gaps = Vec::with_capacity(c_t);
    for ch in 0..c_t {
        let mut l2 = [None; 3];
        let mut max_abs = [None; 3];
        for (k, g) in target_groups.iter().enumerate() {
            if let Some(curves) = &g.curves {
                let (a, b) = gap(&mapped_middle[ch], &curves[ch]);
                l2[k] = Some(a);
                max_abs[k] = Some(b);
            }
        }
        let nearest = (0..3)
            .filter_map(|k| l2[k].map(|v| (k, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| GroupName::ALL[k]);
        gaps.push(ChannelGap { channel: ch, l2, max_abs, nearest });
    }
    let nearest_middle_fraction =
        gaps.iter().filter(|g| g.nearest == Some(GroupName::Middle)).count() as f64 / c_t.max(1) as f64;

    Ok(MatchReport {
        len,
        source_groups,
        target_groups,
        mapped_middle,
        gaps,
        nearest_middle_fraction,
        cycle_source: cycle_residuals(model, source, CycleDirection::Source)?,
        cycle_target: cycle_residuals(model, target, CycleDirection::Target)?,
    })
}

/// Median of a nonempty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}
