//! Decides from a trajectory whether an object was affected by the action.
//!
//! Poses are normalized per component with training-set statistics; the
//! spread of the normalized translation and rotation components over time
//! gives two numbers, and the object counts as affected when either
//! exceeds its threshold. Thresholds come from an exhaustive grid search.

use serde::{Deserialize, Serialize};

use crate::trajectory::Trajectory;
use crate::{Error, Result};

/// Raw displacement above which the simulator considers an object moved.
pub const DISPLACEMENT_THRESHOLD: f64 = 5e-3;

/// Raw rotation above which the simulator considers an object moved.
pub const ROTATION_THRESHOLD: f64 = 2.0 * std::f64::consts::PI / 180.0;

/// Ground-truth label straight from the simulated motion.
pub fn ground_truth_affected(tr: &Trajectory) -> bool {
    !tr.removed
        && (tr.max_displacement() > DISPLACEMENT_THRESHOLD
            || tr.max_rotation() > ROTATION_THRESHOLD)
}

/// Mean and standard deviation of the 12 pose components (translation,
/// then the rotation matrix row by row).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseStats {
    pub mean: [f64; 12],
    pub std: [f64; 12],
}

impl PoseStats {
    /// Statistics that leave poses unchanged.
    pub fn identity() -> Self {
        PoseStats {
            mean: [0.0; 12],
            std: [1.0; 12],
        }
    }
}

fn sorted_sum(mut parts: Vec<f64>) -> f64 {
    parts.sort_by(f64::total_cmp);
    parts.iter().sum()
}

/// Population statistics over every sample of every trajectory. A
/// component that never varies gets std 1. Partial sums are combined in
/// sorted order, so the result does not depend on trajectory order.
pub fn fit_pose_stats<'a>(
    trajectories: impl IntoIterator<Item = &'a Trajectory>,
) -> Result<PoseStats> {
    let trs: Vec<&Trajectory> = trajectories
        .into_iter()
        .filter(|t| !t.samples.is_empty())
        .collect();
    let n: usize = trs.iter().map(|t| t.len()).sum();
    if n == 0 {
        return Err(Error::NoTrainingData);
    }
    let n = n as f64;
    let comps: Vec<Vec<[f64; 12]>> = trs
        .iter()
        .map(|t| t.samples.iter().map(|s| s.pose.components()).collect())
        .collect();
    let mut stats = PoseStats::identity();
    for c in 0..12 {
        let mean = sorted_sum(comps.iter().map(|t| t.iter().map(|p| p[c]).sum()).collect()) / n;
        let first = comps[0][0][c];
        let constant = comps.iter().flatten().all(|p| p[c] == first);
        stats.mean[c] = if constant { first } else { mean };
        if !constant {
            let var = sorted_sum(
                comps
                    .iter()
                    .map(|t| t.iter().map(|p| (p[c] - mean).powi(2)).sum())
                    .collect(),
            ) / n;
            stats.std[c] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
    }
    Ok(stats)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionSummary {
    pub sigma_t: f64,
    pub sigma_r: f64,
}

/// Spread of the normalized pose over time: for each group (translation,
/// rotation) the root of the mean temporal variance of its components.
pub fn summarize(tr: &Trajectory, stats: &PoseStats) -> Result<MotionSummary> {
    if tr.removed {
        return Err(Error::RemovedTrajectory(tr.class));
    }
    if tr.len() < 2 {
        return Err(Error::InvalidValue(format!(
            "{} has {} samples, at least 2 are needed",
            tr.class,
            tr.len()
        )));
    }
    let n = tr.len() as f64;
    let first = tr.samples[0].pose.components();
    let mut var = [0.0; 12];
    for (c, v) in var.iter_mut().enumerate() {
        let z0 = (first[c] - stats.mean[c]) / stats.std[c];
        // Deviations from the first sample: exactly zero for a constant
        // component, whatever the rounding of the mean.
        let (mut s, mut s2) = (0.0, 0.0);
        for sample in &tr.samples {
            let z = (sample.pose.components()[c] - stats.mean[c]) / stats.std[c];
            let d = z - z0;
            s += d;
            s2 += d * d;
        }
        let m = s / n;
        *v = (s2 / n - m * m).max(0.0);
    }
    let pooled = |range: std::ops::Range<usize>| {
        let len = range.len() as f64;
        (var[range].iter().sum::<f64>() / len).sqrt()
    };
    Ok(MotionSummary {
        sigma_t: pooled(0..3),
        sigma_r: pooled(3..12),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub tau_t: f64,
    pub tau_r: f64,
}

pub fn is_affected(s: &MotionSummary, th: &Thresholds) -> bool {
    s.sigma_t > th.tau_t || s.sigma_r > th.tau_r
}

/// Fitted normalization and thresholds, stored together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectsModel {
    pub stats: PoseStats,
    pub thresholds: Thresholds,
}

impl EffectsModel {
    pub fn affected(&self, tr: &Trajectory) -> Result<bool> {
        Ok(is_affected(&summarize(tr, &self.stats)?, &self.thresholds))
    }
}

/// Candidate thresholds for one axis: half the smallest value when it is
/// positive, the midpoints between consecutive distinct values, and one
/// value above the largest. Every split of the observed values that a
/// positive threshold can produce is represented exactly once.
pub fn candidates(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mut out = Vec::with_capacity(v.len() + 1);
    if let Some(&min) = v.first() {
        if min > 0.0 {
            out.push(min / 2.0);
        }
    }
    for w in v.windows(2) {
        let mid = w[0] + (w[1] - w[0]) / 2.0;
        if mid > 0.0 {
            out.push(mid);
        }
    }
    out.push(v.last().map_or(1.0, |m| m + 1.0));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub thresholds: Thresholds,
    pub accuracy: f64,
}

/// Accuracy of `th` on labelled summaries.
pub fn accuracy(examples: &[(MotionSummary, bool)], th: &Thresholds) -> f64 {
    let correct = examples
        .iter()
        .filter(|(s, label)| is_affected(s, th) == *label)
        .count();
    correct as f64 / examples.len() as f64
}

/// Best thresholds over the full candidate grid, ties going to the
/// smallest `(tau_t, tau_r)` in lexicographic order.
///
/// Runs in O(n·m) for n examples and m rotation candidates: thresholds are
/// visited in increasing `tau_t`, moving examples one by one into the set
/// decided by `tau_r` alone, whose per-candidate accuracy is a prefix sum.
pub fn grid_search(examples: &[(MotionSummary, bool)]) -> Result<GridResult> {
    let positives = examples.iter().filter(|(_, l)| *l).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::DegenerateLabels);
    }
    let cand_t = candidates(examples.iter().map(|(s, _)| s.sigma_t));
    let cand_r = candidates(examples.iter().map(|(s, _)| s.sigma_r));
    let m = cand_r.len();

    let mut by_t: Vec<&(MotionSummary, bool)> = examples.iter().collect();
    by_t.sort_by(|a, b| a.0.sigma_t.total_cmp(&b.0.sigma_t));

    // Examples with sigma_t <= tau_t, bucketed by how many rotation
    // candidates lie strictly below their sigma_r.
    let mut low_pos = vec![0usize; m + 1];
    let mut low_neg = vec![0usize; m + 1];
    let mut low_pos_total = 0;
    let mut next = 0;
    let mut best: Option<(usize, f64, f64)> = None;
    for &tau_t in &cand_t {
        while next < by_t.len() && by_t[next].0.sigma_t <= tau_t {
            let (s, label) = by_t[next];
            let k = cand_r.partition_point(|&c| c < s.sigma_r);
            if *label {
                low_pos[k] += 1;
                low_pos_total += 1;
            } else {
                low_neg[k] += 1;
            }
            next += 1;
        }
        // Above tau_t everything is predicted affected.
        let high_correct = positives - low_pos_total;
        // For tau_r = cand_r[j]: positives with k > j and negatives with
        // k <= j are correct.
        let mut pos_above = low_pos_total - low_pos[0];
        let mut neg_at_or_below = low_neg[0];
        for (j, &tau_r) in cand_r.iter().enumerate() {
            let correct = high_correct + pos_above + neg_at_or_below;
            if best.is_none_or(|(c, _, _)| correct > c) {
                best = Some((correct, tau_t, tau_r));
            }
            pos_above -= low_pos[j + 1];
            neg_at_or_below += low_neg[j + 1];
        }
    }
    let (correct, tau_t, tau_r) = best.expect("candidate grids are never empty");
    Ok(GridResult {
        thresholds: Thresholds { tau_t, tau_r },
        accuracy: correct as f64 / examples.len() as f64,
    })
}
