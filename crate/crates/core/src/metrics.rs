//! Trajectory and map error statistics.

use std::collections::BTreeMap;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlamError};
use crate::simulator::SimLog;
use crate::types::{wrap_angle, LandmarkId, LandmarkTruth, Pose2D};
use crate::ufastslam::FilterState;

/// `(position error, |wrapped heading error|)`.
pub fn pose_error(truth: &Pose2D, est: &Pose2D) -> (f64, f64) {
    let pos = (truth.x - est.x).hypot(truth.y - est.y);
    (pos, wrap_angle(truth.theta - est.theta).abs())
}

/// Weighted mean pose (circular mean for heading) and, per landmark id,
/// the mean over the particles that carry it with their weights
/// renormalized.
pub fn estimated_state(state: &FilterState) -> (Pose2D, BTreeMap<LandmarkId, Vector2<f64>>) {
    let total: f64 = state.particles.iter().map(|p| p.weight).sum();
    let norm = if total > 0.0 { total } else { 1.0 };
    let (mut x, mut y, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
    let mut acc: BTreeMap<LandmarkId, (Vector2<f64>, f64)> = BTreeMap::new();
    for p in &state.particles {
        let w = p.weight / norm;
        let m = p.pose_mean();
        x += w * m.x;
        y += w * m.y;
        s += w * m.theta.sin();
        c += w * m.theta.cos();
        for (id, lm) in &p.landmarks {
            let e = acc.entry(*id).or_insert((Vector2::zeros(), 0.0));
            e.0 += lm.mean * p.weight;
            e.1 += p.weight;
        }
    }
    let theta = if s == 0.0 && c == 0.0 {
        0.0
    } else {
        s.atan2(c)
    };
    let map = acc
        .into_iter()
        .map(|(id, (sum, w))| {
            let mean = if w > 0.0 { sum / w } else { sum };
            (id, mean)
        })
        .collect();
    (Pose2D::new(x, y, theta), map)
}

/// Filter output recorded after one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEstimate {
    pub pose: Pose2D,
    pub n_eff: f64,
    pub resampled: bool,
    pub n_landmarks: usize,
}

impl StepEstimate {
    pub fn from_state(state: &FilterState) -> (Self, BTreeMap<LandmarkId, Vector2<f64>>) {
        let (pose, map) = estimated_state(state);
        (
            Self {
                pose,
                n_eff: state.n_eff,
                resampled: state.resampled,
                n_landmarks: map.len(),
            },
            map,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    pub max_position_error: f64,
    pub mean_position_error: f64,
    pub final_position_error: f64,
    pub max_heading_error: f64,
    pub mean_heading_error: f64,
    /// Over ids present in both truth and the final map; `None` if no id
    /// matched.
    pub final_landmark_rmse: Option<f64>,
    pub matched_landmarks: usize,
    pub resample_count: usize,
    pub n_eff: Vec<f64>,
    pub position_errors: Vec<f64>,
}

impl RunStats {
    /// Mean position error over the trailing `fraction` of the run.
    pub fn tail_mean_position_error(&self, fraction: f64) -> f64 {
        let n = self.position_errors.len();
        if n == 0 {
            return 0.0;
        }
        let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
        self.position_errors[n - k..].iter().sum::<f64>() / k as f64
    }
}

/// Root-mean-square landmark position error over matched ids.
pub fn landmark_rmse(
    truth: &[LandmarkTruth],
    estimate: &BTreeMap<LandmarkId, Vector2<f64>>,
) -> (Option<f64>, usize) {
    let mut sum = 0.0;
    let mut n = 0;
    for lm in truth {
        if let Some(m) = estimate.get(&lm.id) {
            sum += (m - lm.position()).norm_squared();
            n += 1;
        }
    }
    if n == 0 {
        (None, 0)
    } else {
        ((sum / n as f64).sqrt().into(), n)
    }
}

pub fn run_summary(
    truth: &SimLog,
    estimates: &[StepEstimate],
    landmarks: &[LandmarkTruth],
    final_map: &BTreeMap<LandmarkId, Vector2<f64>>,
) -> Result<RunStats> {
    if truth.steps.len() != estimates.len() {
        return Err(SlamError::Mismatch(format!(
            "truth has {} steps but {} estimates were given",
            truth.steps.len(),
            estimates.len()
        )));
    }
    let (pos, head): (Vec<f64>, Vec<f64>) = truth
        .steps
        .iter()
        .zip(estimates)
        .map(|(t, e)| pose_error(&t.true_pose, &e.pose))
        .unzip();
    let n = pos.len().max(1) as f64;
    let (rmse, matched) = landmark_rmse(landmarks, final_map);
    Ok(RunStats {
        steps: pos.len(),
        max_position_error: pos.iter().copied().fold(0.0, f64::max),
        mean_position_error: pos.iter().sum::<f64>() / n,
        final_position_error: pos.last().copied().unwrap_or(0.0),
        max_heading_error: head.iter().copied().fold(0.0, f64::max),
        mean_heading_error: head.iter().sum::<f64>() / n,
        final_landmark_rmse: rmse,
        matched_landmarks: matched,
        resample_count: estimates.iter().filter(|e| e.resampled).count(),
        n_eff: estimates.iter().map(|e| e.n_eff).collect(),
        position_errors: pos,
    })
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub mean_max_position_error: f64,
    pub std_max_position_error: f64,
    pub mean_mean_position_error: f64,
    pub std_mean_position_error: f64,
}

pub fn aggregate(runs: &[RunStats]) -> Aggregate {
    let maxes: Vec<f64> = runs.iter().map(|r| r.max_position_error).collect();
    let means: Vec<f64> = runs.iter().map(|r| r.mean_position_error).collect();
    let (mm, sm) = mean_std(&maxes);
    let (ma, sa) = mean_std(&means);
    Aggregate {
        runs: runs.len(),
        mean_max_position_error: mm,
        std_max_position_error: sm,
        mean_mean_position_error: ma,
        std_mean_position_error: sa,
    }
}
