//! CSV / JSON artifacts of a run.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::runner::RunOutput;
use crate::error::{Result, SlamError};
use crate::metrics::pose_error;

pub const STEPS_HEADER: [&str; 13] = [
    "step",
    "t",
    "true_x",
    "true_y",
    "true_theta",
    "est_x",
    "est_y",
    "est_theta",
    "pos_err",
    "heading_err",
    "n_eff",
    "resampled",
    "n_landmarks",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: u64,
    pub t: f64,
    pub true_x: f64,
    pub true_y: f64,
    pub true_theta: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub est_theta: f64,
    pub pos_err: f64,
    pub heading_err: f64,
    pub n_eff: f64,
    pub resampled: bool,
    pub n_landmarks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRow {
    pub id: u32,
    pub true_x: f64,
    pub true_y: f64,
    pub est_x: Option<f64>,
    pub est_y: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRow {
    pub step: u64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub algo: String,
    pub seed: u64,
    pub particles: usize,
    pub steps: usize,
    pub path_length: f64,
    pub max_position_error: f64,
    pub mean_position_error: f64,
    pub final_position_error: f64,
    pub max_heading_error: f64,
    pub mean_heading_error: f64,
    pub final_landmark_rmse: Option<f64>,
    pub matched_landmarks: usize,
    pub resample_count: usize,
    pub min_n_eff: f64,
}

pub fn step_rows(out: &RunOutput) -> Vec<StepRow> {
    out.log
        .steps
        .iter()
        .zip(&out.estimates)
        .map(|(s, e)| {
            let (pos_err, heading_err) = pose_error(&s.true_pose, &e.pose);
            StepRow {
                step: s.step,
                t: s.t,
                true_x: s.true_pose.x,
                true_y: s.true_pose.y,
                true_theta: s.true_pose.theta,
                est_x: e.pose.x,
                est_y: e.pose.y,
                est_theta: e.pose.theta,
                pos_err,
                heading_err,
                n_eff: e.n_eff,
                resampled: e.resampled,
                n_landmarks: e.n_landmarks,
            }
        })
        .collect()
}

pub fn landmark_rows(out: &RunOutput) -> Vec<LandmarkRow> {
    let mut lms = out.spec.scenario.landmarks.clone();
    lms.sort_by_key(|l| l.id);
    lms.iter()
        .map(|l| {
            let est = out.final_map.get(&l.id);
            LandmarkRow {
                id: l.id.0,
                true_x: l.x,
                true_y: l.y,
                est_x: est.map(|m| m.x),
                est_y: est.map(|m| m.y),
            }
        })
        .collect()
}

pub fn dead_reckoning_rows(out: &RunOutput) -> Vec<PoseRow> {
    let start = PoseRow {
        step: 0,
        x: out.log.initial_pose.x,
        y: out.log.initial_pose.y,
        theta: out.log.initial_pose.theta,
    };
    std::iter::once(start)
        .chain(
            out.dead_reckoning
                .iter()
                .zip(&out.log.steps)
                .map(|(p, s)| PoseRow {
                    step: s.step,
                    x: p.x,
                    y: p.y,
                    theta: p.theta,
                }),
        )
        .collect()
}

pub fn summary(out: &RunOutput) -> Summary {
    let s = &out.stats;
    Summary {
        scenario: out.spec.scenario.name.clone(),
        algo: out.spec.algo.to_string(),
        seed: out.spec.seed,
        particles: out.spec.filter.particle_count,
        steps: s.steps,
        path_length: out.log.path_length(),
        max_position_error: s.max_position_error,
        mean_position_error: s.mean_position_error,
        final_position_error: s.final_position_error,
        max_heading_error: s.max_heading_error,
        mean_heading_error: s.mean_heading_error,
        final_landmark_rmse: s.final_landmark_rmse,
        matched_landmarks: s.matched_landmarks,
        resample_count: s.resample_count,
        min_n_eff: s.n_eff.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads every record; an input without data rows is an error.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path)
        .map_err(|e| SlamError::Mismatch(format!("cannot open {}: {e}", path.display())))?;
    let rows = csv::Reader::from_reader(BufReader::new(file))
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()?;
    if rows.is_empty() {
        return Err(SlamError::Mismatch(format!(
            "{} has no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    use std::io::Write;
    writeln!(w)?;
    Ok(())
}

/// Writes `steps.csv`, `summary.json`, `landmarks.csv`, `dead_reckoning.csv`
/// and `sim.jsonl` into `dir`.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join("steps.csv"), &step_rows(out))?;
    write_csv(&dir.join("landmarks.csv"), &landmark_rows(out))?;
    write_csv(&dir.join("dead_reckoning.csv"), &dead_reckoning_rows(out))?;
    write_json(&dir.join("summary.json"), &summary(out))?;
    out.log
        .write_jsonl(BufWriter::new(File::create(dir.join("sim.jsonl"))?))?;
    Ok(())
}
