use std::collections::BTreeMap;

use nalgebra::Vector2;

use super::config::{Algorithm, RunSpec};
use crate::error::Result;
use crate::fastslam2::FastSlam2;
use crate::metrics::{run_summary, RunStats, StepEstimate};
use crate::models::motion_mean;
use crate::rng;
use crate::simulator::{drive, SimLog};
use crate::types::{ControlInput, LandmarkId, Pose2D, RangeBearing};
use crate::ufastslam::{FilterConfig, FilterState, UFastSlam};

/// Lane of the ground-truth simulation stream; particle streams use lanes
/// `0..M` and resampling uses `u64::MAX`.
pub const SIM_LANE: u64 = u64::MAX - 1;

#[derive(Debug, Clone)]
pub enum Filter {
    Unscented(UFastSlam),
    Linearized(FastSlam2),
}

impl Filter {
    pub fn new(algo: Algorithm, config: FilterConfig) -> Result<Self> {
        Ok(match algo {
            Algorithm::UFastSlam => Filter::Unscented(UFastSlam::new(config)?),
            Algorithm::FastSlam2 => Filter::Linearized(FastSlam2::new(config)?),
        })
    }

    pub fn initial_state(&self, pose: Pose2D, seed: u64) -> Result<FilterState> {
        match self {
            Filter::Unscented(f) => f.initial_state(pose, seed),
            Filter::Linearized(f) => f.initial_state(pose, seed),
        }
    }

    pub fn step(
        &self,
        state: &FilterState,
        u: &ControlInput,
        dt: f64,
        observations: &[RangeBearing],
    ) -> Result<FilterState> {
        match self {
            Filter::Unscented(f) => f.step(state, u, dt, observations),
            Filter::Linearized(f) => f.step(state, u, dt, observations),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub spec: RunSpec,
    pub log: SimLog,
    pub estimates: Vec<StepEstimate>,
    pub final_map: BTreeMap<LandmarkId, Vector2<f64>>,
    pub dead_reckoning: Vec<Pose2D>,
    pub stats: RunStats,
}

/// Simulates the scenario of `spec`.
pub fn simulate(spec: &RunSpec) -> Result<SimLog> {
    drive(&spec.scenario, &mut rng::stream(spec.seed, SIM_LANE, 0))
}

/// Poses from integrating the issued controls with no correction.
pub fn dead_reckoning(log: &SimLog) -> Vec<Pose2D> {
    let mut pose = log.initial_pose;
    log.steps
        .iter()
        .map(|s| {
            pose = motion_mean(&pose, &s.control, log.dt);
            pose
        })
        .collect()
}

/// Runs the filter of `spec` over an existing simulation log.
pub fn filter_log(spec: &RunSpec, log: &SimLog) -> Result<RunOutput> {
    let filter = Filter::new(spec.algo, spec.filter)?;
    let mut state = filter.initial_state(log.initial_pose, spec.seed)?;
    let mut estimates = Vec::with_capacity(log.steps.len());
    let mut final_map = BTreeMap::new();
    for s in &log.steps {
        state = filter.step(&state, &s.control, log.dt, &s.observations)?;
        let (e, map) = StepEstimate::from_state(&state);
        estimates.push(e);
        final_map = map;
    }
    let stats = run_summary(log, &estimates, &spec.scenario.landmarks, &final_map)?;
    Ok(RunOutput {
        spec: spec.clone(),
        log: log.clone(),
        estimates,
        final_map,
        dead_reckoning: dead_reckoning(log),
        stats,
    })
}

/// Simulates and filters one `(scenario, algorithm, seed)` run.
pub fn execute(spec: &RunSpec) -> Result<RunOutput> {
    let log = simulate(spec)?;
    filter_log(spec, &log)
}
