//! Rao-Blackwellized particle-filter SLAM for planar robots observing
//! identified range-bearing landmarks.
//!
//! Two filters share one particle/landmark representation:
//!
//! * [`ufastslam`]: sigma-point (scaled unscented transform) pose proposal and
//!   landmark updates.
//! * [`fastslam2`]: the Jacobian-linearized FastSLAM 2.0 baseline.
//!
//! [`simulator`] produces ground truth and noisy measurements, [`metrics`]
//! scores runs, and [`cli`] drives single runs, noise sweeps and SVG plots.

pub mod cli;
pub mod error;
pub mod fastslam2;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod simulator;
pub mod types;
pub mod ufastslam;
pub mod unscented;

pub use error::{Result, SlamError};
pub use types::{
    symmetrize_psd, wrap_angle, ControlInput, Gaussian, LandmarkId, LandmarkTruth, Pose2D,
    RangeBearing,
};
