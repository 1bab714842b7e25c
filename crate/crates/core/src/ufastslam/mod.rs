//! Unscented FastSLAM.
//!
//! Per particle, the pose is predicted by pushing sigma points of the
//! augmented state `[pose; control noise; measurement noise]` through the
//! motion model, then refined feature by feature with sigma-point Kalman
//! updates. A pose is sampled from the refined Gaussian and every observed
//! landmark is updated with its own 2-D sigma-point transform.

mod particle;

use nalgebra::{Matrix2, SMatrix, SVector, Vector2, Vector3};

pub use particle::{
    effective_particles, importance_weight, init_landmark, log_gaussian_density,
    log_importance_weight, normalize_weights, resample, systematic_indices, FilterConfig,
    FilterState, LandmarkEstimate, Particle, WeightForm,
};
pub(crate) use particle::{inverse_innovation, jacobian_innovation, run_step, ProposalBackend};

use crate::error::{Result, SlamError};
use crate::models::{control_noise_cov, measure_vec, motion_mean_vec};
use crate::types::{symmetrize_psd, wrap_angle, ControlInput, Gaussian, Pose2D, RangeBearing};
use crate::unscented::{
    cross_covariance, reconstruct_gaussian, sigma_points, weighted_mean, SigmaPointSet, UtParams,
};

/// Dimension of the augmented state.
pub const AUGMENTED_DIM: usize = 7;

const POSE_ANGLE: [usize; 1] = [2];
const BEARING: [usize; 1] = [1];

/// `[pose; 0; 0; 0; 0]` with covariance `blockdiag(P, Q_t, R_t)`.
pub fn augment(
    pose: &Gaussian<3>,
    q_t: &Matrix2<f64>,
    r_t: &Matrix2<f64>,
) -> Gaussian<AUGMENTED_DIM> {
    let mut mean = SVector::<f64, AUGMENTED_DIM>::zeros();
    mean.fixed_rows_mut::<3>(0).copy_from(&pose.mean);
    let mut cov = SMatrix::<f64, AUGMENTED_DIM, AUGMENTED_DIM>::zeros();
    cov.fixed_view_mut::<3, 3>(0, 0).copy_from(&pose.cov);
    cov.fixed_view_mut::<2, 2>(3, 3).copy_from(q_t);
    cov.fixed_view_mut::<2, 2>(5, 5).copy_from(r_t);
    Gaussian::new_unchecked(mean, cov)
}

/// Pose sigma points paired with the measurement-noise component of the
/// augmented point each one came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSigmas {
    pub pose: SigmaPointSet<3>,
    pub meas_noise: Vec<Vector2<f64>>,
}

impl PoseSigmas {
    fn from_augmented(
        set: &SigmaPointSet<AUGMENTED_DIM>,
        pose: impl Fn(&SVector<f64, AUGMENTED_DIM>) -> Vector3<f64>,
    ) -> Self {
        Self {
            pose: set.map(pose),
            meas_noise: set
                .points
                .iter()
                .map(|a| Vector2::new(a[5], a[6]))
                .collect(),
        }
    }

    /// Sigma points of the (already updated) pose Gaussian, re-augmented.
    pub fn regenerate(
        pose: &Gaussian<3>,
        q_t: &Matrix2<f64>,
        r_t: &Matrix2<f64>,
        ut: &UtParams,
    ) -> Result<Self> {
        let set = sigma_points(&augment(pose, q_t, r_t), ut)?;
        Ok(Self::from_augmented(&set, |a| {
            Vector3::new(a[0], a[1], wrap_angle(a[2]))
        }))
    }
}

/// Sigma-point prediction of the pose through the motion model; each
/// point's control-noise component perturbs the command.
pub fn predict_pose(
    pose: &Gaussian<3>,
    u: &ControlInput,
    dt: f64,
    q_t: &Matrix2<f64>,
    r_t: &Matrix2<f64>,
    ut: &UtParams,
) -> Result<(Gaussian<3>, PoseSigmas)> {
    let set = sigma_points(&augment(pose, q_t, r_t), ut)?;
    let sigmas = PoseSigmas::from_augmented(&set, |a| {
        let noisy = ControlInput::new(u.v + a[3], u.w + a[4]);
        motion_mean_vec(&Vector3::new(a[0], a[1], a[2]), &noisy, dt)
    });
    let predicted = reconstruct_gaussian(&sigmas.pose, &POSE_ANGLE)?;
    Ok((predicted, sigmas))
}

/// Result of one feature-conditioned pose update.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedPose {
    pub pose: Gaussian<3>,
    /// Sigma points regenerated from the updated Gaussian.
    pub sigmas: PoseSigmas,
    /// Predicted measurement before the update.
    pub predicted: Vector2<f64>,
    /// Innovation covariance (includes measurement noise through the
    /// augmented points).
    pub innovation_cov: Matrix2<f64>,
}

/// Sigma-point Kalman update of the pose with one observation of a known
/// landmark.
pub fn refine_pose_with_feature(
    pose: &Gaussian<3>,
    sigmas: &PoseSigmas,
    lm: &LandmarkEstimate,
    z: &RangeBearing,
    q_t: &Matrix2<f64>,
    r_t: &Matrix2<f64>,
    ut: &UtParams,
) -> Result<RefinedPose> {
    if lm.id != z.landmark_id {
        return Err(SlamError::UnknownLandmark(z.landmark_id));
    }
    let meas = pose_measurements(sigmas, lm)?;
    let predicted = weighted_mean(&meas, &BEARING);
    let s = reconstruct_gaussian(&meas, &BEARING)?.cov;
    let cross = cross_covariance(
        &sigmas.pose.points,
        &pose.mean,
        &POSE_ANGLE,
        &meas.points,
        &predicted,
        &BEARING,
        &meas.w_c,
    );
    let gain = cross * inverse_innovation(&s)?;
    let innovation = z.residual(&predicted);
    let mut mean = pose.mean + gain * innovation;
    mean[2] = wrap_angle(mean[2]);
    let cov = symmetrize_psd(&(pose.cov - gain * s * gain.transpose()))?;
    let updated = Gaussian::new_unchecked(mean, cov);
    Ok(RefinedPose {
        sigmas: PoseSigmas::regenerate(&updated, q_t, r_t, ut)?,
        pose: updated,
        predicted,
        innovation_cov: s,
    })
}

/// Output of a landmark update: posterior, predicted measurement and the
/// innovation covariance (with `R_t`).
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkUpdate {
    pub estimate: LandmarkEstimate,
    pub predicted: Vector2<f64>,
    pub innovation_cov: Matrix2<f64>,
}

/// Predicted measurement of a landmark from `pose` and its covariance
/// without sensor noise, plus the landmark sigma points used.
fn landmark_transform(
    lm: &LandmarkEstimate,
    pose: &Vector3<f64>,
    ut: &UtParams,
) -> Result<(
    SigmaPointSet<2>,
    SigmaPointSet<2>,
    Vector2<f64>,
    Matrix2<f64>,
)> {
    let set = sigma_points(&lm.gaussian(), ut)?;
    let meas = set.try_map(|m| measure_vec(pose, m))?;
    let predicted = weighted_mean(&meas, &BEARING);
    let spread = cross_covariance(
        &meas.points,
        &predicted,
        &BEARING,
        &meas.points,
        &predicted,
        &BEARING,
        &meas.w_c,
    );
    Ok((set, meas, predicted, spread))
}

/// Sigma-point update of one landmark conditioned on a sampled pose.
pub fn update_landmark(
    lm: &LandmarkEstimate,
    pose: &Pose2D,
    z: &RangeBearing,
    r_t: &Matrix2<f64>,
    ut: &UtParams,
) -> Result<LandmarkUpdate> {
    if lm.id != z.landmark_id {
        return Err(SlamError::UnknownLandmark(z.landmark_id));
    }
    let (set, meas, predicted, spread) = landmark_transform(lm, &pose.to_vector(), ut)?;
    let s = symmetrize_psd(&(spread + r_t))?;
    let cross = cross_covariance(
        &set.points,
        &lm.mean,
        &[],
        &meas.points,
        &predicted,
        &BEARING,
        &set.w_c,
    );
    let gain = cross * inverse_innovation(&s)?;
    let mean = lm.mean + gain * z.residual(&predicted);
    let cov = symmetrize_psd(&(lm.cov - gain * s * gain.transpose()))?;
    Ok(LandmarkUpdate {
        estimate: LandmarkEstimate {
            id: lm.id,
            mean,
            cov,
        },
        predicted,
        innovation_cov: s,
    })
}

/// The unscented filter.
#[derive(Debug, Clone)]
pub struct UFastSlam {
    pub config: FilterConfig,
}

impl UFastSlam {
    pub fn new(config: FilterConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn initial_state(&self, pose: Pose2D, seed: u64) -> Result<FilterState> {
        FilterState::new(&self.config, pose, seed)
    }

    pub fn step(
        &self,
        state: &FilterState,
        u: &ControlInput,
        dt: f64,
        observations: &[RangeBearing],
    ) -> Result<FilterState> {
        run_step(self, &self.config, state, u, dt, observations)
    }
}

impl ProposalBackend for UFastSlam {
    fn propose(
        &self,
        particle: &Particle,
        u: &ControlInput,
        dt: f64,
        known: &[RangeBearing],
    ) -> Result<(Gaussian<3>, f64)> {
        let cfg = &self.config;
        let q_t = control_noise_cov(u, &cfg.motion);
        let r_t = cfg.sensor.cov();
        let (mut pose, mut sigmas) = predict_pose(&particle.pose, u, dt, &q_t, &r_t, &cfg.ut)?;
        let mut log_w = 0.0;
        for z in known {
            let lm = particle
                .landmarks
                .get(&z.landmark_id)
                .ok_or(SlamError::UnknownLandmark(z.landmark_id))?;
            match (cfg.weight_form, cfg.weight_includes_pose) {
                (WeightForm::Jacobian, _) => {
                    let (z_hat, _, l) = jacobian_innovation(&pose, lm, &r_t)
                        .map_err(|e| e.at_landmark(z.landmark_id))?;
                    log_w += log_importance_weight(z, &z_hat, &l)
                        .map_err(|e| e.at_landmark(z.landmark_id))?;
                }
                (WeightForm::Unscented, true) => {
                    // Pose + sensor spread from the augmented points plus the
                    // landmark spread seen from the current pose mean.
                    let (_, _, _, lm_spread) = landmark_transform(lm, &pose.mean, &cfg.ut)
                        .map_err(|e| e.at_landmark(z.landmark_id))?;
                    let n = reconstruct_gaussian(&pose_measurements(&sigmas, lm)?, &BEARING)?;
                    log_w += log_importance_weight(z, &n.mean, &(n.cov + lm_spread))
                        .map_err(|e| e.at_landmark(z.landmark_id))?;
                }
                (WeightForm::Unscented, false) => {}
            }
            let refined = refine_pose_with_feature(&pose, &sigmas, lm, z, &q_t, &r_t, &cfg.ut)
                .map_err(|e| e.at_landmark(z.landmark_id))?;
            pose = refined.pose;
            sigmas = refined.sigmas;
        }
        Ok((pose, log_w))
    }

    fn update_landmark(
        &self,
        lm: &LandmarkEstimate,
        pose: &Pose2D,
        z: &RangeBearing,
    ) -> Result<(LandmarkEstimate, f64)> {
        let cfg = &self.config;
        let up = update_landmark(lm, pose, z, &cfg.sensor.cov(), &cfg.ut)?;
        let log_w = match (cfg.weight_form, cfg.weight_includes_pose) {
            (WeightForm::Unscented, false) => {
                log_importance_weight(z, &up.predicted, &up.innovation_cov)?
            }
            _ => 0.0,
        };
        Ok((up.estimate, log_w))
    }
}

/// Each pose sigma point observed against the landmark mean, plus that
/// point's measurement-noise component.
fn pose_measurements(sigmas: &PoseSigmas, lm: &LandmarkEstimate) -> Result<SigmaPointSet<2>> {
    let meas = sigmas.pose.try_map(|x| measure_vec(x, &lm.mean))?;
    Ok(SigmaPointSet {
        points: meas
            .points
            .iter()
            .zip(&sigmas.meas_noise)
            .map(|(h, e)| Vector2::new(h[0] + e[0], wrap_angle(h[1] + e[1])))
            .collect(),
        ..meas
    })
}
