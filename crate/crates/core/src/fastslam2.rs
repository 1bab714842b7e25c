//! FastSLAM 2.0 baseline: the same particle machinery as
//! [`crate::ufastslam`] with every sigma-point transform replaced by a
//! first-order (Jacobian) linearization.

use nalgebra::Matrix2;

use crate::error::{Result, SlamError};
use crate::models::{
    control_noise_cov, measure_vec, measurement_jacobians, motion_jacobians, motion_mean,
};
use crate::types::{symmetrize_psd, wrap_angle, ControlInput, Gaussian, Pose2D, RangeBearing};
use crate::ufastslam::{
    inverse_innovation, jacobian_innovation, log_importance_weight, run_step, FilterConfig,
    FilterState, LandmarkEstimate, Particle, ProposalBackend,
};

/// Linearized pose proposal: EKF prediction followed by sequential EKF
/// refinements with each known landmark, in ascending id order. Returns the
/// proposal and the summed log-likelihood of the observations under the
/// linearized innovation covariance.
fn proposal_with_weight(
    particle: &Particle,
    u: &ControlInput,
    dt: f64,
    known: &[RangeBearing],
    q_t: &Matrix2<f64>,
    r_t: &Matrix2<f64>,
) -> Result<(Gaussian<3>, f64)> {
    let prior = Pose2D::from_vector(&particle.pose.mean);
    let (f_pose, f_u) = motion_jacobians(&prior, u, dt);
    let mean = motion_mean(&prior, u, dt).to_vector();
    let cov = f_pose * particle.pose.cov * f_pose.transpose() + f_u * q_t * f_u.transpose();
    let mut pose = Gaussian::new_unchecked(mean, symmetrize_psd(&cov)?);

    let mut log_w = 0.0;
    let mut sorted = known.to_vec();
    sorted.sort_by_key(|z| z.landmark_id);
    for z in &sorted {
        let id = z.landmark_id;
        let lm = particle
            .landmarks
            .get(&id)
            .ok_or(SlamError::UnknownLandmark(id))?;
        let (z_hat, h_pose, l) =
            jacobian_innovation(&pose, lm, r_t).map_err(|e| e.at_landmark(id))?;
        log_w += log_importance_weight(z, &z_hat, &l).map_err(|e| e.at_landmark(id))?;
        let gain = pose.cov
            * h_pose.transpose()
            * inverse_innovation(&l).map_err(|e| e.at_landmark(id))?;
        let mut mean = pose.mean + gain * z.residual(&z_hat);
        mean[2] = wrap_angle(mean[2]);
        let cov = symmetrize_psd(&(pose.cov - gain * l * gain.transpose()))
            .map_err(|e| e.at_landmark(id))?;
        pose = Gaussian::new_unchecked(mean, cov);
    }
    Ok((pose, log_w))
}

/// The linearized pose proposal for one particle.
pub fn ekf_proposal(
    particle: &Particle,
    u: &ControlInput,
    dt: f64,
    observations: &[RangeBearing],
    config: &FilterConfig,
) -> Result<Gaussian<3>> {
    let known: Vec<RangeBearing> = observations
        .iter()
        .filter(|z| particle.landmarks.contains_key(&z.landmark_id))
        .copied()
        .collect();
    let q_t = control_noise_cov(u, &config.motion);
    proposal_with_weight(particle, u, dt, &known, &q_t, &config.sensor.cov()).map(|(g, _)| g)
}

/// EKF update of a landmark conditioned on a sampled pose.
pub fn ekf_landmark_update(
    lm: &LandmarkEstimate,
    pose: &Pose2D,
    z: &RangeBearing,
    r_t: &Matrix2<f64>,
) -> Result<LandmarkEstimate> {
    if lm.id != z.landmark_id {
        return Err(SlamError::UnknownLandmark(z.landmark_id));
    }
    let p = pose.to_vector();
    let z_hat = measure_vec(&p, &lm.mean)?;
    let (_, h_lm) = measurement_jacobians(&p, &lm.mean)?;
    let s = h_lm * lm.cov * h_lm.transpose() + r_t;
    let s = 0.5 * (s + s.transpose());
    let gain = lm.cov * h_lm.transpose() * inverse_innovation(&s)?;
    Ok(LandmarkEstimate {
        id: lm.id,
        mean: lm.mean + gain * z.residual(&z_hat),
        cov: symmetrize_psd(&(lm.cov - gain * s * gain.transpose()))?,
    })
}

/// The linearized baseline filter. Its importance weight always uses the
/// Jacobian innovation covariance; `config.weight_form` is ignored.
#[derive(Debug, Clone)]
pub struct FastSlam2 {
    pub config: FilterConfig,
}

impl FastSlam2 {
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

impl ProposalBackend for FastSlam2 {
    fn propose(
        &self,
        particle: &Particle,
        u: &ControlInput,
        dt: f64,
        known: &[RangeBearing],
    ) -> Result<(Gaussian<3>, f64)> {
        let q_t = control_noise_cov(u, &self.config.motion);
        proposal_with_weight(particle, u, dt, known, &q_t, &self.config.sensor.cov())
    }

    fn update_landmark(
        &self,
        lm: &LandmarkEstimate,
        pose: &Pose2D,
        z: &RangeBearing,
    ) -> Result<(LandmarkEstimate, f64)> {
        Ok((
            ekf_landmark_update(lm, pose, z, &self.config.sensor.cov())?,
            0.0,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{MotionNoiseParams, SensorNoiseParams};
    use crate::types::LandmarkId;
    use nalgebra::{Matrix3, Vector2, Vector3};

    fn config() -> FilterConfig {
        FilterConfig::new(
            1,
            MotionNoiseParams::new(0.1, 0.0, 0.05, 0.0).unwrap(),
            SensorNoiseParams::new(0.1, 0.02).unwrap(),
        )
    }

    #[test]
    fn zero_covariance_proposal_is_motion_mean() {
        let mut cfg = config();
        cfg.motion = MotionNoiseParams::zero();
        let p = Particle::new(Pose2D::new(1.0, 2.0, 0.3), 1.0);
        let u = ControlInput::new(1.0, 0.2);
        let g = ekf_proposal(&p, &u, 0.5, &[], &cfg).unwrap();
        assert!((g.mean - motion_mean(&p.pose_mean(), &u, 0.5).to_vector()).norm() < 1e-15);
        assert_eq!(g.cov, Matrix3::zeros());
    }

    #[test]
    fn stationary_proposal_adds_only_control_noise() {
        let cfg = config();
        let mut p = Particle::new(Pose2D::new(0.0, 0.0, 0.0), 1.0);
        p.pose.cov = Matrix3::from_diagonal(&Vector3::new(0.1, 0.2, 0.3));
        let g = ekf_proposal(&p, &ControlInput::default(), 1.0, &[], &cfg).unwrap();
        // Q_t is zero at v = w = 0.
        assert_eq!(g.mean, p.pose.mean);
        assert!((g.cov - p.pose.cov).norm() < 1e-15);
    }

    #[test]
    fn landmark_update_edge_cases() {
        let r_t = Matrix2::new(0.01, 0.0, 0.0, 0.001);
        let lm = LandmarkEstimate {
            id: LandmarkId(1),
            mean: Vector2::new(3.0, 1.0),
            cov: Matrix2::new(0.2, 0.05, 0.05, 0.1),
        };
        let pose = Pose2D::new(0.0, 0.0, 0.1);
        let z_hat = measure_vec(&pose.to_vector(), &lm.mean).unwrap();
        let z = RangeBearing::new(LandmarkId(1), z_hat[0], z_hat[1]);
        let out = ekf_landmark_update(&lm, &pose, &z, &r_t).unwrap();
        assert!((out.mean - lm.mean).norm() < 1e-14);
        assert!(out.cov.trace() <= lm.cov.trace());

        let known = LandmarkEstimate {
            cov: Matrix2::zeros(),
            ..lm.clone()
        };
        let z2 = RangeBearing::new(LandmarkId(1), z_hat[0] + 0.3, z_hat[1] - 0.1);
        assert_eq!(
            ekf_landmark_update(&known, &pose, &z2, &r_t).unwrap(),
            known
        );

        let other = RangeBearing::new(LandmarkId(9), 1.0, 0.0);
        assert!(ekf_landmark_update(&lm, &pose, &other, &r_t).is_err());
    }
}
