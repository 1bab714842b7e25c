//! Velocity motion model and range-bearing measurement model, with the
//! analytic Jacobians the linearized baseline needs.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2, Vector2, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlamError};
use crate::types::{wrap_angle, ControlInput, LandmarkTruth, Pose2D, RangeBearing};

/// Below this rotational rate the straight-line limit of the motion model is used.
pub const EPS_W: f64 = 1e-6;

/// Minimum squared range for the measurement model to be defined.
const MIN_RANGE_SQ: f64 = 1e-12;

/// Control-noise gains: σ_v = a1·|v| + a2·|w|, σ_w = a3·|v| + a4·|w|.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionNoiseParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl MotionNoiseParams {
    pub fn new(a1: f64, a2: f64, a3: f64, a4: f64) -> Result<Self> {
        let p = Self { a1, a2, a3, a4 };
        p.validate()?;
        Ok(p)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Constant noise `(σ_v, σ_w)` at a nominal forward speed.
    pub fn constant_at_speed(sigma_v: f64, sigma_w: f64, speed: f64) -> Result<Self> {
        if !(speed > 0.0) {
            return Err(SlamError::invalid("speed", "must be > 0"));
        }
        Self::new(sigma_v / speed, 0.0, sigma_w / speed, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("motion.a1", self.a1),
            ("motion.a2", self.a2),
            ("motion.a3", self.a3),
            ("motion.a4", self.a4),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SlamError::invalid(k, "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            a1: self.a1 * factor,
            a2: self.a2 * factor,
            a3: self.a3 * factor,
            a4: self.a4 * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoiseParams {
    pub sigma_r: f64,
    pub sigma_phi: f64,
}

impl SensorNoiseParams {
    pub fn new(sigma_r: f64, sigma_phi: f64) -> Result<Self> {
        let p = Self { sigma_r, sigma_phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_r > 0.0 && self.sigma_r.is_finite()) {
            return Err(SlamError::invalid(
                "sensor.sigma_r",
                "must be finite and > 0",
            ));
        }
        if !(self.sigma_phi > 0.0 && self.sigma_phi.is_finite()) {
            return Err(SlamError::invalid(
                "sensor.sigma_phi",
                "must be finite and > 0",
            ));
        }
        Ok(())
    }

    /// `R_t = diag(σ_r², σ_φ²)`.
    pub fn cov(&self) -> Matrix2<f64> {
        Matrix2::new(self.sigma_r.powi(2), 0.0, 0.0, self.sigma_phi.powi(2))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sigma_r: self.sigma_r * factor,
            sigma_phi: self.sigma_phi * factor,
        }
    }
}

// sin(a)/a and its derivative, with series expansions near zero.
fn sinc(a: f64) -> f64 {
    if a.abs() < 1e-4 {
        1.0 - a * a / 6.0
    } else {
        a.sin() / a
    }
}

fn sinc_prime(a: f64) -> f64 {
    if a.abs() < 1e-3 {
        -a / 3.0 + a.powi(3) / 30.0
    } else {
        (a * a.cos() - a.sin()) / (a * a)
    }
}

/// Translation of the arc motion, written as a chord so it stays well
/// conditioned as `w → 0`. Equal to `(v/w)(sin(θ+wΔt) − sin θ, cos θ − cos(θ+wΔt))`.
fn arc_translation(theta: f64, v: f64, w: f64, dt: f64) -> (f64, f64) {
    let half = 0.5 * w * dt;
    let chord = v * dt * sinc(half);
    let heading = theta + half;
    (chord * heading.cos(), chord * heading.sin())
}

/// Noise-free pose after applying `u` for `dt` seconds.
pub fn motion_mean(pose: &Pose2D, u: &ControlInput, dt: f64) -> Pose2D {
    Pose2D::from_vector(&motion_mean_vec(&pose.to_vector(), u, dt))
}

/// Vector form used on sigma points; `theta` may arrive unwrapped.
pub fn motion_mean_vec(pose: &Vector3<f64>, u: &ControlInput, dt: f64) -> Vector3<f64> {
    let theta = pose[2];
    let (dx, dy) = if u.w.abs() >= EPS_W {
        arc_translation(theta, u.v, u.w, dt)
    } else {
        (u.v * dt * theta.cos(), u.v * dt * theta.sin())
    };
    Vector3::new(pose[0] + dx, pose[1] + dy, wrap_angle(theta + u.w * dt))
}

/// `Q_t = diag((a1|v| + a2|w|)², (a3|v| + a4|w|)²)`.
pub fn control_noise_cov(u: &ControlInput, p: &MotionNoiseParams) -> Matrix2<f64> {
    let (sv, sw) = control_noise_std(u, p);
    Matrix2::new(sv * sv, 0.0, 0.0, sw * sw)
}

fn control_noise_std(u: &ControlInput, p: &MotionNoiseParams) -> (f64, f64) {
    (
        p.a1 * u.v.abs() + p.a2 * u.w.abs(),
        p.a3 * u.v.abs() + p.a4 * u.w.abs(),
    )
}

/// Draws the velocities the robot actually executes for command `u`.
pub fn sample_control<R: Rng + ?Sized>(
    u: &ControlInput,
    p: &MotionNoiseParams,
    rng: &mut R,
) -> ControlInput {
    let (sv, sw) = control_noise_std(u, p);
    let nv: f64 = rng.sample(StandardNormal);
    let nw: f64 = rng.sample(StandardNormal);
    ControlInput::new(u.v + sv * nv, u.w + sw * nw)
}

pub fn sample_motion<R: Rng + ?Sized>(
    pose: &Pose2D,
    u: &ControlInput,
    dt: f64,
    p: &MotionNoiseParams,
    rng: &mut R,
) -> Pose2D {
    let applied = sample_control(u, p, rng);
    motion_mean(pose, &applied, dt)
}

/// Noise-free range and bearing of `landmark` from `pose` (vector forms).
pub fn measure_vec(pose: &Vector3<f64>, landmark: &Vector2<f64>) -> Result<Vector2<f64>> {
    let dx = landmark[0] - pose[0];
    let dy = landmark[1] - pose[1];
    let q = dx * dx + dy * dy;
    if !(q > MIN_RANGE_SQ) {
        return Err(SlamError::DegenerateGeometry(format!(
            "landmark coincides with robot (squared range {q:e})"
        )));
    }
    Ok(Vector2::new(q.sqrt(), wrap_angle(dy.atan2(dx) - pose[2])))
}

pub fn measure(pose: &Pose2D, lm: &LandmarkTruth) -> Result<RangeBearing> {
    let z = measure_vec(&pose.to_vector(), &lm.position())?;
    Ok(RangeBearing::new(lm.id, z[0], z[1]))
}

/// Landmark position implied by an observation from `pose`.
pub fn inverse_measure(pose: &Pose2D, z: &RangeBearing) -> Result<Vector2<f64>> {
    if !(z.r > 0.0) {
        return Err(SlamError::invalid(
            "r",
            "range must be > 0 to place a landmark",
        ));
    }
    let a = pose.theta + z.phi;
    Ok(Vector2::new(pose.x + z.r * a.cos(), pose.y + z.r * a.sin()))
}

/// Jacobians of [`inverse_measure`] with respect to the pose and to `(r, φ)`.
pub fn inverse_measure_jacobians(
    pose: &Pose2D,
    z: &RangeBearing,
) -> (Matrix2x3<f64>, Matrix2<f64>) {
    let a = pose.theta + z.phi;
    let (s, c) = a.sin_cos();
    let h_pose = Matrix2x3::new(1.0, 0.0, -z.r * s, 0.0, 1.0, z.r * c);
    let h_z = Matrix2::new(c, -z.r * s, s, z.r * c);
    (h_pose, h_z)
}

/// `(∂h/∂pose, ∂h/∂landmark)` of the range-bearing model.
pub fn measurement_jacobians(
    pose: &Vector3<f64>,
    landmark: &Vector2<f64>,
) -> Result<(Matrix2x3<f64>, Matrix2<f64>)> {
    let dx = landmark[0] - pose[0];
    let dy = landmark[1] - pose[1];
    let q = dx * dx + dy * dy;
    if !(q > MIN_RANGE_SQ) {
        return Err(SlamError::DegenerateGeometry(format!(
            "jacobian undefined at squared range {q:e}"
        )));
    }
    let r = q.sqrt();
    let h_lm = Matrix2::new(dx / r, dy / r, -dy / q, dx / q);
    let h_pose = Matrix2x3::new(-dx / r, -dy / r, 0.0, dy / q, -dx / q, -1.0);
    Ok((h_pose, h_lm))
}

/// `(∂f/∂pose, ∂f/∂u)` of [`motion_mean`]. Uses the chord form for every `w`,
/// which reduces to the straight-line derivatives at `w = 0`.
pub fn motion_jacobians(
    pose: &Pose2D,
    u: &ControlInput,
    dt: f64,
) -> (Matrix3<f64>, Matrix3x2<f64>) {
    let theta = pose.theta;
    // The straight branch ignores w in the translation.
    let half = if u.w.abs() >= EPS_W {
        0.5 * u.w * dt
    } else {
        0.0
    };
    let dhalf_dw = if u.w.abs() >= EPS_W { 0.5 * dt } else { 0.0 };
    let heading = theta + half;
    let (s, c) = heading.sin_cos();
    let sc = sinc(half);
    let scp = sinc_prime(half);
    let chord = u.v * dt * sc;

    let f_pose = Matrix3::new(
        1.0,
        0.0,
        -chord * s, //
        0.0,
        1.0,
        chord * c, //
        0.0,
        0.0,
        1.0,
    );
    let dchord_dw = u.v * dt * scp * dhalf_dw;
    let f_u = Matrix3x2::new(
        dt * sc * c,
        dchord_dw * c - chord * s * dhalf_dw,
        dt * sc * s,
        dchord_dw * s + chord * c * dhalf_dw,
        0.0,
        dt,
    );
    (f_pose, f_u)
}
