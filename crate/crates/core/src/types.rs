//! Geometric and probabilistic value types shared by every module, plus the
//! angle and covariance helpers that keep them well-formed.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, SMatrix, SVector, SymmetricEigen, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlamError};

const TWO_PI: f64 = 2.0 * PI;

/// Wraps an angle into `(-π, π]`.
///
/// Non-finite input propagates as NaN; use [`checked_wrap_angle`] where the
/// caller needs a hard error.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TWO_PI);
    if r > PI {
        r - TWO_PI
    } else {
        r
    }
}

pub fn checked_wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(SlamError::NonFinite("angle"));
    }
    Ok(wrap_angle(a))
}

/// Symmetrizes `m` and clamps eigenvalues in `[-1e-9·trace, 0)` to zero.
///
/// Anything more negative than the tolerance is reported as a numerical
/// failure rather than silently repaired.
pub fn symmetrize_psd<const D: usize>(m: &SMatrix<f64, D, D>) -> Result<SMatrix<f64, D, D>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(SlamError::NonFinite("covariance"));
    }
    let sym = symmetrized(m);
    if is_psd_fast(&sym) {
        return Ok(sym);
    }
    let tol = psd_tolerance(&sym);
    let eig = SymmetricEigen::new(DMatrix::from_column_slice(D, D, sym.as_slice()));
    let min = eig.eigenvalues.min();
    if min < -tol {
        return Err(SlamError::Numerical(format!(
            "covariance eigenvalue {min:e} below tolerance -{tol:e}"
        )));
    }
    if min >= 0.0 {
        return Ok(sym);
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let rebuilt =
        &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    Ok(symmetrized(&SMatrix::from_column_slice(rebuilt.as_slice())))
}

fn symmetrized<const D: usize>(m: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    SMatrix::from_fn(|i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

pub(crate) fn psd_tolerance<const D: usize>(m: &SMatrix<f64, D, D>) -> f64 {
    1e-9 * m.trace().abs()
}

// Cholesky-style pivot scan: succeeds only for matrices that are clearly PSD.
fn is_psd_fast<const D: usize>(m: &SMatrix<f64, D, D>) -> bool {
    let mut a = *m;
    for k in 0..D {
        let pivot = a[(k, k)];
        if pivot < 0.0 {
            return false;
        }
        if pivot == 0.0 {
            if (k + 1..D).any(|i| a[(i, k)] != 0.0) {
                return false;
            }
            continue;
        }
        for i in k + 1..D {
            let f = a[(i, k)] / pivot;
            for j in k + 1..=i {
                a[(i, j)] -= f * a[(j, k)];
            }
        }
    }
    true
}

/// Robot pose in the world frame; `theta` always lies in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.theta)
    }

    pub fn position(self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

impl Default for Pose2D {
    fn default() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }
}

/// Velocity command `(v, w)`: translational m/s, rotational rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub v: f64,
    pub w: f64,
}

impl ControlInput {
    pub fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }

    pub fn is_finite(self) -> bool {
        self.v.is_finite() && self.w.is_finite()
    }
}

/// Landmark identity. The sensor resolves identity directly, so data
/// association is never estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LandmarkId(pub u32);

impl fmt::Display for LandmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// An identified range-bearing observation. `phi` is relative to the robot
/// heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeBearing {
    pub landmark_id: LandmarkId,
    pub r: f64,
    pub phi: f64,
}

impl RangeBearing {
    pub fn new(landmark_id: LandmarkId, r: f64, phi: f64) -> Self {
        Self {
            landmark_id,
            r: r.max(0.0),
            phi: wrap_angle(phi),
        }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.r, self.phi)
    }

    /// `z - other` with the bearing component wrapped.
    pub fn residual(self, other: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(self.r - other[0], wrap_angle(self.phi - other[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkTruth {
    pub id: LandmarkId,
    pub x: f64,
    pub y: f64,
}

impl LandmarkTruth {
    pub fn new(id: u32, x: f64, y: f64) -> Self {
        Self {
            id: LandmarkId(id),
            x,
            y,
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// A `D`-dimensional Gaussian belief.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian<const D: usize> {
    pub mean: SVector<f64, D>,
    pub cov: SMatrix<f64, D, D>,
}

impl<const D: usize> Gaussian<D> {
    /// Builds a Gaussian, rejecting covariances that are not symmetric
    /// (1e-9 relative) or not PSD (eigenvalues below `-1e-9·trace`).
    pub fn new(mean: SVector<f64, D>, cov: SMatrix<f64, D, D>) -> Result<Self> {
        let g = Self { mean, cov };
        g.validate()?;
        Ok(g)
    }

    pub fn new_unchecked(mean: SVector<f64, D>, cov: SMatrix<f64, D, D>) -> Self {
        Self { mean, cov }
    }

    pub fn point(mean: SVector<f64, D>) -> Self {
        Self {
            mean,
            cov: SMatrix::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .mean
            .iter()
            .chain(self.cov.iter())
            .any(|v| !v.is_finite())
        {
            return Err(SlamError::NonFinite("gaussian"));
        }
        let scale = self.cov.abs().max().max(f64::MIN_POSITIVE);
        let asym = (self.cov - self.cov.transpose()).abs().max();
        if asym > 1e-9 * scale {
            return Err(SlamError::Numerical(format!(
                "covariance asymmetric by {asym:e}"
            )));
        }
        if !is_psd_fast(&symmetrized(&self.cov)) {
            let sym = symmetrized(&self.cov);
            let min = SymmetricEigen::new(DMatrix::from_column_slice(D, D, sym.as_slice()))
                .eigenvalues
                .min();
            if min < -psd_tolerance(&self.cov) {
                return Err(SlamError::Numerical(format!(
                    "covariance not PSD (eigenvalue {min:e})"
                )));
            }
        }
        Ok(())
    }
}
