//! Scaled unscented transform: weights, sigma-point extraction, moment
//! reconstruction and cross-covariance.
//!
//! Dimensions are const generics so the 7-dimensional augmented pose state,
//! the 3-dimensional pose and the 2-dimensional landmark all stay on the
//! stack.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlamError};
use crate::types::{symmetrize_psd, wrap_angle, Gaussian};

/// `(α, κ, β)` of the scaled unscented transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtParams {
    pub alpha: f64,
    pub kappa: f64,
    pub beta: f64,
}

impl Default for UtParams {
    /// α = 1, κ = 0, β = 2: λ = 0, so every weight is nonnegative.
    fn default() -> Self {
        Self {
            alpha: 1.0,
            kappa: 0.0,
            beta: 2.0,
        }
    }
}

impl UtParams {
    pub fn new(alpha: f64, kappa: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(SlamError::invalid("ut.alpha", "must be finite and > 0"));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(SlamError::invalid("ut.kappa", "must be finite and >= 0"));
        }
        if !beta.is_finite() {
            return Err(SlamError::invalid("ut.beta", "must be finite"));
        }
        Ok(Self { alpha, kappa, beta })
    }

    pub fn lambda(&self, n: usize) -> f64 {
        let n = n as f64;
        self.alpha * self.alpha * (n + self.kappa) - n
    }

    /// `n + λ`, the spread factor under the square root.
    pub fn scale(&self, n: usize) -> Result<f64> {
        let s = n as f64 + self.lambda(n);
        if s > 0.0 && s.is_finite() {
            Ok(s)
        } else {
            Err(SlamError::invalid(
                "ut",
                format!("n + lambda = {s} must be > 0 for n = {n}"),
            ))
        }
    }
}

/// Mean and covariance weights for `2n + 1` sigma points.
pub fn ut_weights(n: usize, p: &UtParams) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(SlamError::invalid("n", "dimension must be >= 1"));
    }
    let scale = p.scale(n)?;
    let lambda = p.lambda(n);
    let wi = 1.0 / (2.0 * scale);
    let mut w_m = vec![wi; 2 * n + 1];
    let mut w_c = vec![wi; 2 * n + 1];
    w_m[0] = lambda / scale;
    w_c[0] = lambda / scale + (1.0 - p.alpha * p.alpha + p.beta);
    Ok((w_m, w_c))
}

/// Lower-triangular `L` with `L·Lᵀ = m` for symmetric PSD `m`.
///
/// Zero pivots (rank-deficient blocks such as an exactly known pose) give
/// zero columns. If the scan fails, diagonal jitter starting at
/// `1e-12·trace` and doubling up to `1e-6·trace` is tried before giving up.
pub fn psd_sqrt<const D: usize>(m: &SMatrix<f64, D, D>) -> Result<SMatrix<f64, D, D>> {
    let trace = m.trace();
    if !trace.is_finite() || trace < 0.0 {
        return Err(SlamError::Numerical(format!(
            "cannot factor matrix with trace {trace}"
        )));
    }
    if trace == 0.0 {
        if m.iter().all(|v| *v == 0.0) {
            return Ok(SMatrix::zeros());
        }
        return Err(SlamError::Numerical("indefinite zero-trace matrix".into()));
    }
    if let Some(l) = semidefinite_cholesky(m, trace) {
        return Ok(l);
    }
    let mut jitter = 1e-12 * trace;
    while jitter <= 1e-6 * trace * (1.0 + 1e-12) {
        let mut shifted = *m;
        for i in 0..D {
            shifted[(i, i)] += jitter;
        }
        if let Some(l) = semidefinite_cholesky(&shifted, trace) {
            return Ok(l);
        }
        jitter *= 2.0;
    }
    Err(SlamError::Numerical(
        "square-root factorization failed after jitter".into(),
    ))
}

fn semidefinite_cholesky<const D: usize>(
    m: &SMatrix<f64, D, D>,
    trace: f64,
) -> Option<SMatrix<f64, D, D>> {
    let zero_tol = 1e-14 * trace;
    let neg_tol = 1e-12 * trace;
    let mut l = SMatrix::<f64, D, D>::zeros();
    for k in 0..D {
        let mut pivot = m[(k, k)];
        for j in 0..k {
            pivot -= l[(k, j)] * l[(k, j)];
        }
        if pivot < -neg_tol {
            return None;
        }
        if pivot <= zero_tol {
            // Rank-deficient direction: the rest of the column must vanish too.
            for i in k + 1..D {
                let mut v = m[(i, k)];
                for j in 0..k {
                    v -= l[(i, j)] * l[(k, j)];
                }
                if v.abs() > (zero_tol * trace).sqrt() {
                    return None;
                }
            }
            continue;
        }
        let d = pivot.sqrt();
        l[(k, k)] = d;
        for i in k + 1..D {
            let mut v = m[(i, k)];
            for j in 0..k {
                v -= l[(i, j)] * l[(k, j)];
            }
            l[(i, k)] = v / d;
        }
    }
    Some(l)
}

/// `2n + 1` sigma points with their mean/covariance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPointSet<const D: usize> {
    pub points: Vec<SVector<f64, D>>,
    pub w_m: Vec<f64>,
    pub w_c: Vec<f64>,
}

impl<const D: usize> SigmaPointSet<D> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Pushes every point through `f`, keeping the weights.
    pub fn map<const M: usize>(
        &self,
        mut f: impl FnMut(&SVector<f64, D>) -> SVector<f64, M>,
    ) -> SigmaPointSet<M> {
        SigmaPointSet {
            points: self.points.iter().map(&mut f).collect(),
            w_m: self.w_m.clone(),
            w_c: self.w_c.clone(),
        }
    }

    pub fn try_map<const M: usize>(
        &self,
        mut f: impl FnMut(&SVector<f64, D>) -> Result<SVector<f64, M>>,
    ) -> Result<SigmaPointSet<M>> {
        let points = self.points.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        Ok(SigmaPointSet {
            points,
            w_m: self.w_m.clone(),
            w_c: self.w_c.clone(),
        })
    }
}

/// Extracts sigma points `μ`, `μ ± col_i(√((n+λ)·P))` with a lower-triangular root.
pub fn sigma_points<const D: usize>(g: &Gaussian<D>, p: &UtParams) -> Result<SigmaPointSet<D>> {
    let (w_m, w_c) = ut_weights(D, p)?;
    let scale = p.scale(D)?;
    let cov = symmetrize_psd(&g.cov)?;
    let root = psd_sqrt(&(cov * scale))?;
    let mut points = Vec::with_capacity(2 * D + 1);
    points.push(g.mean);
    for i in 0..D {
        points.push(g.mean + root.column(i));
    }
    for i in 0..D {
        points.push(g.mean - root.column(i));
    }
    Ok(SigmaPointSet { points, w_m, w_c })
}

/// `a - b`, wrapping the listed angle coordinates.
pub fn residual<const D: usize>(
    a: &SVector<f64, D>,
    b: &SVector<f64, D>,
    angle_coords: &[usize],
) -> SVector<f64, D> {
    let mut d = a - b;
    for &k in angle_coords {
        d[k] = wrap_angle(d[k]);
    }
    d
}

/// Weighted mean of the points; angle coordinates are averaged as wrapped
/// residuals about the first point.
pub fn weighted_mean<const D: usize>(
    s: &SigmaPointSet<D>,
    angle_coords: &[usize],
) -> SVector<f64, D> {
    // Accumulate offsets from the first point so that coincident points
    // reproduce it exactly.
    let anchor = s.points[0];
    let mut offset = SVector::<f64, D>::zeros();
    for (pt, w) in s.points.iter().zip(&s.w_m).skip(1) {
        offset += residual(pt, &anchor, angle_coords) * *w;
    }
    let mut mean = anchor + offset;
    for &k in angle_coords {
        mean[k] = wrap_angle(mean[k]);
    }
    mean
}

fn raw_covariance<const D: usize>(
    s: &SigmaPointSet<D>,
    mean: &SVector<f64, D>,
    angle_coords: &[usize],
) -> SMatrix<f64, D, D> {
    let mut cov = SMatrix::<f64, D, D>::zeros();
    for (pt, w) in s.points.iter().zip(&s.w_c) {
        let d = residual(pt, mean, angle_coords);
        cov += d * d.transpose() * *w;
    }
    cov
}

/// Recovers `(mean, cov)` from (transformed) sigma points.
pub fn reconstruct_gaussian<const D: usize>(
    s: &SigmaPointSet<D>,
    angle_coords: &[usize],
) -> Result<Gaussian<D>> {
    if s.points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(SlamError::NonFinite("sigma point"));
    }
    let mean = weighted_mean(s, angle_coords);
    let cov = symmetrize_psd(&raw_covariance(s, &mean, angle_coords))?;
    Ok(Gaussian::new_unchecked(mean, cov))
}

/// `Σ w_c[i]·(a_i − ā)(b_i − b̄)ᵀ`.
pub fn cross_covariance<const A: usize, const B: usize>(
    a: &[SVector<f64, A>],
    mean_a: &SVector<f64, A>,
    angles_a: &[usize],
    b: &[SVector<f64, B>],
    mean_b: &SVector<f64, B>,
    angles_b: &[usize],
    w_c: &[f64],
) -> SMatrix<f64, A, B> {
    assert_eq!(a.len(), b.len(), "sigma point counts differ");
    assert_eq!(a.len(), w_c.len(), "weight count differs");
    let mut c = SMatrix::<f64, A, B>::zeros();
    for ((pa, pb), w) in a.iter().zip(b).zip(w_c) {
        let da = residual(pa, mean_a, angles_a);
        let db = residual(pb, mean_b, angles_b);
        c += da * db.transpose() * *w;
    }
    c
}
