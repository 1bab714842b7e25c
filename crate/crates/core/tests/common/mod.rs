//! Helpers shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{SMatrix, SVector};
use ufslam::wrap_angle;

/// Central differences of `f` at `x`; rows listed in `angle_rows` are
/// differenced modulo 2π.
pub fn numeric<const N: usize, const M: usize>(
    f: impl Fn(&SVector<f64, N>) -> SVector<f64, M>,
    x: &SVector<f64, N>,
    angle_rows: &[usize],
) -> SMatrix<f64, M, N> {
    numeric_with_steps(f, x, angle_rows, |k| 1e-6 * x[k].abs().max(1.0))
}

pub fn numeric_with_steps<const N: usize, const M: usize>(
    f: impl Fn(&SVector<f64, N>) -> SVector<f64, M>,
    x: &SVector<f64, N>,
    angle_rows: &[usize],
    step: impl Fn(usize) -> f64,
) -> SMatrix<f64, M, N> {
    let mut j = SMatrix::<f64, M, N>::zeros();
    for k in 0..N {
        let h = step(k);
        let mut xp = *x;
        let mut xm = *x;
        xp[k] += h;
        xm[k] -= h;
        let mut d = f(&xp) - f(&xm);
        for &r in angle_rows {
            d[r] = wrap_angle(d[r]);
        }
        j.set_column(k, &(d / (2.0 * h)));
    }
    j
}
