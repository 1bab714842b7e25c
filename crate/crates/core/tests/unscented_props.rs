//! Scaled unscented transform properties.

use nalgebra::{SMatrix, SVector};
use proptest::prelude::*;
use ufslam::unscented::{
    cross_covariance, reconstruct_gaussian, sigma_points, ut_weights, UtParams,
};
use ufslam::Gaussian;

fn gaussian<const D: usize>(mean: Vec<f64>, factor: Vec<f64>) -> Gaussian<D> {
    let b = SMatrix::<f64, D, D>::from_iterator(factor);
    Gaussian::new(
        SVector::from_iterator(mean),
        b * b.transpose() + SMatrix::identity() * 1e-3,
    )
    .unwrap()
}

fn affine_case<const D: usize>(
    mean: Vec<f64>,
    factor: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    p: UtParams,
) -> Result<(), TestCaseError> {
    let g = gaussian::<D>(mean, factor);
    let a = SMatrix::<f64, D, D>::from_iterator(a);
    let b = SVector::<f64, D>::from_iterator(b);
    let set = sigma_points(&g, &p).unwrap();
    prop_assert_eq!(set.len(), 2 * D + 1);

    let back = reconstruct_gaussian(&set, &[]).unwrap();
    prop_assert!((back.mean - g.mean).abs().max() < 1e-10);
    prop_assert!((back.cov - g.cov).abs().max() < 1e-10 * g.cov.abs().max().max(1.0));

    let mapped = set.map(|x| a * x + b);
    let out = reconstruct_gaussian(&mapped, &[]).unwrap();
    let want_cov = a * g.cov * a.transpose();
    prop_assert!((out.mean - (a * g.mean + b)).abs().max() < 1e-9);
    prop_assert!((out.cov - want_cov).abs().max() < 1e-8 * want_cov.abs().max().max(1.0));

    let cross = cross_covariance(
        &set.points,
        &g.mean,
        &[],
        &mapped.points,
        &out.mean,
        &[],
        &set.w_c,
    );
    let want_cross = g.cov * a.transpose();
    prop_assert!((cross - want_cross).abs().max() < 1e-8 * want_cross.abs().max().max(1.0));
    Ok(())
}

fn params() -> impl Strategy<Value = UtParams> {
    (
        prop_oneof![Just(1.0), Just(0.5), 0.2f64..1.5],
        0.0f64..3.0,
        prop_oneof![Just(2.0), 0.0f64..3.0],
    )
        .prop_map(|(a, k, b)| UtParams::new(a, k, b).unwrap())
}

macro_rules! affine_props {
    ($($name:ident: $d:literal),*) => {
        proptest! {
            $(
            #[test]
            fn $name(
                mean in prop::collection::vec(-10.0f64..10.0, $d),
                factor in prop::collection::vec(-2.0f64..2.0, $d * $d),
                a in prop::collection::vec(-3.0f64..3.0, $d * $d),
                b in prop::collection::vec(-5.0f64..5.0, $d),
                p in params(),
            ) {
                affine_case::<$d>(mean, factor, a, b, p)?;
            }
            )*
        }
    };
}

affine_props!(affine_1: 1, affine_2: 2, affine_3: 3, affine_5: 5, affine_7: 7);

proptest! {
    #[test]
    fn mean_weights_sum_to_one(n in 1usize..=10, p in params()) {
        let (wm, wc) = ut_weights(n, &p).unwrap();
        prop_assert_eq!(wm.len(), 2 * n + 1);
        prop_assert!((wm.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Off-centre weights are shared by both vectors.
        prop_assert!(wm[1..] == wc[1..]);
    }

    #[test]
    fn sigma_points_symmetric(
        mean in prop::collection::vec(-5.0f64..5.0, 3),
        factor in prop::collection::vec(-1.0f64..1.0, 9),
    ) {
        let g = gaussian::<3>(mean, factor);
        let s = sigma_points(&g, &UtParams::default()).unwrap();
        for i in 1..=3 {
            let mid = 0.5 * (s.points[i] + s.points[i + 3]);
            prop_assert!((mid - g.mean).abs().max() < 1e-12);
        }
    }
}
