mod common;

use common::{oracle_basis, oracle_knots};
use kanvision::bspline::{SplineBasis, UnivariateFunction};
use kanvision::{Error, Rng, Tensor64};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn knots_match_direct_formula() {
    for (g, k) in [(1, 0), (3, 3), (5, 2), (8, 1)] {
        let basis = SplineBasis::<f64>::new(g, k, (-1.0, 1.0)).unwrap();
        let oracle = oracle_knots(g, k, -1.0, 1.0);
        assert_eq!(basis.knots().len(), g + 2 * k + 1);
        for (a, b) in basis.knots().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn cubic_matches_recursive_oracle() {
    let basis = SplineBasis::<f64>::new(5, 3, (-1.0, 1.0)).unwrap();
    for x in [-1.0, -0.37, 0.0, 0.81, 1.0] {
        let got = basis.basis_eval(x).unwrap();
        let want = oracle_basis(5, 3, -1.0, 1.0, x);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "x={x}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn oracle_agreement_across_grid_and_degree() {
    let mut rng = Rng::new(3);
    for g in 1..=8 {
        for k in 0..=3 {
            let basis = SplineBasis::<f64>::new(g, k, (-1.0, 1.0)).unwrap();
            for _ in 0..50 {
                let x = rng.uniform_range(-1.2, 1.2);
                let got = basis.basis_eval(x).unwrap();
                let want = oracle_basis(g, k, -1.0, 1.0, x);
                for (a, b) in got.iter().zip(&want) {
                    assert!((a - b).abs() < 1e-12, "G={g} k={k} x={x}");
                }
            }
        }
    }
}

#[test]
fn degree_zero_is_one_hot() {
    let basis = SplineBasis::<f64>::new(4, 0, (0.0, 1.0)).unwrap();
    assert_eq!(basis.basis_eval(0.3).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
}

#[test]
fn linear_hat_midpoint_and_slopes() {
    let basis = SplineBasis::<f64>::new(4, 1, (-1.0, 1.0)).unwrap();
    let h = 0.5;
    let v = basis.basis_eval(-0.25).unwrap();
    let nonzero: Vec<f64> = v.iter().copied().filter(|&b| b > 0.0).collect();
    assert_eq!(nonzero, vec![0.5, 0.5]);
    let d = basis.basis_derivative(-0.25).unwrap();
    let mut slopes: Vec<f64> = d.iter().copied().filter(|s| *s != 0.0).collect();
    slopes.sort_by(f64::total_cmp);
    assert_eq!(slopes, vec![-1.0 / h, 1.0 / h]);
}

#[test]
fn cubic_derivative_matches_finite_differences() {
    let basis = SplineBasis::<f64>::new(5, 3, (-1.0, 1.0)).unwrap();
    for x in [-0.93, -0.61, -0.25, 0.07, 0.33, 0.58, 0.9] {
        let d = basis.basis_derivative(x).unwrap();
        let up = basis.basis_eval(x + 1e-6).unwrap();
        let down = basis.basis_eval(x - 1e-6).unwrap();
        for j in 0..d.len() {
            let fd = (up[j] - down[j]) / 2e-6;
            let err = (d[j] - fd).abs() / d[j].abs().max(fd.abs()).max(1e-7);
            assert!(err < 1e-5, "x={x} j={j}: {} vs {fd}", d[j]);
        }
    }
}

#[test]
fn derivative_requires_positive_degree() {
    let basis = SplineBasis::<f64>::new(3, 0, (-1.0, 1.0)).unwrap();
    assert!(matches!(basis.basis_derivative(0.1), Err(Error::UnsupportedDegree(0))));
}

#[test]
fn non_finite_input_rejected() {
    let basis = SplineBasis::<f64>::new(3, 3, (-1.0, 1.0)).unwrap();
    assert!(basis.basis_eval(f64::NAN).is_err());
    assert!(basis.basis_eval(f64::INFINITY).is_err());
}

#[test]
fn batch_matches_elementwise_loop() {
    let basis = SplineBasis::<f64>::new(4, 2, (-1.0, 1.0)).unwrap();
    let mut rng = Rng::new(8);
    let x = Tensor64::new(vec![2, 3], common::random_vec(&mut rng, 6, -1.0, 1.0)).unwrap();
    let batch = basis.basis_eval_batch(&x).unwrap();
    assert_eq!(batch.shape(), [2, 3, 6]);
    for (e, &xv) in x.data().iter().enumerate() {
        let single = basis.basis_eval(xv).unwrap();
        for q in 0..6 {
            assert!((batch.data()[e * 6 + q] - single[q]).abs() < 1e-14);
        }
        let s: f64 = batch.data()[e * 6..(e + 1) * 6].iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn constant_and_zero_functions() {
    let basis = SplineBasis::<f64>::new(6, 3, (-1.0, 1.0)).unwrap();
    let ones = UnivariateFunction::new(basis.clone(), vec![1.0; 9]).unwrap();
    let zeros = UnivariateFunction::new(basis.clone(), vec![0.0; 9]).unwrap();
    for i in 0..=20 {
        let x = -1.0 + 0.1 * i as f64;
        assert!((ones.apply(x).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(zeros.apply(x).unwrap(), 0.0);
    }
    assert!(UnivariateFunction::new(basis, vec![1.0; 8]).is_err());
}

#[test]
fn least_squares_sine_fit() {
    let (g, k) = (8, 3);
    let basis = SplineBasis::<f64>::new(g, k, (-1.0, 1.0)).unwrap();
    let nb = g + k;
    let samples = 400;
    let xs: Vec<f64> = (0..samples).map(|i| -1.0 + 2.0 * i as f64 / (samples - 1) as f64).collect();
    let design = DMatrix::from_fn(samples, nb, |r, c| oracle_basis(g, k, -1.0, 1.0, xs[r])[c]);
    let target = DVector::from_iterator(samples, xs.iter().map(|x| x.sin()));
    let coeffs = design
        .svd(true, true)
        .solve(&target, 1e-12)
        .expect("least-squares solve");
    let f = UnivariateFunction::new(basis, coeffs.iter().copied().collect()).unwrap();
    let worst = (0..100)
        .map(|i| -1.0 + 2.0 * i as f64 / 99.0)
        .map(|x| (f.apply(x).unwrap() - x.sin()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "max error {worst}");
}

#[test]
fn identity_spline_reproduces_input() {
    let basis = SplineBasis::<f64>::new(5, 3, (-1.0, 1.0)).unwrap();
    let f = UnivariateFunction::identity(basis).unwrap();
    for i in 0..=40 {
        let x = -1.0 + 0.05 * i as f64;
        assert!((f.apply(x).unwrap() - x).abs() < 1e-12);
    }
}

fn grid_degree() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=8, 1usize..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn partition_of_unity((g, k) in grid_degree(), x in -1.0f64..=1.0) {
        let basis = SplineBasis::<f64>::new(g, k, (-1.0, 1.0)).unwrap();
        let s: f64 = basis.basis_eval(x).unwrap().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_negative_with_local_support((g, k) in grid_degree(), x in -1.0f64..=1.0) {
        let basis = SplineBasis::<f64>::new(g, k, (-1.0, 1.0)).unwrap();
        let v = basis.basis_eval(x).unwrap();
        prop_assert!(v.iter().all(|&b| b >= -1e-15));
        prop_assert!(v.iter().filter(|&&b| b > 1e-15).count() <= k + 1);
    }

    #[test]
    fn derivative_sums_to_zero((g, k) in grid_degree(), x in -1.0f64..=1.0) {
        let basis = SplineBasis::<f64>::new(g, k, (-1.0, 1.0)).unwrap();
        let s: f64 = basis.basis_derivative(x).unwrap().iter().sum();
        prop_assert!(s.abs() < 1e-9);
    }

    #[test]
    fn derivative_matches_fd_away_from_knots((g, k) in grid_degree(), x in -0.999f64..0.999) {
        let h = 2.0 / g as f64;
        let offset = ((x + 1.0) / h).fract() * h;
        prop_assume!(offset > 1e-4 && h - offset > 1e-4);
        let basis = SplineBasis::<f64>::new(g, k, (-1.0, 1.0)).unwrap();
        let d = basis.basis_derivative(x).unwrap();
        let up = basis.basis_eval(x + 1e-6).unwrap();
        let down = basis.basis_eval(x - 1e-6).unwrap();
        for j in 0..d.len() {
            let fd = (up[j] - down[j]) / 2e-6;
            let err = (d[j] - fd).abs() / d[j].abs().max(fd.abs()).max(1e-7);
            prop_assert!(err < 1e-5, "G={} k={} x={} j={}: {} vs {}", g, k, x, j, d[j], fd);
        }
    }

    #[test]
    fn clamps_outside_range((g, k) in grid_degree(), beyond in 0.0f64..5.0) {
        let basis = SplineBasis::<f64>::new(g, k, (-1.0, 1.0)).unwrap();
        prop_assert_eq!(basis.basis_eval(1.0 + beyond).unwrap(), basis.basis_eval(1.0).unwrap());
        prop_assert_eq!(basis.basis_eval(-1.0 - beyond).unwrap(), basis.basis_eval(-1.0).unwrap());
    }
}
