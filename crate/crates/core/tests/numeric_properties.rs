use nalgebra::{DMatrix, DVector};
use pline_core::numeric::{
    gauss_newton, null_vector, smallest_right_singular_vector, solve_least_squares, GaussNewtonOptions, MatrixMN,
};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, rows * cols)
}

fn well_conditioned(m: &DMatrix<f64>) -> bool {
    let sv = m.singular_values();
    sv.min() > 1e-3 * sv.max()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normal_equations_hold(
        (rows, cols, entries, b) in (2usize..9, 1usize..5).prop_flat_map(|(extra, cols)| {
            let rows = cols + extra;
            (Just(rows), Just(cols), matrix(rows, cols), prop::collection::vec(-10.0..10.0f64, rows))
        })
    ) {
        let a = MatrixMN::from_row_slice(rows, cols, &entries).unwrap();
        prop_assume!(well_conditioned(a.as_dmatrix()));
        let sol = solve_least_squares(&a, &b).unwrap();
        let am = a.as_dmatrix();
        let x = DVector::from_vec(sol.solution.clone());
        let r = am * &x - DVector::from_vec(b.clone());
        let grad = am.transpose() * &r;
        let scale = am.norm() * (am.norm() * x.norm() + DVector::from_vec(b).norm());
        prop_assert!(grad.norm() <= 1e-8 * scale.max(1.0));
        prop_assert!((sol.residual_norm - r.norm()).abs() <= 1e-9 * r.norm().max(1.0));
    }

    #[test]
    fn null_vector_is_unit_and_minimal(
        (rows, cols, entries) in (0usize..5, 2usize..7).prop_flat_map(|(extra, cols)| {
            let rows = cols - 1 + extra;
            (Just(rows), Just(cols), matrix(rows, cols))
        }),
        seed in any::<u64>(),
    ) {
        let a = MatrixMN::from_row_slice(rows, cols, &entries).unwrap();
        let v = smallest_right_singular_vector(&a).unwrap();
        let v = DVector::from_vec(v);
        prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        let av = (a.as_dmatrix() * &v).norm();

        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..100 {
            let u = DVector::from_fn(cols, |_, _| next());
            let u = u.normalize();
            prop_assert!(av <= (a.as_dmatrix() * &u).norm() + 1e-9);
        }
    }

    #[test]
    fn gauss_newton_matches_least_squares_on_linear_problems(
        entries in matrix(6, 3),
        b in prop::collection::vec(-5.0..5.0f64, 6),
    ) {
        let a = MatrixMN::from_row_slice(6, 3, &entries).unwrap();
        prop_assume!(well_conditioned(a.as_dmatrix()));
        let direct = solve_least_squares(&a, &b).unwrap();
        let residual = |x: &[f64]| {
            a.mul_vec(x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect::<Vec<_>>()
        };
        let report = gauss_newton(residual, |_| Ok(a.clone()), &[0.0; 3], GaussNewtonOptions::default()).unwrap();
        prop_assert!(report.converged);
        for (g, d) in report.x.iter().zip(&direct.solution) {
            prop_assert!((g - d).abs() <= 1e-8 * d.abs().max(1.0));
        }
    }
}

#[test]
fn planted_nullspace_is_recovered() {
    // A = B·P, with P projecting out v, has v as its exact null vector.
    let v = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 0.0, -1.5, 2.5, 1.0, -0.75]).normalize();
    let p = DMatrix::identity(9, 9) - &v * v.transpose();
    let b = DMatrix::from_fn(12, 9, |i, j| (((i * 9 + j) as f64 * 0.61803).sin() * 3.0).round() / 2.0 + 0.1 * j as f64);
    let a = MatrixMN::from_dmatrix(b * p).unwrap();
    let nv = null_vector(&a).unwrap();
    let got = DVector::from_vec(nv.vector);
    let err = (&got - &v).norm().min((&got + &v).norm());
    assert!(err < 1e-9, "{err:e}");
}
