use modkk_core::matfun::{op_norm, CMat, HermMatrix};
use modkk_core::modular_lift::{
    cruxide_one_residual, cruxide_residual, cruxide_two_residual, modadjinv_residual, modular_lift,
    random_lift_context,
};
use modkk_core::random::{random_hermitian, rng};
use modkk_core::scalar::cre;
use modkk_core::transforms::{
    bounded_transform, conkay_residual, intrig_residual, prealg_decomposition,
    random_transform_context,
};
use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;

fn to_na(m: &CMat<f64>) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| {
        let z = m[(i, j)];
        Complex::new(z.re, z.im)
    })
}

/// `A^{-1/2}` for Hermitian positive definite `A` by the Denman-Beavers iteration.
fn inverse_sqrt(a: &DMatrix<Complex<f64>>) -> DMatrix<Complex<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<Complex<f64>>::identity(n, n);
    for _ in 0..100 {
        let y_inv = y.clone().try_inverse().unwrap();
        let z_inv = z.clone().try_inverse().unwrap();
        let z_next = (&z + y_inv).scale(0.5);
        y = (&y + z_inv).scale(0.5);
        let step = (&z_next - &z).norm();
        z = z_next;
        if step <= 1e-15 * z.norm() {
            break;
        }
    }
    z
}

fn na_norm(m: &DMatrix<Complex<f64>>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lift_identities_hold(seed in 0u64..10_000, dim in 4usize..=12) {
        let ctx = random_lift_context::<f64>(seed, dim, dim + 2, 1.0, 2.0).unwrap();
        let checks = [
            modular_lift(&ctx).1,
            modadjinv_residual(&ctx, cre(-1.0)).unwrap(),
            cruxide_residual(&ctx).unwrap(),
            cruxide_one_residual(&ctx).unwrap(),
            cruxide_two_residual(&ctx, 1.0).unwrap(),
        ];
        for r in checks {
            prop_assert!(r.relative() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn transform_identities_hold(seed in 0u64..10_000, dim in 4usize..=12, lambda in 0.0f64..50.0) {
        let ctx = random_transform_context::<f64>(seed, dim, 2.0, 1.0, 3.0).unwrap();
        let checks = [
            prealg_decomposition(&ctx, lambda).unwrap(),
            intrig_residual(&ctx, lambda, 1).unwrap(),
            intrig_residual(&ctx, lambda, 3).unwrap(),
            conkay_residual(&ctx, 20),
        ];
        for r in checks {
            prop_assert!(r.relative() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn bounded_transform_matches_independent_eigensolver(seed in 0u64..10_000, dim in 2usize..=10, radius in 0.1f64..20.0) {
        let d = random_hermitian::<f64>(&mut rng(seed), dim, radius);
        let f = bounded_transform(&d).unwrap();
        let dn = to_na(d.as_mat());
        let id = DMatrix::<Complex<f64>>::identity(dim, dim);
        let oracle = &dn * inverse_sqrt(&(&id + &dn * &dn));
        prop_assert!(na_norm(&(to_na(f.as_mat()) - &oracle)) < 1e-12);

        // F² - 1 = -(1 + D²)^{-1}, inverse by LU in the oracle.
        let inv = (&id + &dn * &dn).try_inverse().unwrap();
        let fn_ = to_na(f.as_mat());
        prop_assert!(na_norm(&(&fn_ * &fn_ - &id + inv)) < 1e-12);
        prop_assert!(op_norm(&(f.as_mat() - &f.adjoint())) < 1e-12);
    }

    #[test]
    fn bounded_transform_is_a_contraction(seed in 0u64..10_000, dim in 1usize..=8) {
        let d = random_hermitian::<f64>(&mut rng(seed), dim, 5.0);
        let f = bounded_transform(&d).unwrap();
        prop_assert!(op_norm(f.as_mat()) < 1.0);
    }
}

#[test]
fn bounded_transform_of_a_diagonal_is_entrywise() {
    let vals = [-3.0, 0.0, 0.5, 7.0];
    let f = bounded_transform(&HermMatrix::from_real_diag(&vals)).unwrap();
    for (i, &x) in vals.iter().enumerate() {
        assert!((f[(i, i)].re - x / (1.0f64 + x * x).sqrt()).abs() < 1e-15);
    }
}
