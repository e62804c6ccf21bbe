//! Dense complex matrices, Hermitian spectral calculus and norms.

mod cmatrix;
mod eig;

pub use cmatrix::{chain, CMat, Lu};
pub use eig::{eig_herm, eigvals_herm, hermitian_tolerance, EigDecomp, HermMatrix};

use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// `U diag(f(λ)) U^*`.
pub fn matfunc<T: Real>(m: &HermMatrix<T>, f: impl Fn(T) -> T) -> Result<HermMatrix<T>> {
    eig_herm(m)?.apply(f)
}

/// `U diag(f(λ)) U^*` for complex-valued `f`.
pub fn matfunc_complex<T: Real>(m: &HermMatrix<T>, f: impl Fn(T) -> C<T>) -> Result<CMat<T>> {
    eig_herm(m)?.apply_complex(f)
}

/// Resolvent `(M - z)^{-1}` at a point off the spectrum.
pub fn resolvent<T: Real>(m: &HermMatrix<T>, z: C<T>) -> Result<CMat<T>> {
    matfunc_complex(m, |l| (C::new(l, T::zero()) - z).inv())
}

/// Largest singular value. Non-finite input yields NaN.
pub fn op_norm<T: Real>(m: &CMat<T>) -> T {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return T::zero();
    }
    if m.is_exactly_hermitian() {
        return match eigvals_herm(&HermMatrix::from_hermitian_part(m)) {
            Ok(v) => v.first().unwrap().abs().max(v.last().unwrap().abs()),
            Err(_) => T::nan(),
        };
    }
    let gram = if c <= r {
        m.adjoint_mul(m)
    } else {
        m.mul_adjoint(m)
    };
    match eigvals_herm(&HermMatrix::from_hermitian_part(&gram)) {
        Ok(v) => v.last().unwrap().max(T::zero()).sqrt(),
        Err(_) => T::nan(),
    }
}

/// Singular values in descending order.
pub fn singular_values<T: Real>(m: &CMat<T>) -> Result<Vec<T>> {
    let (r, c) = m.shape();
    let gram = if c <= r {
        m.adjoint_mul(m)
    } else {
        m.mul_adjoint(m)
    };
    let mut v: Vec<T> = eigvals_herm(&HermMatrix::from_hermitian_part(&gram))?
        .into_iter()
        .map(|x| x.max(T::zero()).sqrt())
        .collect();
    v.reverse();
    Ok(v)
}

/// Default eigenvalue floor `1e-12 ‖Δ‖`.
pub fn default_floor<T: Real>(delta_norm: T) -> T {
    T::lit(1e-12) * delta_norm
}

/// `Δ^p` for positive semidefinite `Δ`. For `p < 0` every eigenvalue must
/// clear `floor` (default `1e-12 ‖Δ‖`); offenders are returned in the error.
pub fn guarded_inv_power<T: Real>(
    delta: &HermMatrix<T>,
    p: T,
    floor: Option<T>,
) -> Result<HermMatrix<T>> {
    let e = eig_herm(delta)?;
    guarded_power_from(&e, p, floor)
}

/// As [`guarded_inv_power`] on a precomputed decomposition.
pub fn guarded_power_from<T: Real>(
    e: &EigDecomp<T>,
    p: T,
    floor: Option<T>,
) -> Result<HermMatrix<T>> {
    let floor = floor.unwrap_or_else(|| default_floor(e.max_abs_value()));
    if p < T::zero() {
        let bad: Vec<f64> = e
            .values
            .iter()
            .filter(|&&l| l < floor)
            .map(|l| l.as_f64())
            .collect();
        if !bad.is_empty() {
            return Err(Error::NearSingular {
                floor: floor.as_f64(),
                eigenvalues: bad,
            });
        }
    } else if let Some(&l) = e.values.iter().find(|&&l| l < -floor) {
        return Err(Error::DomainError {
            eigenvalue: l.as_f64(),
        });
    }
    e.apply(|l| {
        if p == T::zero() {
            T::one()
        } else {
            l.max(T::zero()).powf(p)
        }
    })
}

/// `Δ^p` restricted to eigenvalues at or above `floor`, zero on the rest.
pub fn range_power_from<T: Real>(e: &EigDecomp<T>, p: T, floor: T) -> HermMatrix<T> {
    e.apply(|l| if l >= floor { l.powf(p) } else { T::zero() })
        .expect("finite on the retained range")
}

/// Orthogonal projection onto eigenvectors with eigenvalue below `floor`.
pub fn kernel_projector_from<T: Real>(e: &EigDecomp<T>, floor: T) -> HermMatrix<T> {
    e.apply(|l| if l < floor { T::one() } else { T::zero() })
        .expect("indicator is finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{cre, cx};
    use num_traits::Zero;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn bounded_transform_of_signature() {
        let m = HermMatrix::from_real_diag(&[1.0, -1.0]);
        let f = matfunc(&m, |x: f64| x / (1.0 + x * x).sqrt()).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!(approx(f[(0, 0)].re, r, 1e-15));
        assert!(approx(f[(1, 1)].re, -r, 1e-15));
        assert!(f[(0, 1)].is_zero());
    }

    #[test]
    fn domain_error_reported() {
        let m = HermMatrix::from_real_diag(&[0.0, 2.0]);
        assert_eq!(
            matfunc(&m, |x: f64| 1.0 / x),
            Err(Error::DomainError { eigenvalue: 0.0 })
        );
    }

    #[test]
    fn norms_of_small_cases() {
        assert_eq!(op_norm(&CMat::<f64>::zeros(3, 3)), 0.0);
        assert!(approx(
            op_norm(&CMat::from_real_diag(&[2.0, -3.0])),
            3.0,
            1e-15
        ));
        let rect = CMat::<f64>::from_fn(2, 3, |i, j| {
            if i == 0 && j == 2 {
                cx(3.0, 4.0)
            } else {
                cre(0.0)
            }
        });
        assert!(approx(op_norm(&rect), 5.0, 1e-14));
    }

    #[test]
    fn inverse_square_roots() {
        let id = HermMatrix::<f64>::identity(3);
        let r = guarded_inv_power(&id, -0.5, None).unwrap();
        assert_eq!(r.as_mat(), id.as_mat());
        let four = HermMatrix::from_real_diag(&[4.0]);
        let h = guarded_inv_power(&four, -0.5, None).unwrap();
        assert!(approx(h[(0, 0)].re, 0.5, 1e-15));
    }

    #[test]
    fn near_singular_lists_offenders() {
        let m = HermMatrix::from_real_diag(&[1.0, 1e-15]);
        match guarded_inv_power(&m, -0.5, Some(1e-12)) {
            Err(Error::NearSingular { eigenvalues, .. }) => assert_eq!(eigenvalues, vec![1e-15]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singular_values_descending() {
        let m = CMat::<f64>::from_real_diag(&[1.0, -4.0, 2.0]);
        let s = singular_values(&m).unwrap();
        assert!(approx(s[0], 4.0, 1e-14) && approx(s[1], 2.0, 1e-14) && approx(s[2], 1.0, 1e-14));
    }
}
