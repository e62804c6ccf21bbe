//! Twisted commutators `d_Δ(T) = D T Δ - Δ T D` and their normalized form
//! `ρ_Δ(T) = Δ^{-1/2} d_Δ(T) Δ^{-1/2}`.

use crate::error::{Error, Result};
use crate::matfun::{
    default_floor, eig_herm, kernel_projector_from, op_norm, range_power_from, CMat, EigDecomp,
    HermMatrix,
};
use crate::scalar::Real;

/// Relative size of the part of `d_Δ(T)` allowed outside the range of `Δ`
/// when `Δ` has eigenvalues below the floor.
const RANGE_LEAK_TOL: f64 = 1e-10;

/// What the eigenvalue floor did while forming `ρ_Δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FloorReport {
    pub floor: f64,
    /// Eigenvalues of `Δ` below the floor, treated as kernel.
    pub discarded: Vec<f64>,
    /// `max(‖P d‖, ‖d P‖)` for the kernel projection `P`.
    pub leakage: f64,
}

#[derive(Clone, Debug)]
pub struct TwistedDerivative<T: Real> {
    pub d_delta: CMat<T>,
    pub rho_delta: CMat<T>,
    pub floor_report: FloorReport,
}

/// Cached spectral data of `Δ` for repeated twisted commutators.
#[derive(Clone, Debug)]
pub struct DeltaCalculus<T: Real> {
    pub d: HermMatrix<T>,
    pub delta: HermMatrix<T>,
    pub eig: EigDecomp<T>,
    pub floor: T,
    inv_sqrt: HermMatrix<T>,
    kernel: Option<HermMatrix<T>>,
    discarded: Vec<f64>,
}

impl<T: Real> DeltaCalculus<T> {
    pub fn new(d: &HermMatrix<T>, delta: &HermMatrix<T>, floor: Option<T>) -> Result<Self> {
        if d.dim() != delta.dim() {
            return Err(Error::DimensionMismatch(format!(
                "D is {}, Delta is {}",
                d.dim(),
                delta.dim()
            )));
        }
        let eig = eig_herm(delta)?;
        let floor = floor.unwrap_or_else(|| default_floor(eig.max_abs_value()));
        let discarded: Vec<f64> = eig
            .values
            .iter()
            .filter(|&&l| l < floor)
            .map(|l| l.as_f64())
            .collect();
        let inv_sqrt = range_power_from(&eig, T::lit(-0.5), floor);
        let kernel = if discarded.is_empty() {
            None
        } else {
            Some(kernel_projector_from(&eig, floor))
        };
        Ok(Self {
            d: d.clone(),
            delta: delta.clone(),
            eig,
            floor,
            inv_sqrt,
            kernel,
            discarded,
        })
    }

    /// `d_Δ(T)`.
    pub fn d_delta(&self, t: &CMat<T>) -> CMat<T> {
        twisted_commutator(&self.d, &self.delta, t)
    }

    /// `ρ_Δ(T)` from a precomputed `d_Δ(T)`.
    pub fn normalize(&self, dd: &CMat<T>) -> Result<(CMat<T>, FloorReport)> {
        let mut leakage = T::zero();
        if let Some(p) = &self.kernel {
            leakage = op_norm(&p.matmul(dd)).max(op_norm(&dd.matmul(p)));
            let scale = op_norm(dd);
            if leakage > T::lit(RANGE_LEAK_TOL) * scale {
                return Err(Error::NearSingular {
                    floor: self.floor.as_f64(),
                    eigenvalues: self.discarded.clone(),
                });
            }
        }
        let rho = self.inv_sqrt.matmul(dd).matmul(&self.inv_sqrt);
        let report = FloorReport {
            floor: self.floor.as_f64(),
            discarded: self.discarded.clone(),
            leakage: leakage.as_f64(),
        };
        Ok((rho, report))
    }

    pub fn twisted(&self, t: &CMat<T>) -> Result<TwistedDerivative<T>> {
        let d_delta = self.d_delta(t);
        let (rho_delta, floor_report) = self.normalize(&d_delta)?;
        Ok(TwistedDerivative {
            d_delta,
            rho_delta,
            floor_report,
        })
    }

    /// `Δ^{1/2}` on the retained range.
    pub fn sqrt(&self) -> HermMatrix<T> {
        range_power_from(&self.eig, T::lit(0.5), T::neg_infinity())
    }

    /// `V_n = Δ (Δ + 1/n)^{-1}`.
    pub fn approximate_unit(&self, n: usize) -> HermMatrix<T> {
        let s = T::one() / T::from_count(n);
        self.eig
            .apply(|l| {
                let l = l.max(T::zero());
                l / (l + s)
            })
            .expect("finite")
    }
}

/// `D T Δ - Δ T D`.
pub fn twisted_commutator<T: Real>(d: &CMat<T>, delta: &CMat<T>, t: &CMat<T>) -> CMat<T> {
    &d.matmul(t).matmul(delta) - &delta.matmul(t).matmul(d)
}

/// `d_Δ(T)` and `ρ_Δ(T)`; fails with `NearSingular` when `d_Δ(T)` is not
/// numerically supported on the range of `Δ`.
pub fn twisted_derivative<T: Real>(
    d: &HermMatrix<T>,
    delta: &HermMatrix<T>,
    t: &CMat<T>,
    floor: Option<T>,
) -> Result<TwistedDerivative<T>> {
    DeltaCalculus::new(d, delta, floor)?.twisted(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, random_hermitian, random_positive, rng};

    #[test]
    fn trivial_twist_is_commutator() {
        let mut r = rng(1);
        let d = random_hermitian::<f64>(&mut r, 5, 2.0);
        let t = gaussian_matrix::<f64>(&mut r, 5, 5);
        let tw = twisted_derivative(&d, &HermMatrix::identity(5), &t, None).unwrap();
        assert!((&tw.d_delta - &d.commutator(&t)).norm_fro() < 1e-13);
        assert!((&tw.rho_delta - &d.commutator(&t)).norm_fro() < 1e-13);
    }

    #[test]
    fn normalized_form_reconstructs() {
        let mut r = rng(2);
        let d = random_hermitian::<f64>(&mut r, 6, 1.5);
        let delta = random_positive::<f64>(&mut r, 6, 2.0, 20.0);
        let t = gaussian_matrix::<f64>(&mut r, 6, 6);
        let calc = DeltaCalculus::new(&d, &delta, None).unwrap();
        let tw = calc.twisted(&t).unwrap();
        let h = calc.sqrt();
        let back = h.matmul(&tw.rho_delta).matmul(&h);
        assert!((&back - &tw.d_delta).norm_fro() < 1e-9 * (1.0 + tw.d_delta.norm_fro()));
    }

    #[test]
    fn anti_symmetry() {
        let mut r = rng(3);
        let d = random_hermitian::<f64>(&mut r, 4, 1.0);
        let delta = random_positive::<f64>(&mut r, 4, 1.0, 5.0);
        let t = gaussian_matrix::<f64>(&mut r, 4, 4);
        let lhs = twisted_commutator(&d, &delta, &t).adjoint();
        let rhs = -twisted_commutator(&d, &delta, &t.adjoint());
        assert!((&lhs - &rhs).norm_fro() < 1e-13);
    }

    #[test]
    fn leakage_into_kernel_is_rejected() {
        let d = HermMatrix::new(CMat::<f64>::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        let delta = HermMatrix::from_real_diag(&[1.0, 0.0]);
        let t = CMat::identity(2);
        assert!(matches!(
            twisted_derivative(&d, &delta, &t, None),
            Err(Error::NearSingular { .. })
        ));
    }

    #[test]
    fn range_supported_twist_with_kernel() {
        let d = HermMatrix::from_real_diag(&[2.0, 5.0]);
        let delta = HermMatrix::from_real_diag(&[4.0, 0.0]);
        let t = CMat::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let tw = twisted_derivative(&d, &delta, &t, None).unwrap();
        assert_eq!(tw.floor_report.discarded, vec![0.0]);
        assert!(tw.rho_delta.norm_fro() < 1e-15);
    }
}
