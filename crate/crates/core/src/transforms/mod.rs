//! Bounded and modular transforms, the resolvent series behind the
//! comparison of the two, and decay sweeps of the associated error terms.
//!
//! Notation used throughout, for a Hermitian `D`, a positive `Δ` and
//! `r > ‖Δ‖²`:
//!
//! * `K = 1 - Δ²/r`, a positive contraction commuting with `Δ`;
//! * `R_λ = (λ + 1 + D²)^{-1}` and `S_λ = (λΔ²/r + 1 + D²)^{-1}`;
//! * `X_λ = λ R_λ K`, so that `S_λ = (1 - X_λ)^{-1} R_λ`;
//! * `I(T) = [D², T]`, `L_λ = I(λ S_λ K Δ³) R_λ` and
//!   `L_λ(m) = I((1 - X_λ^m) λ S_λ K Δ³) R_λ`.

mod appendix;
mod quadrature;
mod series;

pub use appendix::{
    appendix_sweep, fit_decay, fit_sweep, fit_window, log_grid, DecayFit, Estimate, FIT_LAMBDA_MIN,
    SLOPE_SLACK, TRUNCATION_ORDERS,
};
pub use quadrature::{
    half_line_map, integrate_half_line, integrate_half_line_scalar, Quadrature, QuadratureSpec,
};
pub use series::{
    conkay_residual, envelope_check, envelope_tail_slope, error_term_convergence, intrig_residual,
    weasqr_check, EnvelopeReport, TruncationRow, WeightedSqrtReport,
};

use serde::Serialize;
use statrs::function::beta::beta;

use crate::error::{Error, Result};
use crate::matfun::{default_floor, eig_herm, op_norm, CMat, EigDecomp, HermMatrix};
use crate::random::{random_hermitian, random_positive, rng};
use crate::report::IdentityResidual;
use crate::scalar::{ci, cre, Real, C};

/// Cached spectral data of a pair `(D, Δ)` and a parameter `r`.
#[derive(Clone, Debug)]
pub struct TransformContext<T: Real> {
    pub d: HermMatrix<T>,
    pub delta: HermMatrix<T>,
    pub r: T,
    d_eig: EigDecomp<T>,
    delta_eig: EigDecomp<T>,
    d2: CMat<T>,
    delta2: CMat<T>,
    delta3: CMat<T>,
    contraction: HermMatrix<T>,
    /// `[Δ², D²]`, `[D², K]` and `[D², Δ³]`.
    comm_delta2: CMat<T>,
    comm_contraction: CMat<T>,
    comm_delta3: CMat<T>,
    /// `U^* V` with `U`, `V` the eigenbases of `Δ` and `D`.
    overlap: CMat<T>,
}

impl<T: Real> TransformContext<T> {
    /// `r` defaults to `2‖Δ‖²` (or `1` for `Δ = 0`); an explicit `r` must
    /// exceed `‖Δ‖²`.
    pub fn new(d: HermMatrix<T>, delta: HermMatrix<T>, r: Option<T>) -> Result<Self> {
        if d.dim() != delta.dim() {
            return Err(Error::DimensionMismatch(format!(
                "D is {}, Delta is {}",
                d.dim(),
                delta.dim()
            )));
        }
        let d_eig = eig_herm(&d)?;
        let delta_eig = eig_herm(&delta)?;
        let top = delta_eig.max_abs_value();
        if let Some(&low) = delta_eig.values.first() {
            if low < -default_floor(top) {
                return Err(Error::DomainError {
                    eigenvalue: low.as_f64(),
                });
            }
        }
        let lower = top * top;
        let r = match r {
            Some(r) if r > lower => r,
            Some(r) => {
                return Err(Error::InvalidArgument(format!(
                    "r = {r} must exceed |Delta|^2 = {lower}"
                )))
            }
            None if lower > T::zero() => T::lit(2.0) * lower,
            None => T::one(),
        };
        let d2 = d.matmul(&d);
        let delta2 = delta.matmul(&delta);
        let delta3 = delta2.matmul(&delta);
        let contraction = delta_eig.apply(|l| T::one() - l * l / r)?;
        let overlap = delta_eig.vectors.adjoint_mul(&d_eig.vectors);
        let comm_delta2 = delta2.commutator(&d2);
        let comm_contraction = d2.commutator(&contraction);
        let comm_delta3 = d2.commutator(&delta3);
        Ok(Self {
            d,
            delta,
            r,
            d_eig,
            delta_eig,
            d2,
            delta2,
            delta3,
            contraction,
            comm_delta2,
            comm_contraction,
            comm_delta3,
            overlap,
        })
    }

    pub fn dim(&self) -> usize {
        self.d.dim()
    }

    pub fn d_squared(&self) -> &CMat<T> {
        &self.d2
    }

    pub fn delta_squared(&self) -> &CMat<T> {
        &self.delta2
    }

    pub fn delta_cubed(&self) -> &CMat<T> {
        &self.delta3
    }

    /// `K = 1 - Δ²/r`.
    pub fn contraction(&self) -> &HermMatrix<T> {
        &self.contraction
    }

    pub fn delta_eig(&self) -> &EigDecomp<T> {
        &self.delta_eig
    }

    pub fn d_eig(&self) -> &EigDecomp<T> {
        &self.d_eig
    }

    /// Smallest eigenvalue of `Δ`.
    pub fn delta_min(&self) -> T {
        self.delta_eig.values.first().copied().unwrap_or(T::zero())
    }

    /// `Δ^p` for `p ≥ 0`, clamping round-off negatives to zero.
    pub fn delta_power(&self, p: T) -> HermMatrix<T> {
        self.delta_eig
            .apply(|l| l.max(T::zero()).powf(p))
            .expect("finite power of a positive matrix")
    }

    /// `f(D)` through the cached eigendecomposition.
    pub fn d_function(&self, f: impl Fn(T) -> T) -> Result<HermMatrix<T>> {
        self.d_eig.apply(f)
    }

    /// `R_λ = (λ + 1 + D²)^{-1}`.
    pub fn resolvent_d2(&self, lambda: T) -> HermMatrix<T> {
        self.d_eig
            .apply(|x| T::one() / (lambda + T::one() + x * x))
            .expect("positive denominator")
    }

    /// `S_λ = (λΔ²/r + 1 + D²)^{-1}`.
    pub fn resolvent_mod(&self, lambda: T) -> Result<HermMatrix<T>> {
        let delta2 = self.delta2.scale_re(lambda / self.r);
        let m = &(&delta2 + &self.d2) + &CMat::identity(self.dim());
        eig_herm(&HermMatrix::from_hermitian_part(&m))?.apply(|l| T::one() / l)
    }

    /// `X_λ = λ R_λ K`.
    pub fn neumann_ratio(&self, lambda: T) -> CMat<T> {
        self.resolvent_d2(lambda)
            .matmul(&self.contraction)
            .scale_re(lambda)
    }

    /// `(i + D)^{-1}`.
    pub fn resolvent_i(&self) -> CMat<T> {
        self.d_eig
            .apply_complex(|x| (ci::<T>() + cre(x)).inv())
            .expect("non-real shift")
    }

    /// `I(T) = [D², T]`.
    pub fn d2_commutator(&self, t: &CMat<T>) -> CMat<T> {
        self.d2.commutator(t)
    }

    /// `Σ_n λⁿ Kⁿ A R_λ^{n+1}` in closed form: in the eigenbases `K = U k U^*`,
    /// `R_λ = V ρ V^*` the `(i, j)` entry of `U^* (·) V` is
    /// `(U^* A V)_{ij} ρ_j / (1 - λ k_i ρ_j)`.
    pub fn left_ordered_sum(&self, lambda: T, a: &CMat<T>) -> CMat<T> {
        let u = &self.delta_eig.vectors;
        let v = &self.d_eig.vectors;
        let inner = u.adjoint_mul(a).matmul(v);
        self.left_ordered_from_inner(lambda, inner)
    }

    /// [`Self::left_ordered_sum`] with `A = 1`.
    pub fn left_ordered_identity(&self, lambda: T) -> CMat<T> {
        self.left_ordered_from_inner(lambda, self.overlap.clone())
    }

    fn left_ordered_from_inner(&self, lambda: T, mut inner: CMat<T>) -> CMat<T> {
        let n = self.dim();
        let k: Vec<T> = self
            .delta_eig
            .values
            .iter()
            .map(|&l| T::one() - l * l / self.r)
            .collect();
        let rho: Vec<T> = self
            .d_eig
            .values
            .iter()
            .map(|&x| T::one() / (lambda + T::one() + x * x))
            .collect();
        for i in 0..n {
            for j in 0..n {
                inner[(i, j)] = inner[(i, j)] * cre(rho[j] / (T::one() - lambda * k[i] * rho[j]));
            }
        }
        self.delta_eig
            .vectors
            .matmul(&inner)
            .mul_adjoint(&self.d_eig.vectors)
    }

    /// `I(R_λ Δ³) = R_λ [D², Δ³]`.
    pub fn resolvent_delta3_commutator(&self, lambda: T) -> CMat<T> {
        self.resolvent_d2(lambda).matmul(&self.comm_delta3)
    }

    /// `L_λ` for `m = None`, `L_λ(m)` otherwise.
    ///
    /// Commutators with `D²` are expanded through
    /// `[D², S_λ] = (λ/r) S_λ [Δ², D²] S_λ` and `[D², X_λ] = λ R_λ [D², K]`,
    /// so every term vanishes exactly when `Δ` commutes with `D` entrywise.
    pub fn error_term(&self, lambda: T, m: Option<usize>) -> Result<CMat<T>> {
        let s = self.resolvent_mod(lambda)?.into_mat();
        let r = self.resolvent_d2(lambda).into_mat();
        let b = self.contraction.matmul(&self.delta3).scale_re(lambda);
        let comm_s = s
            .matmul(&self.comm_delta2)
            .matmul(&s)
            .scale_re(lambda / self.r);
        let comm_sb = &comm_s.matmul(&b) + &s.matmul(&self.d2.commutator(&b));
        let inner = match m {
            None => comm_sb,
            Some(m) => {
                let x = r.matmul(&self.contraction).scale_re(lambda);
                let comm_x = r.matmul(&self.comm_contraction).scale_re(lambda);
                let mut powers = vec![CMat::identity(self.dim())];
                for j in 0..m {
                    let next = powers[j].matmul(&x);
                    powers.push(next);
                }
                let mut comm_xm = CMat::zeros(self.dim(), self.dim());
                for j in 0..m {
                    comm_xm = &comm_xm + &powers[j].matmul(&comm_x).matmul(&powers[m - 1 - j]);
                }
                let sb = s.matmul(&b);
                &comm_sb - &(&comm_xm.matmul(&sb) + &powers[m].matmul(&comm_sb))
            }
        };
        Ok(inner.matmul(&r))
    }
}

/// `L_λ` or `L_λ(m)`; see [`TransformContext::error_term`].
pub fn error_term_l<T: Real>(
    ctx: &TransformContext<T>,
    lambda: T,
    m: Option<usize>,
) -> Result<CMat<T>> {
    ctx.error_term(lambda, m)
}

/// `F_D = D (1 + D²)^{-1/2}`.
pub fn bounded_transform<T: Real>(d: &HermMatrix<T>) -> Result<HermMatrix<T>> {
    eig_herm(d)?.apply(|x| x / (T::one() + x * x).sqrt())
}

/// `(1/π) ∫₀^∞ λ^{-1/2} R_λ D dλ`, the integral form of `F_D`.
pub fn bounded_transform_integral<T: Real>(
    d: &HermMatrix<T>,
    quad: &QuadratureSpec,
) -> Result<CMat<T>> {
    let e = eig_herm(d)?;
    let n = d.dim();
    let q = integrate_half_line(
        |l: T| {
            let w = T::one() / (T::PI() * l.sqrt());
            Ok(e.apply(|x| w * x / (l + T::one() + x * x))?.into_mat())
        },
        (n, n),
        quad,
    )?;
    Ok(q.value)
}

/// `G = (1/π) ∫₀^∞ (λr)^{-1/2} Δ S_λ D dλ`, the modular transform as a
/// matrix acting on `Δ(X)`. Requires `Δ` invertible above the default floor.
pub fn modular_transform<T: Real>(
    ctx: &TransformContext<T>,
    quad: &QuadratureSpec,
) -> Result<CMat<T>> {
    require_invertible(ctx)?;
    let n = ctx.dim();
    let q = integrate_half_line(
        |l: T| {
            let w = T::one() / (T::PI() * (l * ctx.r).sqrt());
            let s = ctx.resolvent_mod(l)?;
            Ok(ctx.delta.matmul(&s).matmul(&ctx.d).scale_re(w))
        },
        (n, n),
        quad,
    )?;
    Ok(q.value)
}

fn require_invertible<T: Real>(ctx: &TransformContext<T>) -> Result<()> {
    let low = ctx.delta_min();
    let floor = default_floor(ctx.delta_eig.max_abs_value());
    if !(low > floor) {
        return Err(Error::DeltaSingular {
            min_eigenvalue: low.as_f64(),
        });
    }
    Ok(())
}

/// `B(p, q) (1 + Λ²)^{-q}` against `∫₀^∞ λ^{p-1} (1 + λ + Λ²)^{-p-q} dλ`.
pub fn beta_resolvent_check<T: Real>(
    lambda_op: &HermMatrix<T>,
    p: T,
    q: T,
    quad: &QuadratureSpec,
) -> Result<IdentityResidual> {
    if !(p > T::zero() && q > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "beta exponents must be positive, got p = {p}, q = {q}"
        )));
    }
    let e = eig_herm(lambda_op)?;
    let n = lambda_op.dim();
    let b = T::lit(beta(p.as_f64(), q.as_f64()));
    let lhs = e.apply(|x| b * (T::one() + x * x).powf(-q))?.into_mat();
    let rhs = integrate_half_line(
        |l: T| {
            Ok(
                e.apply(|x| l.powf(p - T::one()) * (T::one() + l + x * x).powf(-p - q))?
                    .into_mat(),
            )
        },
        (n, n),
        quad,
    )?
    .value;
    Ok(IdentityResidual::from_mats(
        "beta_resolvent",
        &lhs,
        &rhs,
        None,
    ))
}

/// Closed form and truncation checks of `S_λ = Σ X_λⁿ R_λ`.
#[derive(Clone, Debug, Serialize)]
pub struct SeriesExpansion {
    /// `S_λ` against `(1 - X_λ)^{-1} R_λ`.
    pub closed_form: IdentityResidual,
    /// `S_λ` against `Σ_{n ≤ N} X_λⁿ R_λ`.
    pub partial_sum: IdentityResidual,
    /// `‖S_λ‖ q^{N+1} / (1 - q)` with `q = λ/(1+λ)`.
    pub tail_bound: f64,
    pub within_bound: bool,
}

pub fn series_expansion_check<T: Real>(
    ctx: &TransformContext<T>,
    lambda: T,
    n_terms: usize,
) -> Result<SeriesExpansion> {
    let n = ctx.dim();
    let s = ctx.resolvent_mod(lambda)?.into_mat();
    let r = ctx.resolvent_d2(lambda).into_mat();
    let x = ctx.neumann_ratio(lambda);
    let one_minus = &CMat::identity(n) - &x;
    let closed = one_minus.solve(&r)?;
    let mut term = r.clone();
    let mut partial = r.clone();
    for _ in 0..n_terms {
        term = x.matmul(&term);
        partial = &partial + &term;
    }
    let q = lambda / (T::one() + lambda);
    let tail_bound = (op_norm(&s) * q.powi(n_terms as i32 + 1) / (T::one() - q)).as_f64();
    let partial_sum = IdentityResidual::from_mats("series_partial", &s, &partial, Some(lambda));
    let slack = 1e-12 * partial_sum.lhs_norm.max(1.0);
    Ok(SeriesExpansion {
        closed_form: IdentityResidual::from_mats("series_closed", &s, &closed, Some(lambda)),
        within_bound: partial_sum.residual <= tail_bound + slack,
        partial_sum,
        tail_bound,
    })
}

/// `S_λΔ³ = Δ³ Σ λⁿKⁿR_λ^{n+1} - Σ λⁿKⁿ L_λ R_λ^{n+1} - (1 - X_λ)^{-1} I(R_λΔ³) R_λ`.
pub fn prealg_decomposition<T: Real>(
    ctx: &TransformContext<T>,
    lambda: T,
) -> Result<IdentityResidual> {
    let n = ctx.dim();
    let s = ctx.resolvent_mod(lambda)?;
    let r = ctx.resolvent_d2(lambda);
    let lhs = s.matmul(&ctx.delta3);
    let first = ctx.delta3.matmul(&ctx.left_ordered_identity(lambda));
    let second = ctx.left_ordered_sum(lambda, &ctx.error_term(lambda, None)?);
    let one_minus = &CMat::identity(n) - &ctx.neumann_ratio(lambda);
    let third = one_minus.solve(&ctx.resolvent_delta3_commutator(lambda).matmul(&r))?;
    let rhs = &(&first - &second) - &third;
    Ok(IdentityResidual::from_mats(
        "prealg_decomposition",
        &lhs,
        &rhs,
        Some(lambda),
    ))
}

/// `(1/π) ∫₀^∞ (λr)^{-1/2} Δ⁶ Σ λⁿKⁿR_λ^{n+1} dλ` against `Δ⁵ (1 + D²)^{-1/2}`.
pub fn sqrt_integral_check<T: Real>(
    ctx: &TransformContext<T>,
    quad: &QuadratureSpec,
) -> Result<IdentityResidual> {
    let n = ctx.dim();
    let delta6 = ctx.delta3.matmul(&ctx.delta3);
    let integral = integrate_half_line(
        |l: T| {
            let w = T::one() / (T::PI() * (l * ctx.r).sqrt());
            Ok(delta6.matmul(&ctx.left_ordered_identity(l)).scale_re(w))
        },
        (n, n),
        quad,
    )?
    .value;
    let expected = ctx.delta_power(T::lit(5.0)).matmul(
        ctx.d_function(|x| (T::one() + x * x).sqrt().recip())?
            .as_mat(),
    );
    Ok(IdentityResidual::from_mats(
        "sqrt_integral",
        &integral,
        &expected,
        None,
    ))
}

/// Largest admissible exponent in [`comparison_residual`].
pub const MAX_COMPARISON_EXPONENT: f64 = 0.49;

/// `‖Δ⁵F_D(1+D²)^p - (1/π)∫₀^∞ (λr)^{-1/2} Δ³(1-X_λ)^{-1}Δ³R_λ dλ · D(1+D²)^p‖`.
pub fn comparison_residual<T: Real>(
    ctx: &TransformContext<T>,
    p: T,
    quad: &QuadratureSpec,
) -> Result<T> {
    if !(p >= T::zero() && p <= T::lit(MAX_COMPARISON_EXPONENT)) {
        return Err(Error::InvalidArgument(format!(
            "exponent p = {p} outside [0, {MAX_COMPARISON_EXPONENT}]"
        )));
    }
    require_invertible(ctx)?;
    let n = ctx.dim();
    let integral = integrate_half_line(
        |l: T| {
            let w = T::one() / (T::PI() * (l * ctx.r).sqrt());
            let one_minus = &CMat::identity(n) - &ctx.neumann_ratio(l);
            let rhs = ctx.delta3.matmul(&ctx.resolvent_d2(l));
            Ok(ctx.delta3.matmul(&one_minus.solve(&rhs)?).scale_re(w))
        },
        (n, n),
        quad,
    )?
    .value;
    let weight = ctx.d_function(|x| (T::one() + x * x).powf(p))?;
    let left = ctx
        .delta_power(T::lit(5.0))
        .matmul(bounded_transform(&ctx.d)?.as_mat())
        .matmul(&weight);
    let right = integral.matmul(&ctx.d).matmul(&weight);
    Ok(op_norm(&(&left - &right)))
}

/// Seeded pair with `‖D‖ = radius` and `spec(Δ) ⊂ [hi/cond, hi]`.
pub fn random_transform_context<T: Real>(
    seed: u64,
    dim: usize,
    radius: T,
    hi: T,
    cond: T,
) -> Result<TransformContext<T>> {
    let mut g = rng(seed);
    let d = random_hermitian(&mut g, dim, radius);
    let delta = random_positive(&mut g, dim, hi, cond);
    TransformContext::new(d, delta, None)
}

/// Fourier truncation of the circle to the modes `-n/2, …, n/2 - 1`:
/// `D = diag(2πk)`, `Δ` the Toeplitz compression of
/// `x ↦ 3/4 + cos(2πx)/4` and, as algebra generators, the compressions of
/// multiplication by `e^{2πix}` and `cos(2πx)`.
#[derive(Clone, Debug)]
pub struct CircleTruncation<T: Real> {
    pub d: HermMatrix<T>,
    pub delta: HermMatrix<T>,
    pub generators: Vec<CMat<T>>,
}

pub fn circle_truncation<T: Real>(n: usize) -> Result<CircleTruncation<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "circle truncation needs n >= 2, got {n}"
        )));
    }
    let half = (n / 2) as f64;
    let modes: Vec<T> = (0..n)
        .map(|k| T::lit(2.0 * std::f64::consts::PI * (k as f64 - half)))
        .collect();
    let d = HermMatrix::from_real_diag(&modes);
    let band = |diag: f64, off: f64| {
        CMat::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => cre(T::lit(diag)),
            1 => cre(T::lit(off)),
            _ => C::new(T::zero(), T::zero()),
        })
    };
    let delta = HermMatrix::new(band(0.75, 0.125))?;
    let shift = CMat::from_fn(n, n, |i, j| {
        if i == j + 1 {
            cre(T::one())
        } else {
            cre(T::zero())
        }
    });
    let cosine = band(0.0, 0.5);
    Ok(CircleTruncation {
        d,
        delta,
        generators: vec![shift, cosine],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matfun::CMat;

    fn quad() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn bounded_transform_examples() {
        let z = bounded_transform(&HermMatrix::<f64>::zeros(3)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let f = bounded_transform(&HermMatrix::from_real_diag(&[1.0, -1.0])).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((f[(0, 0)].re - s).abs() < 1e-15 && (f[(1, 1)].re + s).abs() < 1e-15);
    }

    #[test]
    fn bounded_transform_integral_matches() {
        let mut g = rng(5);
        let d = random_hermitian::<f64>(&mut g, 5, 3.0);
        let exact = bounded_transform(&d).unwrap();
        let integral = bounded_transform_integral(&d, &quad()).unwrap();
        assert!(op_norm(&(&integral - exact.as_mat())) < 1e-8);
        assert!(op_norm(exact.as_mat()) < 1.0);
    }

    #[test]
    fn modular_transform_scalar_cases() {
        let d = HermMatrix::from_real_diag(&[1.0]);
        let ctx = TransformContext::new(d.clone(), HermMatrix::identity(1), Some(2.0)).unwrap();
        let g = modular_transform(&ctx, &quad()).unwrap();
        assert!((g[(0, 0)].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        let ctx = TransformContext::new(d, HermMatrix::from_real_diag(&[2.0]), Some(5.0)).unwrap();
        let g = modular_transform(&ctx, &quad()).unwrap();
        assert!((g[(0, 0)].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
    }

    #[test]
    fn modular_transform_rejects_singular_delta() {
        let ctx = TransformContext::new(
            HermMatrix::from_real_diag(&[1.0, 2.0]),
            HermMatrix::from_real_diag(&[0.0, 1.0]),
            None,
        )
        .unwrap();
        assert!(matches!(
            modular_transform(&ctx, &quad()),
            Err(Error::DeltaSingular { .. })
        ));
    }

    #[test]
    fn explicit_r_must_dominate() {
        let r = TransformContext::new(
            HermMatrix::<f64>::identity(2),
            HermMatrix::from_real_diag(&[1.0, 2.0]),
            Some(4.0),
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn contraction_bound_on_neumann_ratio() {
        let ctx = random_transform_context::<f64>(3, 6, 2.0, 1.0, 5.0).unwrap();
        for &l in &[0.0, 0.3, 4.0, 100.0, 1e4] {
            assert!(op_norm(&ctx.neumann_ratio(l)) <= l / (1.0 + l) + 1e-10);
        }
    }

    #[test]
    fn left_ordered_sum_matches_series() {
        let ctx = random_transform_context::<f64>(8, 5, 1.5, 1.0, 3.0).unwrap();
        let l = 2.5;
        let a = crate::random::gaussian_matrix::<f64>(&mut rng(1), 5, 5);
        let k = ctx.contraction().as_mat().clone();
        let r = ctx.resolvent_d2(l).into_mat();
        let mut left = CMat::identity(5);
        let mut right = r.clone();
        let mut sum = CMat::zeros(5, 5);
        for _ in 0..400 {
            sum = &sum + &left.matmul(&a).matmul(&right);
            left = left.matmul(&k).scale_re(l);
            right = right.matmul(&r);
        }
        assert!(op_norm(&(&sum - &ctx.left_ordered_sum(l, &a))) < 1e-12 * op_norm(&sum));
    }

    #[test]
    fn series_edge_cases() {
        let ctx = random_transform_context::<f64>(1, 4, 1.0, 1.0, 2.0).unwrap();
        let zero = series_expansion_check(&ctx, 0.0, 0).unwrap();
        assert!(zero.partial_sum.residual < 1e-14 && zero.closed_form.residual < 1e-14);
        let five = series_expansion_check(&ctx, 5.0, 60).unwrap();
        assert!(five.closed_form.relative() < 1e-10 && five.within_bound);
        let flat = TransformContext::new(
            HermMatrix::from_real_diag(&[0.5, -1.0]),
            HermMatrix::identity(2),
            Some(1.0 + 1e-12),
        )
        .unwrap();
        let edge = series_expansion_check(&flat, 3.0, 0).unwrap();
        assert!(edge.partial_sum.relative() < 1e-10);
    }

    #[test]
    fn prealg_commuting_and_seeded() {
        let d = HermMatrix::from_real_diag(&[0.5, -1.0, 2.0]);
        let delta = HermMatrix::from_real_diag(&[1.0, 0.3, 0.7]);
        let ctx = TransformContext::new(d, delta, None).unwrap();
        assert_eq!(ctx.error_term(3.0, None).unwrap().max_abs(), 0.0);
        assert!(prealg_decomposition(&ctx, 3.0).unwrap().relative() < 1e-12);
        let ctx = random_transform_context::<f64>(11, 6, 2.0, 1.0, 4.0).unwrap();
        for &l in &[0.5, 8.0, 200.0] {
            let res = prealg_decomposition(&ctx, l).unwrap();
            assert!(res.relative() < 1e-9, "{res:?}");
        }
    }

    #[test]
    fn sqrt_integral_cases() {
        let ctx = TransformContext::new(HermMatrix::<f64>::zeros(2), HermMatrix::identity(2), None)
            .unwrap();
        let res = sqrt_integral_check(&ctx, &quad()).unwrap();
        assert!(res.residual < 1e-7 && (res.rhs_norm - 1.0).abs() < 1e-15);
        let ctx = random_transform_context::<f64>(2, 5, 2.0, 1.0, 3.0).unwrap();
        let res = sqrt_integral_check(&ctx, &quad()).unwrap();
        assert!(res.relative() < 1e-7, "{res:?}");
    }

    #[test]
    fn beta_identity() {
        let res = beta_resolvent_check(&HermMatrix::<f64>::zeros(1), 0.5, 0.5, &quad()).unwrap();
        assert!((res.rhs_norm - std::f64::consts::PI).abs() < 1e-8);
        assert!((res.lhs_norm - std::f64::consts::PI).abs() < 1e-12);
        let res =
            beta_resolvent_check(&HermMatrix::from_real_diag(&[1.0]), 0.5, 0.5, &quad()).unwrap();
        assert!(
            (res.lhs_norm - std::f64::consts::PI / 2f64.sqrt()).abs() < 1e-12
                && res.residual < 1e-8
        );
        let lam = random_hermitian::<f64>(&mut rng(4), 4, 2.0);
        assert!(
            beta_resolvent_check(&lam, 1.5, 0.5, &quad())
                .unwrap()
                .relative()
                < 1e-8
        );
        assert!(beta_resolvent_check(&lam, 0.0, 0.5, &quad()).is_err());
    }

    #[test]
    fn comparison_vanishes_when_commuting() {
        let d = HermMatrix::from_real_diag(&[0.5, -1.0, 2.0]);
        let delta = HermMatrix::from_real_diag(&[1.0, 0.3, 0.7]);
        let ctx = TransformContext::new(d, delta, None).unwrap();
        assert!(comparison_residual(&ctx, 0.0, &quad()).unwrap() < 1e-7);
        assert!(comparison_residual(&ctx, 0.5, &quad()).is_err());
    }

    #[test]
    fn circle_truncation_shapes() {
        let c = circle_truncation::<f64>(8).unwrap();
        assert_eq!(c.d.dim(), 8);
        assert_eq!(c.generators.len(), 2);
        let e = eig_herm(&c.delta).unwrap();
        assert!(e.values[0] > 0.49 && e.values[7] < 1.0);
    }
}
