//! Lifting a cycle on `Y` through `Φ : X → Y` with dense-image adjoint:
//! `Δ = Φ^* Γ Φ`, `D_Δ = Φ^* D Φ`, `G = Φ Φ^*`, and the operator identities
//! relating their twisted commutators.

use crate::error::{Error, Result};
use crate::matfun::{eig_herm, op_norm, resolvent, singular_values, CMat, EigDecomp, HermMatrix};
use crate::modular_cycle::{twisted_commutator, DeltaCalculus};
use crate::random::{gaussian_matrix, random_hermitian, random_positive, rng};
use crate::report::{ConditionResult, CycleReport, IdentityResidual};
use crate::scalar::{ci, Real};

/// Singular values of `Φ` below this fraction of the largest count as a
/// rank defect of `Φ^*`.
pub const DENSE_IMAGE_TOL: f64 = 1e-10;

/// Rank diagnostic for `Φ^*`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseImageReport {
    pub min_singular: f64,
    pub max_singular: f64,
    /// Set when `Φ^*` is not of full row rank numerically.
    pub warning: bool,
}

#[derive(Clone, Debug)]
pub struct LiftContext<T: Real> {
    /// `Φ : X → Y` as a `dim Y × dim X` matrix.
    pub phi: CMat<T>,
    pub d: HermMatrix<T>,
    pub gamma: HermMatrix<T>,
    pub delta: HermMatrix<T>,
    pub g: HermMatrix<T>,
    pub d_delta: HermMatrix<T>,
    pub d_gamma_g: CMat<T>,
    pub rho_gamma_g: CMat<T>,
    pub d_gamma: CMat<T>,
    pub r: T,
    pub dense_image: DenseImageReport,
    gamma_calc: DeltaCalculus<T>,
}

impl<T: Real> LiftContext<T> {
    /// `r` defaults to `2 (‖Δ‖² + ‖Γ‖²)`; an explicit `r` must exceed
    /// `‖Δ‖² + ‖Γ‖²`.
    pub fn new(phi: CMat<T>, d: HermMatrix<T>, gamma: HermMatrix<T>, r: Option<T>) -> Result<Self> {
        let ny = d.dim();
        if gamma.dim() != ny || phi.rows() != ny {
            return Err(Error::DimensionMismatch(format!(
                "Phi {:?}, D {}, Gamma {}",
                phi.shape(),
                ny,
                gamma.dim()
            )));
        }
        let delta = gamma.congruence(&phi);
        let g = HermMatrix::from_hermitian_part(&phi.mul_adjoint(&phi));
        let d_delta = d.congruence(&phi);
        let d_gamma_g = twisted_commutator(&d, &gamma, &g);
        let gamma_calc = DeltaCalculus::new(&d, &gamma, None)?;
        let (rho_gamma_g, _) = gamma_calc.normalize(&d_gamma_g)?;
        let d_gamma = d.commutator(&gamma);
        let lower = op_norm(&delta).powi(2) + op_norm(&gamma).powi(2);
        let r = match r {
            Some(r) if r > lower => r,
            Some(r) => {
                return Err(Error::InvalidArgument(format!(
                    "r = {r} must exceed {lower}"
                )))
            }
            None => T::lit(2.0) * lower.max(T::min_positive_value()),
        };
        let sv = singular_values(&phi)?;
        let max_s = sv.first().copied().unwrap_or(T::zero());
        let min_s = if phi.cols() <= phi.rows() {
            sv.last().copied().unwrap_or(T::zero())
        } else {
            T::zero()
        };
        let dense_image = DenseImageReport {
            min_singular: min_s.as_f64(),
            max_singular: max_s.as_f64(),
            warning: !(min_s > T::lit(DENSE_IMAGE_TOL) * max_s),
        };
        Ok(Self {
            phi,
            d,
            gamma,
            delta,
            g,
            d_delta,
            d_gamma_g,
            rho_gamma_g,
            d_gamma,
            r,
            dense_image,
            gamma_calc,
        })
    }

    pub fn dim_x(&self) -> usize {
        self.phi.cols()
    }

    pub fn dim_y(&self) -> usize {
        self.phi.rows()
    }

    /// `d_Γ(Γ G) = D Γ G Γ - Γ Γ G D`.
    pub fn d_gamma_gamma_g(&self) -> CMat<T> {
        twisted_commutator(&self.d, &self.gamma, &self.gamma.matmul(&self.g))
    }

    /// `Γ^{1/2}` on the range of `Γ`.
    pub fn gamma_sqrt(&self) -> HermMatrix<T> {
        self.gamma_calc.sqrt()
    }

    /// `T_λ = (1 + λ Γ² / r + D²)^{-1}` on `Y`.
    pub fn t_lambda(&self, lambda: T) -> Result<HermMatrix<T>> {
        let m = self.gamma.matmul(&self.gamma).scale_re(lambda / self.r);
        let m = &(&m + &self.d.matmul(&self.d)) + &CMat::identity(self.dim_y());
        inverse_positive(&HermMatrix::from_hermitian_part(&m))
    }

    /// `S_λ = (1 + λ Δ² / r + D_Δ²)^{-1}` on `X`.
    pub fn s_lambda(&self, lambda: T) -> Result<HermMatrix<T>> {
        let m = self.delta.matmul(&self.delta).scale_re(lambda / self.r);
        let m = &(&m + &self.d_delta.matmul(&self.d_delta)) + &CMat::identity(self.dim_x());
        inverse_positive(&HermMatrix::from_hermitian_part(&m))
    }
}

fn inverse_positive<T: Real>(m: &HermMatrix<T>) -> Result<HermMatrix<T>> {
    eig_herm(m)?.apply(|l| T::one() / l)
}

fn power_from<T: Real>(e: &EigDecomp<T>, p: T) -> HermMatrix<T> {
    e.apply(|l| l.max(T::zero()).powf(p)).expect("finite power")
}

/// Differentiability diagnostics for `G = Φ Φ^*` relative to `(D, Γ)`.
pub fn check_assumption_diff<T: Real>(ctx: &LiftContext<T>) -> CycleReport {
    let mut rep = CycleReport::default();
    let dn = op_norm(&ctx.d_gamma_g);
    rep.push(ConditionResult::new(
        "d_gamma_g_bounded",
        dn.is_finite(),
        dn.as_f64(),
    ));
    let h = ctx.gamma_sqrt();
    let back = h.matmul(&ctx.rho_gamma_g).matmul(&h);
    let res = IdentityResidual::from_mats("rho_reconstruction", &back, &ctx.d_gamma_g, None);
    rep.push(ConditionResult::new(
        "rho_reconstruction",
        res.passes(1e-9),
        res.relative(),
    ));
    let rn = op_norm(&ctx.rho_gamma_g);
    rep.push(ConditionResult::new(
        "rho_bounded",
        rn.is_finite(),
        rn.as_f64(),
    ));
    let dg = op_norm(&ctx.d_gamma);
    rep.push(ConditionResult::new(
        "d_gamma_bounded",
        dg.is_finite(),
        dg.as_f64(),
    ));
    rep.push(
        ConditionResult::new(
            "dense_image",
            !ctx.dense_image.warning,
            ctx.dense_image.min_singular,
        )
        .with_values(vec![
            ctx.dense_image.min_singular,
            ctx.dense_image.max_singular,
        ]),
    );
    rep
}

/// `D_Δ = Φ^* D Φ` with the residual of `D_Δ Δ - Δ D_Δ = Φ^* d_Γ(G) Φ`.
pub fn modular_lift<T: Real>(ctx: &LiftContext<T>) -> (HermMatrix<T>, IdentityResidual) {
    let lhs = ctx.d_delta.commutator(&ctx.delta);
    let rhs = ctx.phi.adjoint().matmul(&ctx.d_gamma_g).matmul(&ctx.phi);
    (
        ctx.d_delta.clone(),
        IdentityResidual::from_mats("modadj", &lhs, &rhs, None),
    )
}

/// `D_Δ (Δ - z)^{-1} = (Δ - z)^{-1} D_Δ - (Δ - z)^{-1} Φ^* d_Γ(G) Φ (Δ - z)^{-1}`.
pub fn modadjinv_residual<T: Real>(
    ctx: &LiftContext<T>,
    z: crate::scalar::C<T>,
) -> Result<IdentityResidual> {
    let res = resolvent(&ctx.delta, z)?;
    let lhs = ctx.d_delta.matmul(&res);
    let middle = ctx.phi.adjoint().matmul(&ctx.d_gamma_g).matmul(&ctx.phi);
    let rhs = &res.matmul(&ctx.d_delta) - &res.matmul(&middle).matmul(&res);
    Ok(IdentityResidual::from_mats("modadjinv", &lhs, &rhs, None))
}

/// One row of the strong-limit estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct StrongLimitRow {
    pub n: usize,
    /// `‖(1/n)(Δ + 1/n)^{-1} Φ^* d_Γ(G) Φ (Δ + 1/n)^{-1} Δ‖`.
    pub norm: f64,
    /// `n^{-1/2} ‖Γ^{1/2} Φ‖ ‖ρ_Γ(G)‖`.
    pub bound: f64,
    /// Same operator without the trailing `Δ`.
    pub uniform_norm: f64,
    /// `‖ρ_Γ(G)‖`.
    pub uniform_bound: f64,
    pub passed: bool,
}

pub fn strlimzer_sweep<T: Real>(
    ctx: &LiftContext<T>,
    n_list: &[usize],
) -> Result<Vec<StrongLimitRow>> {
    let e = eig_herm(&ctx.delta)?;
    let middle = ctx.phi.adjoint().matmul(&ctx.d_gamma_g).matmul(&ctx.phi);
    let half_phi = op_norm(&ctx.gamma_sqrt().matmul(&ctx.phi));
    let rho = op_norm(&ctx.rho_gamma_g);
    let slack = T::one() + T::lit(1e-9);
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let s = T::one() / T::from_count(n);
        let inv = e.apply(|l| T::one() / (l.max(T::zero()) + s))?;
        let core = inv.matmul(&middle).matmul(&inv).scale_re(s);
        let norm = op_norm(&core.matmul(&ctx.delta));
        let uniform = op_norm(&core);
        let bound = half_phi * rho / T::from_count(n).sqrt();
        rows.push(StrongLimitRow {
            n,
            norm: norm.as_f64(),
            bound: bound.as_f64(),
            uniform_norm: uniform.as_f64(),
            uniform_bound: rho.as_f64(),
            passed: norm <= bound * slack && uniform <= rho * slack,
        });
    }
    Ok(rows)
}

/// `Δ²(i + D_Δ)^{-1} = Φ^* Γ (i + D)^{-1}((i(G - 1)Γ + d_Γ(G)) Φ (i + D_Δ)^{-1} + Γ Φ)`.
pub fn cruxide_residual<T: Real>(ctx: &LiftContext<T>) -> Result<IdentityResidual> {
    let i = ci::<T>();
    let res_x = resolvent(&ctx.d_delta, -i)?;
    let res_y = resolvent(&ctx.d, -i)?;
    let lhs = ctx.delta.matmul(&ctx.delta).matmul(&res_x);
    let g_minus = &ctx.g.as_mat().clone() - &CMat::identity(ctx.dim_y());
    let inner = &g_minus.matmul(&ctx.gamma).scale(i) + &ctx.d_gamma_g;
    let bracket = &inner.matmul(&ctx.phi).matmul(&res_x) + &ctx.gamma.matmul(&ctx.phi);
    let rhs = ctx
        .phi
        .adjoint()
        .matmul(&ctx.gamma)
        .matmul(&res_y)
        .matmul(&bracket);
    Ok(IdentityResidual::from_mats("cruxide", &lhs, &rhs, None))
}

/// `D²(1+D²)^{-1} Φ Δ² - (1+D²)^{-1} Γ² Φ D_Δ²` against its three-term
/// expansion.
pub fn cruxide_one_residual<T: Real>(ctx: &LiftContext<T>) -> Result<IdentityResidual> {
    let ed = eig_herm(&ctx.d)?;
    let inv = ed.apply(|x| T::one() / (T::one() + x * x))?;
    let d_inv = ed.apply(|x| x / (T::one() + x * x))?;
    let d2_inv = ed.apply(|x| x * x / (T::one() + x * x))?;
    let delta2 = ctx.delta.matmul(&ctx.delta);
    let gamma2 = ctx.gamma.matmul(&ctx.gamma);
    let dd2 = ctx.d_delta.matmul(&ctx.d_delta);
    let lhs = &d2_inv.matmul(&ctx.phi).matmul(&delta2)
        - &inv.matmul(&gamma2).matmul(&ctx.phi).matmul(&dd2);
    let gg = ctx.g.as_mat();
    let t1 = d_inv
        .matmul(&ctx.d_gamma_g)
        .matmul(gg)
        .matmul(&ctx.gamma)
        .matmul(&ctx.phi);
    let t2 = d_inv
        .matmul(&ctx.gamma)
        .matmul(gg)
        .matmul(&ctx.d_gamma_g)
        .matmul(&ctx.phi);
    let t3 = inv
        .matmul(&ctx.d_gamma_gamma_g())
        .matmul(&ctx.phi)
        .matmul(&ctx.d_delta);
    let rhs = &(&t1 + &t2) + &t3;
    Ok(IdentityResidual::from_mats("cruxideI", &lhs, &rhs, None))
}

/// `Φ Δ² S_λ - T_λ Γ² Φ` against
/// `T_λ(Φ Δ² - Γ² Φ + d_Γ(Γ G) Φ D_Δ) S_λ + (D T_λ)^*(d_Γ(G) G Γ Φ + Γ G d_Γ(G) Φ) S_λ`.
pub fn cruxide_two_residual<T: Real>(ctx: &LiftContext<T>, lambda: T) -> Result<IdentityResidual> {
    let s = ctx.s_lambda(lambda)?;
    let t = ctx.t_lambda(lambda)?;
    let delta2 = ctx.delta.matmul(&ctx.delta);
    let gamma2 = ctx.gamma.matmul(&ctx.gamma);
    let phi_d2 = ctx.phi.matmul(&delta2);
    let lhs = &phi_d2.matmul(&s) - &t.matmul(&gamma2).matmul(&ctx.phi);
    let gg = ctx.g.as_mat();
    let first = &(&phi_d2 - &gamma2.matmul(&ctx.phi))
        + &ctx.d_gamma_gamma_g().matmul(&ctx.phi).matmul(&ctx.d_delta);
    let second = &ctx.d_gamma_g.matmul(gg).matmul(&ctx.gamma).matmul(&ctx.phi)
        + &ctx.gamma.matmul(gg).matmul(&ctx.d_gamma_g).matmul(&ctx.phi);
    let dt_adj = ctx.d.matmul(&t).adjoint();
    let rhs = &t.matmul(&first).matmul(&s) + &dt_adj.matmul(&second).matmul(&s);
    Ok(IdentityResidual::from_mats(
        "cruxideII",
        &lhs,
        &rhs,
        Some(lambda),
    ))
}

/// Singular values of `Δ (i + D_Δ)^{-1}` together with the factorization
/// residual of `Δ²(i + D_Δ)^{-1}`.
#[derive(Clone, Debug)]
pub struct CompactnessReport {
    pub singular_values: Vec<f64>,
    pub factorization: IdentityResidual,
}

pub fn compacres_bound<T: Real>(ctx: &LiftContext<T>) -> Result<CompactnessReport> {
    let res_x = resolvent(&ctx.d_delta, -ci::<T>())?;
    let sv = singular_values(&ctx.delta.matmul(&res_x))?;
    Ok(CompactnessReport {
        singular_values: sv.iter().map(|s| s.as_f64()).collect(),
        factorization: cruxide_residual(ctx)?,
    })
}

/// `‖S_λ^{1/2} D_Δ‖`, bounded by one.
pub fn eleome_norm<T: Real>(ctx: &LiftContext<T>, lambda: T) -> Result<T> {
    let s = ctx.s_lambda(lambda)?;
    let half = power_from(&eig_herm(&s)?, T::lit(0.5));
    Ok(op_norm(&half.matmul(&ctx.d_delta)))
}

/// Lift context with `‖Φ‖ = 1`, Hermitian `D` of norm `radius` and `Γ`
/// with spectrum in `[radius / cond, radius]`.
pub fn random_lift_context<T: Real>(
    seed: u64,
    dim_x: usize,
    dim_y: usize,
    radius: T,
    cond: T,
) -> Result<LiftContext<T>> {
    let mut r = rng(seed);
    let phi = gaussian_matrix::<T>(&mut r, dim_y, dim_x);
    let phi = phi.scale_re(T::one() / op_norm(&phi));
    let d = random_hermitian(&mut r, dim_y, radius);
    let gamma = random_positive(&mut r, dim_y, radius, cond);
    LiftContext::new(phi, d, gamma, None)
}
