//! Unbounded Kasparov product of a differentiable module with a modular
//! cycle, and the comparison with the bounded Kasparov product.
//!
//! Given `X` over `B = M_k` with generators `ξ_1, …, ξ_N`, a left action of
//! `A = M_p` and a cycle `(Y, D, Γ)` over `B`, the product lives on
//! `X ⊗_B Y` with
//!
//! * `Φ = Σ_n δ_n ⊗ T_{ξ_n}^* : X ⊗_B Y → ℓ²_N(Y)`,
//! * `Δ = Φ^* (1 ⊗ Γ) Φ = Σ_n T_{ξ_n} Γ T_{ξ_n}^*`,
//! * `D_Δ = Φ^* (1 ⊗ D) Φ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert_module::{interior_tensor, HilbertModule, Representation, TensorModule};
use crate::matfun::{eig_herm, op_norm, range_power_from, singular_values, CMat, HermMatrix};
use crate::modular_cycle::{
    check_cycle, random_cycle_over, stabilize, twisted_commutator, CheckOptions, CycleAlgebra,
    ModularCycle,
};
use crate::modular_lift::{modular_lift, LiftContext, DENSE_IMAGE_TOL};
use crate::random::{gaussian_matrix, random_hermitian, random_positive, rng};
use crate::report::{ConditionResult, CycleReport, IdentityResidual};
use crate::scalar::Real;
use crate::transforms::{bounded_transform, fit_sweep, DecayFit};

/// Predicted decay exponent of the F-connection error `K_λ`.
pub const CONNECTION_EXPONENT: f64 = -0.75;

/// Finite generating family of `X = M_{p,k}` with a left action of `M_a`.
#[derive(Clone, Debug)]
pub struct DifferentiableModule<T: Real> {
    pub x: HilbertModule,
    pub pi_a: Representation<T>,
    pub xis: Vec<CMat<T>>,
    /// Declared bound on the Gram tail beyond `N/2`.
    pub tail_eps: f64,
}

impl<T: Real> DifferentiableModule<T> {
    pub fn new(
        x: HilbertModule,
        pi_a: Representation<T>,
        xis: Vec<CMat<T>>,
        tail_eps: f64,
    ) -> Result<Self> {
        if pi_a.target_dim() != x.rows {
            return Err(Error::DimensionMismatch(format!(
                "left action on {} rows, module has {}",
                pi_a.target_dim(),
                x.rows
            )));
        }
        if xis.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one generator is required".into(),
            ));
        }
        for xi in &xis {
            x.check_element(xi)?;
        }
        Ok(Self {
            x,
            pi_a,
            xis,
            tail_eps,
        })
    }

    pub fn len(&self) -> usize {
        self.xis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xis.is_empty()
    }

    /// `τ(a)`: the `Nk × Nk` block matrix `(⟨ξ_n, π_A(a) ξ_m⟩)_{nm}`.
    pub fn tau(&self, a: &CMat<T>) -> CMat<T> {
        let k = self.x.k();
        let n = self.len();
        let pa = self.pi_a.apply(a);
        let mut out = CMat::zeros(n * k, n * k);
        for (i, xi) in self.xis.iter().enumerate() {
            for (j, xj) in self.xis.iter().enumerate() {
                out.set_block(i * k, j * k, &self.x.inner(xi, &pa.matmul(xj)));
            }
        }
        out
    }

    /// `‖τ(a)^* - τ(a^*)‖`.
    pub fn tau_adjoint_residual(&self, a: &CMat<T>) -> T {
        op_norm(&(&self.tau(a).adjoint() - &self.tau(&a.adjoint())))
    }

    /// Norm of the Gram blocks `⟨ξ_n, ξ_m⟩` with `n, m ≥ N/2`.
    pub fn tail_norm(&self) -> T {
        let k = self.x.k();
        let start = self.len() / 2;
        let g = self.tau(&CMat::identity(self.pi_a.k()));
        let size = (self.len() - start) * k;
        op_norm(&g.submatrix(start * k, start * k, size, size))
    }

    /// `Σ_n ξ_n ξ_n^*`, the frame operator on the rows of `X`.
    pub fn frame_operator(&self) -> HermMatrix<T> {
        let p = self.x.rows;
        let sum = self
            .xis
            .iter()
            .fold(CMat::zeros(p, p), |acc, xi| &acc + &xi.mul_adjoint(xi));
        HermMatrix::from_hermitian_part(&sum)
    }

    /// Rescales the generators by `Θ^{-1/2}` so that `Σ ξ_n ξ_n^* = 1`.
    pub fn parseval(&self) -> Result<Self> {
        let e = eig_herm(&self.frame_operator())?;
        let floor = T::lit(DENSE_IMAGE_TOL) * e.max_abs_value();
        if e.values.first().is_none_or(|&l| l <= floor) {
            return Err(Error::GeneratorDeficient {
                rank: e.values.iter().filter(|&&l| l > floor).count(),
                dim: e.dim(),
            });
        }
        let w = e.apply(|l| l.sqrt().recip())?;
        let xis = self.xis.iter().map(|xi| w.matmul(xi)).collect();
        Self::new(self.x, self.pi_a.clone(), xis, self.tail_eps)
    }

    /// Generators multiplied by a common scalar.
    pub fn scaled(&self, s: T) -> Result<Self> {
        let xis = self.xis.iter().map(|xi| xi.scale_re(s)).collect();
        Self::new(self.x, self.pi_a.clone(), xis, self.tail_eps)
    }
}

/// Seeded module `M_{p,k}` with `M_p` acting on the left and `n_gen`
/// Gaussian generators, optionally normalized to a Parseval frame.
pub fn random_differentiable_module<T: Real>(
    seed: u64,
    p: usize,
    k: usize,
    n_gen: usize,
    parseval: bool,
) -> Result<DifferentiableModule<T>> {
    let mut g = rng(seed);
    let xis = (0..n_gen).map(|_| gaussian_matrix(&mut g, p, k)).collect();
    let dm = DifferentiableModule::new(
        HilbertModule::new(p, k),
        Representation::identity(p),
        xis,
        1.0,
    )?;
    if parseval {
        dm.parseval()
    } else {
        Ok(dm)
    }
}

/// Seeded pair: a Parseval module over `M_2` with `n_gen` generators and a
/// cycle on `ℂ^{2m}` with `‖D‖ = 1` and `spec Γ ⊂ [1/2, 1]`.
pub fn random_product_instance<T: Real>(
    seed: u64,
    p: usize,
    m: usize,
    n_gen: usize,
) -> Result<(DifferentiableModule<T>, ModularCycle<T>)> {
    let dm = random_differentiable_module(seed, p, 2, n_gen, true)?;
    let cycle = random_cycle_over(seed.wrapping_add(1_000), 2, m, T::one(), T::lit(2.0))?;
    Ok((dm, cycle))
}

/// `X = B = ℂ` with the single generator `1`, and a cycle on `ℂ^m` where
/// `ℂ` acts by scalars. The product reproduces the cycle exactly.
pub fn trivial_product_instance<T: Real>(
    seed: u64,
    m: usize,
    spectral_radius: T,
    delta_condition_number: T,
) -> Result<(DifferentiableModule<T>, ModularCycle<T>)> {
    let dm = DifferentiableModule::new(
        HilbertModule::hilbert_space(1),
        Representation::identity(1),
        vec![CMat::identity(1)],
        1.0,
    )?;
    let mut r = rng(seed);
    let d = random_hermitian(&mut r, m, spectral_radius);
    let delta = random_positive(&mut r, m, spectral_radius, delta_condition_number);
    let pi = Representation::new(1, vec![CMat::identity(m)])?;
    let cycle = ModularCycle::new(
        HilbertModule::hilbert_space(m),
        d,
        delta,
        CycleAlgebra::Rep(pi),
        None,
    )?;
    Ok((dm, cycle))
}

/// `Φ` and its diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct PhiReport {
    /// `‖Φ_N - Φ_{N/2}‖²` from the Gram blocks of the tail generators.
    pub tail_norm_sq: f64,
    /// Same quantity from the assembled matrices.
    pub tail_norm_sq_direct: f64,
    /// `‖Φ‖²` and `‖Φ Φ^*‖`.
    pub norm_sq: f64,
    pub gram_norm: f64,
    pub min_singular: f64,
    pub rank: usize,
    pub dim: usize,
}

/// `Φ = [T_{ξ_1}^*; …; T_{ξ_N}^*]` from the first `n` creation operators.
/// Fails with `GeneratorDeficient` when `Φ` is not injective, i.e. `Φ^*`
/// is not onto.
pub fn build_phi<T: Real>(creations: &[CMat<T>], n: usize) -> Result<(CMat<T>, PhiReport)> {
    if n == 0 || n > creations.len() {
        return Err(Error::InvalidArgument(format!(
            "asked for {n} of {} generators",
            creations.len()
        )));
    }
    let blocks: Vec<CMat<T>> = creations[..n].iter().map(|t| t.adjoint()).collect();
    let phi = CMat::vstack(&blocks);
    let (q, dim) = blocks[0].shape();
    let half = n / 2;
    let tail: Vec<CMat<T>> = blocks[half..].to_vec();
    let tail_gram = CMat::vstack(&tail).mul_adjoint(&CMat::vstack(&tail));
    let mut direct = phi.clone();
    for i in 0..half * q {
        for j in 0..dim {
            direct[(i, j)] = crate::scalar::cre(T::zero());
        }
    }
    let sv = singular_values(&phi)?;
    let top = sv.first().copied().unwrap_or(T::zero());
    let cut = T::lit(DENSE_IMAGE_TOL) * top;
    let rank = sv.iter().filter(|&&s| s > cut).count();
    let min_singular = if phi.rows() >= dim {
        sv.last().copied().unwrap_or(T::zero())
    } else {
        T::zero()
    };
    let report = PhiReport {
        tail_norm_sq: op_norm(&tail_gram).as_f64(),
        tail_norm_sq_direct: op_norm(&direct).powi(2).as_f64(),
        norm_sq: top.powi(2).as_f64(),
        gram_norm: op_norm(&phi.mul_adjoint(&phi)).as_f64(),
        min_singular: min_singular.as_f64(),
        rank,
        dim,
    };
    if rank < dim {
        return Err(Error::GeneratorDeficient { rank, dim });
    }
    Ok((phi, report))
}

/// `Δ = Σ T Γ T^*` and `D_Δ = Σ T D T^*` summed over creation operators
/// (`Γ = 1` when absent).
pub fn assemble_from_creations<T: Real>(
    creations: &[CMat<T>],
    d: &CMat<T>,
    gamma: Option<&CMat<T>>,
) -> Result<(HermMatrix<T>, HermMatrix<T>)> {
    let first = creations
        .first()
        .ok_or_else(|| Error::InvalidArgument("no creation operators".into()))?;
    let (dim, q) = first.shape();
    if d.shape() != (q, q) || gamma.is_some_and(|g| g.shape() != (q, q)) {
        return Err(Error::DimensionMismatch(format!(
            "operators on {q} expected"
        )));
    }
    let mut delta = CMat::zeros(dim, dim);
    let mut d_delta = CMat::zeros(dim, dim);
    for t in creations {
        let inner = match gamma {
            Some(g) => t.matmul(g),
            None => t.clone(),
        };
        delta = &delta + &inner.mul_adjoint(t);
        d_delta = &d_delta + &t.matmul(d).mul_adjoint(t);
    }
    Ok((
        HermMatrix::from_hermitian_part(&delta),
        HermMatrix::from_hermitian_part(&d_delta),
    ))
}

/// Options for [`kasparov_product`].
#[derive(Clone, Debug)]
pub struct ProductOptions<T: Real> {
    pub check: CheckOptions<T>,
    pub n_approx: usize,
}

impl<T: Real> Default for ProductOptions<T> {
    fn default() -> Self {
        Self {
            check: CheckOptions::default(),
            n_approx: 50,
        }
    }
}

/// The product cycle with everything needed to audit it.
#[derive(Clone, Debug)]
pub struct ProductCycle<T: Real> {
    pub tensor: TensorModule<T>,
    pub creations: Vec<CMat<T>>,
    pub phi: CMat<T>,
    pub phi_report: PhiReport,
    /// `(X ⊗_B Y, D_Δ, Δ)` with `A` acting by `π_A(a) ⊗ 1`.
    pub cycle: ModularCycle<T>,
    /// `(1 ⊗ D, 1 ⊗ Γ)` on `ℓ²_N(Y)` and the lift data.
    pub lift: LiftContext<T>,
    pub report: CycleReport,
    /// `Σ T Γ T^*` against `Φ^*(1 ⊗ Γ)Φ`.
    pub dual_assembly: IdentityResidual,
    /// Largest twisted-commutator factorization residual over `π_A(E_ij) ⊗ 1`.
    pub twicom: IdentityResidual,
    pub modadj: IdentityResidual,
}

pub fn kasparov_product<T: Real>(
    dm: &DifferentiableModule<T>,
    cycle: &ModularCycle<T>,
    n: usize,
    opts: &ProductOptions<T>,
) -> Result<ProductCycle<T>> {
    let pi_b = cycle.algebra.rep().ok_or_else(|| {
        Error::InvalidArgument("the cycle must carry a representation of B".into())
    })?;
    if cycle.module.k() != 1 {
        return Err(Error::InvalidArgument(
            "the cycle must live on a Hilbert space".into(),
        ));
    }
    let tensor = interior_tensor(&dm.x, &cycle.module, pi_b)?;
    let creations: Vec<CMat<T>> = dm.xis.iter().map(|xi| tensor.creation_op(xi)).collect();
    let (phi, phi_report) = build_phi(&creations, n)?;
    let creations = creations[..n].to_vec();

    let stabilized = stabilize(cycle, n)?;
    let lift = LiftContext::new(
        phi.clone(),
        stabilized.d.clone(),
        stabilized.delta.clone(),
        None,
    )?;
    let (d_delta, modadj) = modular_lift(&lift);
    let (delta_sum, _) = assemble_from_creations(&creations, &cycle.d, Some(&cycle.delta))?;
    let dual_assembly = IdentityResidual::from_mats("dual_assembly", &delta_sum, &lift.delta, None);

    let pi_a = &dm.pi_a;
    let images = pi_a
        .images()
        .iter()
        .map(|e| tensor.lift_operator(e))
        .collect();
    let rep = Representation::new(pi_a.k(), images)?;
    let gamma = cycle
        .gamma
        .as_ref()
        .map(|g| HermMatrix::from_hermitian_part(&tensor.lift_coefficient_operator(g)));
    let product = ModularCycle::new(
        tensor.as_module(),
        d_delta,
        lift.delta.clone(),
        CycleAlgebra::Rep(rep.clone()),
        gamma,
    )?;

    let mut twicom =
        IdentityResidual::from_mats::<T>("twicom", &CMat::zeros(1, 1), &CMat::zeros(1, 1), None);
    for t in rep.images() {
        let lhs = twisted_commutator(&product.d, &product.delta, t);
        let inner = twisted_commutator(&lift.d, &lift.gamma, &phi.matmul(t).mul_adjoint(&phi));
        let rhs = phi.adjoint_mul(&inner).matmul(&phi);
        let res = IdentityResidual::from_mats("twicom", &lhs, &rhs, None);
        if res.relative() >= twicom.relative() {
            twicom = res;
        }
    }

    let report = check_cycle(&product, &[], opts.n_approx, &opts.check)?;
    Ok(ProductCycle {
        tensor,
        creations,
        phi,
        phi_report,
        cycle: product,
        lift,
        report,
        dual_assembly,
        twicom,
        modadj,
    })
}

/// `Φ (π_A(a) ⊗ 1) Φ^*` against the block matrix `(π_B(τ(a)_{nm}))_{nm}`.
pub fn gram_reconstruction_residual<T: Real>(
    pc: &ProductCycle<T>,
    dm: &DifferentiableModule<T>,
    a: &CMat<T>,
) -> Result<IdentityResidual> {
    let n = pc.creations.len();
    let k = dm.x.k();
    let q = pc.tensor.y.rows;
    let tau = dm.tau(a);
    let mut blocks = CMat::zeros(n * q, n * q);
    for i in 0..n {
        for j in 0..n {
            blocks.set_block(
                i * q,
                j * q,
                &pc.tensor.rep.apply(&tau.submatrix(i * k, j * k, k, k)),
            );
        }
    }
    let t = pc.tensor.lift_operator(&dm.pi_a.apply(a));
    let lhs = pc.phi.matmul(&t).mul_adjoint(&pc.phi);
    Ok(IdentityResidual::from_mats(
        "gram_reconstruction",
        &lhs,
        &blocks,
        None,
    ))
}

/// `Ω^*Ω` against the range projection of `Δ`, with
/// `Ω = (1 ⊗ Γ)^{1/2} Φ Δ^{-1/2}` (pseudo-inverse on the range).
pub fn omega_isometry_check<T: Real>(pc: &ProductCycle<T>) -> Result<IdentityResidual> {
    let e = eig_herm(&pc.cycle.delta)?;
    let floor = T::lit(DENSE_IMAGE_TOL) * e.max_abs_value();
    let inv_sqrt = range_power_from(&e, T::lit(-0.5), floor);
    let projector = range_power_from(&e, T::zero(), floor);
    let gamma_sqrt = eig_herm(&pc.lift.gamma)?.apply(|l| l.max(T::zero()).sqrt())?;
    let omega = gamma_sqrt.matmul(&pc.phi).matmul(&inv_sqrt);
    Ok(IdentityResidual::from_mats(
        "omega_isometry",
        &omega.adjoint_mul(&omega),
        &projector,
        None,
    ))
}

/// Bounded-transform conditions for a cycle and the listed elements.
pub fn kasparov_module_check<T: Real>(
    c: &ModularCycle<T>,
    elems: &[CMat<T>],
) -> Result<CycleReport> {
    let elems: Vec<CMat<T>> = if elems.is_empty() {
        c.algebra.elements()
    } else {
        elems.to_vec()
    };
    let n = c.dim();
    let f = bounded_transform(&c.d)?;
    let mut report = CycleReport::default();

    let sa = op_norm(&(f.as_mat() - &f.adjoint())).as_f64();
    report.push(ConditionResult::new("self_adjoint", sa <= 1e-12, sa));

    let resolvent = eig_herm(&c.d)?.apply(|x| (T::one() + x * x).recip())?;
    let square = &(&f.matmul(&f) - &CMat::identity(n)) + resolvent.as_mat();
    let sq = op_norm(&square).as_f64();
    report.push(ConditionResult::new("square_defect", sq <= 1e-12, sq));

    let comms: Vec<f64> = elems
        .iter()
        .map(|a| op_norm(&f.commutator(a)).as_f64())
        .collect();
    let top = comms.iter().cloned().fold(0.0, f64::max);
    report.push(ConditionResult::new("commutators", top.is_finite(), top).with_values(comms));

    let delta5 = eig_herm(&c.delta)?.apply(|l| l.max(T::zero()).powi(5))?;
    let mut smoothed = Vec::with_capacity(elems.len());
    for a in &elems {
        let inner = delta5.matmul(a).matmul(&delta5);
        let comm = f.commutator(&inner);
        let worst = elems
            .iter()
            .map(|b| op_norm(&comm.matmul(b)))
            .fold(T::zero(), T::max);
        smoothed.push(worst.as_f64());
    }
    let top = smoothed.iter().cloned().fold(0.0, f64::max);
    report.push(
        ConditionResult::new("smoothed_commutators", top.is_finite(), top)
            .with_values(smoothed)
            .with_note("max_b ||[F, Delta^5 a Delta^5] b|| per a"),
    );

    if let Some(g) = &c.gamma {
        let r = op_norm(&(&f.matmul(g) + &g.matmul(&f))).as_f64();
        report.push(ConditionResult::new("grading", r <= 1e-12, r));
    }
    Ok(report)
}

/// Largest ratio between consecutive entries of a refinement sequence.
pub fn growth_factor(norms: &[f64]) -> f64 {
    norms
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 {
                w[1] / w[0]
            } else if w[1] > 0.0 {
                f64::INFINITY
            } else {
                1.0
            }
        })
        .fold(1.0, f64::max)
}

/// `‖F T_ξ^* - T_ξ^* F_Δ‖` and the decay of
/// `K_λ = Γ⁵ΦΔ²S_λΔ⁴D_Δ - DΓ⁴T_λΓ²ΦΔ⁵` over `lambda_grid`.
#[derive(Clone, Debug, Serialize)]
pub struct FConnection {
    pub norm: f64,
    pub sweep: DecayFit,
}

pub fn f_connection_residual<T: Real>(
    pc: &ProductCycle<T>,
    cycle: &ModularCycle<T>,
    xi: &CMat<T>,
    lambda_grid: &[f64],
) -> Result<FConnection> {
    let f = bounded_transform(&cycle.d)?;
    let f_delta = bounded_transform(&pc.cycle.d)?;
    let t = pc.tensor.creation_op(xi);
    let diff = &f.matmul(&t.adjoint()) - &t.adjoint().matmul(&f_delta);
    let norm = op_norm(&diff).as_f64();

    let ctx = &pc.lift;
    let gamma = ctx.gamma.as_mat();
    let g2 = gamma.matmul(gamma);
    let g4 = g2.matmul(&g2);
    let g5 = g4.matmul(gamma);
    let delta = ctx.delta.as_mat();
    let d2 = delta.matmul(delta);
    let d4 = d2.matmul(&d2);
    let d5 = d4.matmul(delta);
    let left = g5.matmul(&ctx.phi).matmul(&d2);
    let right_tail = g2.matmul(&ctx.phi).matmul(&d5);
    let head = ctx.d.matmul(&g4);
    let norms: Vec<f64> = lambda_grid
        .iter()
        .map(|&l| {
            let l = T::lit(l);
            let s = ctx.s_lambda(l)?;
            let tl = ctx.t_lambda(l)?;
            let first = left.matmul(&s).matmul(&d4).matmul(&ctx.d_delta);
            let second = head.matmul(&tl).matmul(&right_tail);
            Ok(op_norm(&(&first - &second)).as_f64())
        })
        .collect::<Result<_>>()?;
    let sweep = fit_sweep(
        "f-connection",
        CONNECTION_EXPONENT,
        lambda_grid.to_vec(),
        norms,
        None,
    );
    Ok(FConnection { norm, sweep })
}

/// Norms along the reduction of the F-connection property to a statement
/// about `Φ`.
#[derive(Clone, Debug, Serialize)]
pub struct ConnectionChain {
    pub k: u32,
    /// `(1 ⊗ FΓ^k) Φ Δ^k` against `(1 ⊗ Γ^k) Φ Δ^k F_Δ`.
    pub hypothesis: IdentityResidual,
    /// `(1 ⊗ FΓ^k) Φ` against `(1 ⊗ Γ^k) Φ F_Δ`.
    pub first_inclusion: IdentityResidual,
    /// `Φ F_Δ` against `(1 ⊗ F) Φ`.
    pub second_inclusion: IdentityResidual,
    /// Largest `‖T_{ξ_n}^* F_Δ - F T_{ξ_n}^*‖`.
    pub generator_max: f64,
    /// Exact rewriting of the regularized hypothesis with `[F_Δ, Δ^k]`.
    pub regularized_expansion: IdentityResidual,
    /// `‖(1 ⊗ Γ^k(Γ^k + 1/n)^{-1}) Φ - Φ‖` for `n` in `unit_orders`.
    pub gamma_unit: Vec<f64>,
    /// `‖(1 ⊗ Γ)^{1/2} Φ Δ^k(Δ^k + 1/n)^{-1} - (1 ⊗ Γ)^{1/2} Φ‖`.
    pub delta_unit: Vec<f64>,
    pub unit_orders: Vec<usize>,
    pub units_converge: bool,
}

pub fn repconcon_chain<T: Real>(
    pc: &ProductCycle<T>,
    cycle: &ModularCycle<T>,
    k: u32,
    unit_orders: &[usize],
) -> Result<ConnectionChain> {
    let n_blocks = pc.creations.len();
    let f = bounded_transform(&cycle.d)?.into_mat();
    let f_lift = f.block_diag_repeat(n_blocks);
    let f_delta = bounded_transform(&pc.cycle.d)?.into_mat();
    let gamma = pc.lift.gamma.as_mat();
    let gamma_k = gamma.powi(k);
    let delta_k = pc.cycle.delta.powi(k);
    let phi = &pc.phi;

    let fg = f_lift.matmul(&gamma_k);
    let hypothesis = IdentityResidual::from_mats(
        "hypothesis",
        &fg.matmul(phi).matmul(&delta_k),
        &gamma_k.matmul(phi).matmul(&delta_k).matmul(&f_delta),
        None,
    );
    let first_inclusion = IdentityResidual::from_mats(
        "first_inclusion",
        &fg.matmul(phi),
        &gamma_k.matmul(phi).matmul(&f_delta),
        None,
    );
    let second_inclusion = IdentityResidual::from_mats(
        "second_inclusion",
        &phi.matmul(&f_delta),
        &f_lift.matmul(phi),
        None,
    );
    let generator_max = pc
        .creations
        .iter()
        .map(|t| op_norm(&(&t.adjoint().matmul(&f_delta) - &f.matmul(&t.adjoint()))).as_f64())
        .fold(0.0, f64::max);

    let delta_k_herm = HermMatrix::from_hermitian_part(&delta_k);
    let delta_k_eig = eig_herm(&delta_k_herm)?;
    let gamma_k_eig = eig_herm(&HermMatrix::from_hermitian_part(&gamma_k))?;
    let gamma_sqrt = eig_herm(&pc.lift.gamma)?.apply(|l| l.max(T::zero()).sqrt())?;
    let order = unit_orders.first().copied().unwrap_or(1).max(1);
    let reg = delta_k_eig.apply(|l| (l + T::from_count(order).recip()).recip())?;
    let lhs = &fg.matmul(phi).matmul(&delta_k).matmul(&reg)
        - &gamma_k
            .matmul(phi)
            .matmul(&delta_k)
            .matmul(&reg)
            .matmul(&f_delta);
    let rhs = &(&fg.matmul(phi).matmul(&delta_k).matmul(&reg)
        - &gamma_k
            .matmul(phi)
            .matmul(&delta_k)
            .matmul(&f_delta)
            .matmul(&reg))
        - &gamma_k
            .matmul(phi)
            .matmul(&delta_k)
            .matmul(&reg)
            .matmul(&f_delta.commutator(&delta_k))
            .matmul(&reg);
    let regularized_expansion =
        IdentityResidual::from_mats("regularized_expansion", &lhs, &rhs, None);

    let mut gamma_unit = Vec::with_capacity(unit_orders.len());
    let mut delta_unit = Vec::with_capacity(unit_orders.len());
    let base = gamma_sqrt.matmul(phi);
    for &m in unit_orders {
        let eps = T::from_count(m.max(1)).recip();
        let gu = gamma_k_eig.apply(|l| l / (l + eps))?;
        gamma_unit.push(op_norm(&(&gu.matmul(phi) - phi)).as_f64());
        let du = delta_k_eig.apply(|l| l / (l + eps))?;
        delta_unit.push(op_norm(&(&base.matmul(&du) - &base)).as_f64());
    }
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
    let units_converge = decreasing(&gamma_unit) && decreasing(&delta_unit);
    Ok(ConnectionChain {
        k,
        hypothesis,
        first_inclusion,
        second_inclusion,
        generator_max,
        regularized_expansion,
        gamma_unit,
        delta_unit,
        unit_orders: unit_orders.to_vec(),
        units_converge,
    })
}

/// Creation operators of the multiplication module over a diagonal algebra:
/// `T_f : ℂ^n → ℓ²(Z)`, `(T_f y)(z) = f(z) y(z)` with `Z` the points where
/// some `|f_k|` exceeds `threshold`. Comparing magnitudes keeps points
/// whose squares underflow.
pub fn multiplication_creations<T: Real>(
    samples: &[Vec<T>],
    threshold: T,
) -> Result<(Vec<usize>, Vec<CMat<T>>)> {
    let n = samples.first().map_or(0, Vec::len);
    if samples.iter().any(|s| s.len() != n) {
        return Err(Error::DimensionMismatch("samples of unequal length".into()));
    }
    let support: Vec<usize> = (0..n)
        .filter(|&i| samples.iter().any(|s| s[i].abs() > threshold))
        .collect();
    let creations = samples
        .iter()
        .map(|s| {
            let mut t = CMat::zeros(support.len(), n);
            for (row, &i) in support.iter().enumerate() {
                t[(row, i)] = crate::scalar::cre(s[i]);
            }
            t
        })
        .collect();
    Ok((support, creations))
}
