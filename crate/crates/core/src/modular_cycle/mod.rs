//! Modular cycles `(Y, D, Δ)` with an action of a matrix algebra, the
//! twisted derivatives they induce and a finite-dimensional check of the
//! cycle axioms.

mod twist;

pub use twist::{
    twisted_commutator, twisted_derivative, DeltaCalculus, FloorReport, TwistedDerivative,
};

use crate::error::{Error, Result};
use crate::hilbert_module::{
    cb_norm_estimate, CbOptions, HilbertModule, LinearMap, Representation,
};
use crate::matfun::{eig_herm, op_norm, resolvent, singular_values, CMat, HermMatrix};
use crate::random::{random_hermitian, random_positive, random_unitary, rng};
use crate::report::{ConditionResult, CycleReport};
use crate::scalar::{ci, Real};

/// Tolerance for the grading relations.
const GRADING_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

/// The algebra acting on a cycle: either a *-representation of a full
/// matrix algebra or an explicit list of test operators.
#[derive(Clone, Debug)]
pub enum CycleAlgebra<T: Real> {
    Rep(Representation<T>),
    Elements(Vec<CMat<T>>),
}

impl<T: Real> CycleAlgebra<T> {
    /// Operators spanning the algebra's image.
    pub fn elements(&self) -> Vec<CMat<T>> {
        match self {
            CycleAlgebra::Rep(r) => r.images().to_vec(),
            CycleAlgebra::Elements(v) => v.clone(),
        }
    }

    pub fn rep(&self) -> Option<&Representation<T>> {
        match self {
            CycleAlgebra::Rep(r) => Some(r),
            CycleAlgebra::Elements(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModularCycle<T: Real> {
    pub module: HilbertModule,
    pub d: HermMatrix<T>,
    pub delta: HermMatrix<T>,
    pub algebra: CycleAlgebra<T>,
    pub gamma: Option<HermMatrix<T>>,
    pub parity: Parity,
}

fn relation_defect<T: Real>(x: &CMat<T>, scale: T) -> T {
    op_norm(x) / (T::one() + scale)
}

impl<T: Real> ModularCycle<T> {
    /// Validates shapes, positivity of `Δ` and, if present, the grading.
    pub fn new(
        module: HilbertModule,
        d: HermMatrix<T>,
        delta: HermMatrix<T>,
        algebra: CycleAlgebra<T>,
        gamma: Option<HermMatrix<T>>,
    ) -> Result<Self> {
        let n = module.rows;
        if d.dim() != n || delta.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "module has {n} rows, D is {}, Delta is {}",
                d.dim(),
                delta.dim()
            )));
        }
        let elems = algebra.elements();
        if elems.iter().any(|a| a.shape() != (n, n)) {
            return Err(Error::DimensionMismatch(
                "algebra element of wrong shape".into(),
            ));
        }
        let ev = eig_herm(&delta)?;
        let top = ev.max_abs_value();
        if ev.values[0] < -T::lit(1e-12) * (T::one() + top) {
            return Err(Error::DomainError {
                eigenvalue: ev.values[0].as_f64(),
            });
        }
        let parity = if gamma.is_some() {
            Parity::Even
        } else {
            Parity::Odd
        };
        if let Some(g) = &gamma {
            if g.dim() != n {
                return Err(Error::DimensionMismatch("grading of wrong size".into()));
            }
            let tol = T::lit(GRADING_TOL);
            let sq = relation_defect(&(&g.matmul(g) - &CMat::identity(n)), T::one());
            if sq > tol {
                return Err(Error::GradingMismatch {
                    relation: "gamma^2 = 1",
                    residual: sq.as_f64(),
                });
            }
            let dn = op_norm(&d);
            let anti = relation_defect(&(&g.matmul(&d) + &d.matmul(g)), dn);
            if anti > tol {
                return Err(Error::GradingMismatch {
                    relation: "gamma D = -D gamma",
                    residual: anti.as_f64(),
                });
            }
            let comm = relation_defect(&g.commutator(&delta), top);
            if comm > tol {
                return Err(Error::GradingMismatch {
                    relation: "gamma Delta = Delta gamma",
                    residual: comm.as_f64(),
                });
            }
            for a in &elems {
                let r = relation_defect(&g.commutator(a), op_norm(a));
                if r > tol {
                    return Err(Error::GradingMismatch {
                        relation: "gamma pi(a) = pi(a) gamma",
                        residual: r.as_f64(),
                    });
                }
            }
        }
        Ok(Self {
            module,
            d,
            delta,
            algebra,
            gamma,
            parity,
        })
    }

    pub fn dim(&self) -> usize {
        self.module.rows
    }

    pub fn calculus(&self, floor: Option<T>) -> Result<DeltaCalculus<T>> {
        DeltaCalculus::new(&self.d, &self.delta, floor)
    }

    /// Conformal perturbation `(g D g, g^2)` by a positive `g`.
    pub fn conformal(&self, g: &HermMatrix<T>) -> Result<Self> {
        let d = g.sandwich(&self.d);
        let delta = HermMatrix::from_hermitian_part(&g.matmul(g));
        Self::new(
            self.module,
            d,
            delta,
            self.algebra.clone(),
            self.gamma.clone(),
        )
    }
}

/// Options for [`check_cycle`].
#[derive(Clone, Copy, Debug)]
pub struct CheckOptions<T: Real> {
    pub floor: Option<T>,
    pub cb_levels: usize,
    pub cb: CbOptions,
    /// Pass threshold for `max_a ‖V_n π(a) - π(a)‖ / ‖π(a)‖` at the last `n`.
    pub approx_unit_tol: T,
}

impl<T: Real> Default for CheckOptions<T> {
    fn default() -> Self {
        Self {
            floor: None,
            cb_levels: 4,
            cb: CbOptions::default(),
            approx_unit_tol: T::lit(0.1),
        }
    }
}

/// Checks the five cycle conditions on the given algebra elements (the
/// algebra's own spanning set when `elems` is empty).
pub fn check_cycle<T: Real>(
    c: &ModularCycle<T>,
    elems: &[CMat<T>],
    n_approx: usize,
    opts: &CheckOptions<T>,
) -> Result<CycleReport> {
    let elems: Vec<CMat<T>> = if elems.is_empty() {
        c.algebra.elements()
    } else {
        elems.to_vec()
    };
    let calc = c.calculus(opts.floor)?;
    let mut report = CycleReport::default();

    // (1) Compact resolvent is automatic in finite dimensions; report the
    // singular values of π(a)(i + D)^{-1} for the first element.
    let res = resolvent(&c.d, -ci::<T>())?;
    let sv = match elems.first() {
        Some(a) => singular_values(&a.matmul(&res))?
            .into_iter()
            .map(|s| s.as_f64())
            .collect(),
        None => Vec::new(),
    };
    report.push(
        ConditionResult::new("compact_resolvent", true, 0.0)
            .with_values(sv)
            .with_note("finite dimensional"),
    );

    // (2) and (3).
    let mut max_d = T::zero();
    let mut max_rho = T::zero();
    let mut rho_failure: Option<Error> = None;
    let mut max_leak = 0.0f64;
    for a in &elems {
        let dd = calc.d_delta(a);
        max_d = max_d.max(op_norm(&dd));
        match calc.normalize(&dd) {
            Ok((rho, fr)) => {
                max_rho = max_rho.max(op_norm(&rho));
                max_leak = max_leak.max(fr.leakage);
            }
            Err(e) => {
                rho_failure.get_or_insert(e);
            }
        }
    }
    report.push(ConditionResult::new(
        "twisted_domain",
        max_d.is_finite(),
        max_d.as_f64(),
    ));
    let rho_ok = rho_failure.is_none() && max_rho.is_finite();
    let mut cond3 = ConditionResult::new("twisted_bounded", rho_ok, max_rho.as_f64())
        .with_values(vec![max_leak]);
    if let Some(e) = &rho_failure {
        cond3 = cond3.with_note(e.to_string());
    }
    report.push(cond3);

    // (4) Complete boundedness of a ↦ ρ_Δ(π(a)).
    let cond4 = if !rho_ok {
        ConditionResult::new("cb_bounded", false, f64::INFINITY)
            .with_note("twisted derivative unbounded")
    } else {
        match &c.algebra {
            CycleAlgebra::Rep(pi) => {
                let images: Result<Vec<CMat<T>>> = pi
                    .images()
                    .iter()
                    .map(|e| calc.normalize(&calc.d_delta(e)).map(|r| r.0))
                    .collect();
                let phi = LinearMap::new(pi.k(), images?)?;
                let levels = cb_norm_estimate(&phi, opts.cb_levels.max(1), opts.cb)?;
                let top = *levels.last().expect("at least one level");
                ConditionResult::new("cb_bounded", top.is_finite(), top.as_f64())
                    .with_values(levels.iter().map(|v| v.as_f64()).collect())
                    .with_note("amplification norms, levels 1..n")
            }
            CycleAlgebra::Elements(list) => {
                let ratios: Vec<f64> = list
                    .iter()
                    .map(|a| {
                        let rho = calc
                            .normalize(&calc.d_delta(a))
                            .map(|r| op_norm(&r.0))
                            .unwrap_or(T::infinity());
                        let n = op_norm(a);
                        if n > T::zero() {
                            (rho / n).as_f64()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let top = ratios.iter().cloned().fold(0.0, f64::max);
                ConditionResult::new("cb_bounded", top.is_finite(), top)
                    .with_values(ratios)
                    .with_note("level one ratios on the listed elements")
            }
        }
    };
    report.push(cond4);

    // (5) Approximate unit V_n = Δ(Δ + 1/n)^{-1}. In the eigenbasis of Δ,
    // ‖(V_n - 1) a‖² = λ_max(W G W) with G = U^* a a^* U and
    // W = diag(-(1/n) / (λ⁺ + 1/n)).
    let norms: Vec<T> = elems.iter().map(|a| op_norm(a)).collect();
    let grams: Vec<CMat<T>> = elems
        .iter()
        .map(|a| {
            let rotated = calc.eig.vectors.adjoint_mul(a);
            rotated.mul_adjoint(&rotated)
        })
        .collect();
    let mut seq = Vec::with_capacity(n_approx);
    for n in 1..=n_approx.max(1) {
        let s = T::one() / T::from_count(n);
        let w: Vec<_> = calc
            .eig
            .values
            .iter()
            .map(|&l| crate::scalar::cre(s / (l.max(T::zero()) + s)))
            .collect();
        let worst = grams
            .iter()
            .zip(&norms)
            .map(|(g, &na)| {
                if na > T::zero() {
                    let scaled = HermMatrix::from_hermitian_part(&g.scale_rows(&w).scale_cols(&w));
                    op_norm(&scaled).max(T::zero()).sqrt() / na
                } else {
                    T::zero()
                }
            })
            .fold(T::zero(), T::max);
        seq.push(worst.as_f64());
    }
    let last = *seq.last().unwrap_or(&0.0);
    report.push(
        ConditionResult::new(
            "approximate_unit",
            last <= opts.approx_unit_tol.as_f64(),
            last,
        )
        .with_values(seq)
        .with_note("max_a ||V_n a - a|| / ||a|| for n = 1..n_approx"),
    );

    if let Some(g) = &c.gamma {
        let n = c.dim();
        let r = op_norm(&(&g.matmul(&c.d) + &c.d.matmul(g)))
            .max(op_norm(&(&g.matmul(g) - &CMat::identity(n))));
        report.push(ConditionResult::new(
            "grading",
            r <= T::lit(GRADING_TOL) * (T::one() + op_norm(&c.d)),
            r.as_f64(),
        ));
    }
    Ok(report)
}

/// Stabilization on `ℓ²_N(Y)`: `1 ⊗ D`, `1 ⊗ Δ`, `1 ⊗ γ` and the algebra
/// acting through `K(π)`.
pub fn stabilize<T: Real>(c: &ModularCycle<T>, n: usize) -> Result<ModularCycle<T>> {
    let module = crate::hilbert_module::std_module_trunc(&c.module, n);
    let algebra = match &c.algebra {
        CycleAlgebra::Rep(pi) => CycleAlgebra::Rep(pi.stabilize(n)),
        CycleAlgebra::Elements(list) => {
            let mut out = Vec::with_capacity(list.len() * n * n);
            for a in list {
                for i in 0..n {
                    for j in 0..n {
                        let mut u = CMat::zeros(n, n);
                        u[(i, j)] = crate::scalar::cre(T::one());
                        out.push(u.kron(a));
                    }
                }
            }
            CycleAlgebra::Elements(out)
        }
    };
    ModularCycle::new(
        module,
        c.d.identity_kron(n),
        c.delta.identity_kron(n),
        algebra,
        c.gamma.as_ref().map(|g| g.identity_kron(n)),
    )
}

/// Odd cycle on `ℂ^dim` with the full matrix algebra, `‖D‖ = spectral_radius`
/// and `Δ` with spectrum log-uniform in `[radius / cond, radius]`.
pub fn random_cycle<T: Real>(
    seed: u64,
    dim: usize,
    spectral_radius: T,
    delta_condition_number: T,
) -> Result<ModularCycle<T>> {
    let mut r = rng(seed);
    let d = random_hermitian(&mut r, dim, spectral_radius);
    let delta = random_positive(&mut r, dim, spectral_radius, delta_condition_number);
    ModularCycle::new(
        HilbertModule::hilbert_space(dim),
        d,
        delta,
        CycleAlgebra::Rep(Representation::identity(dim)),
        None,
    )
}

/// Odd cycle on `ℂ^{k m}` carrying `b ↦ U (b ⊗ 1_m) U^*` of `M_k`.
pub fn random_cycle_over<T: Real>(
    seed: u64,
    k: usize,
    m: usize,
    spectral_radius: T,
    delta_condition_number: T,
) -> Result<ModularCycle<T>> {
    let mut r = rng(seed);
    let q = k * m;
    let u = random_unitary(&mut r, q);
    let pi = Representation::conjugated_ampliation(k, m, &u)?;
    let d = random_hermitian(&mut r, q, spectral_radius);
    let delta = random_positive(&mut r, q, spectral_radius, delta_condition_number);
    ModularCycle::new(
        HilbertModule::hilbert_space(q),
        d,
        delta,
        CycleAlgebra::Rep(pi),
        None,
    )
}

/// Even cycle on `ℂ^h ⊕ ℂ^h`: `γ = 1 ⊕ -1`, off-diagonal `D`, diagonal
/// `Δ` and `M_h` acting diagonally.
pub fn random_even_cycle<T: Real>(
    seed: u64,
    half: usize,
    spectral_radius: T,
    delta_condition_number: T,
) -> Result<ModularCycle<T>> {
    let mut r = rng(seed);
    let a = crate::random::gaussian_matrix::<T>(&mut r, half, half);
    let a = a.scale_re(spectral_radius / op_norm(&a));
    let mut d = CMat::zeros(2 * half, 2 * half);
    d.set_block(0, half, &a);
    d.set_block(half, 0, &a.adjoint());
    let d1 = random_positive(&mut r, half, spectral_radius, delta_condition_number);
    let d2 = random_positive(&mut r, half, spectral_radius, delta_condition_number);
    let delta = HermMatrix::from_hermitian_part(&d1.direct_sum(&d2));
    let signs: Vec<T> = (0..2 * half)
        .map(|i| if i < half { T::one() } else { -T::one() })
        .collect();
    let gamma = HermMatrix::from_real_diag(&signs);
    let pi = Representation::from_fn(half, |e| e.direct_sum(e))?;
    ModularCycle::new(
        HilbertModule::hilbert_space(2 * half),
        HermMatrix::from_hermitian_part(&d),
        delta,
        CycleAlgebra::Rep(pi),
        Some(gamma),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_cycles_are_bitwise_reproducible() {
        let a = random_cycle::<f64>(7, 5, 2.0, 10.0).unwrap();
        let b = random_cycle::<f64>(7, 5, 2.0, 10.0).unwrap();
        assert_eq!(a.d, b.d);
        assert_eq!(a.delta, b.delta);
    }

    #[test]
    fn unit_condition_gives_scalar_delta() {
        let c = random_cycle::<f64>(1, 4, 3.0, 1.0).unwrap();
        assert_eq!(c.delta.as_mat(), &CMat::identity(4).scale_re(3.0));
    }

    #[test]
    fn delta_spectrum_within_requested_band() {
        let c = random_cycle::<f64>(2, 6, 2.0, 8.0).unwrap();
        let ev = eig_herm(&c.delta).unwrap();
        assert!(ev.values[0] >= 0.25 - 1e-12 && ev.values[5] <= 2.0 + 1e-12);
    }

    #[test]
    fn generic_cycle_passes() {
        let c = random_cycle::<f64>(3, 4, 1.0, 4.0).unwrap();
        let rep = check_cycle(&c, &[], 200, &CheckOptions::default()).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn conformal_perturbation_passes() {
        let c = random_cycle::<f64>(4, 4, 1.0, 1.0).unwrap();
        let g = random_positive::<f64>(&mut rng(40), 4, 1.5, 3.0);
        let conf = c.conformal(&g).unwrap();
        let rep = check_cycle(&conf, &[], 200, &CheckOptions::default()).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn kernel_supported_element_fails_approximate_unit() {
        let d = HermMatrix::from_real_diag(&[1.0, -1.0]);
        let delta = HermMatrix::from_real_diag(&[1.0, 0.0]);
        let a = CMat::from_real_rows(&[&[0.0, 0.0], &[0.0, 1.0]]);
        let c = ModularCycle::new(
            HilbertModule::hilbert_space(2),
            d,
            delta,
            CycleAlgebra::Elements(vec![a]),
            None,
        )
        .unwrap();
        let rep = check_cycle(&c, &[], 50, &CheckOptions::default()).unwrap();
        let cond = rep.get("approximate_unit").unwrap();
        assert!(!cond.passed);
        assert!((cond.residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stabilization_is_blockwise() {
        let c = random_even_cycle::<f64>(5, 2, 1.0, 3.0).unwrap();
        let s = stabilize(&c, 3).unwrap();
        assert_eq!(s.parity, Parity::Even);
        let t = crate::random::gaussian_matrix::<f64>(&mut rng(9), 4, 4);
        let lifted = crate::hilbert_module::diag_lift(&t, 3);
        let lhs = twisted_commutator(&s.d, &s.delta, &lifted);
        let rhs = crate::hilbert_module::diag_lift(&twisted_commutator(&c.d, &c.delta, &t), 3);
        assert!((&lhs - &rhs).norm_fro() < 1e-13);
    }

    #[test]
    fn bad_grading_rejected() {
        let c = random_cycle::<f64>(6, 2, 1.0, 2.0).unwrap();
        let g = HermMatrix::from_real_diag(&[1.0, -1.0]);
        let r = ModularCycle::new(
            c.module,
            c.d.clone(),
            c.delta.clone(),
            c.algebra.clone(),
            Some(g),
        );
        assert!(matches!(r, Err(Error::GradingMismatch { .. })));
    }

    #[test]
    fn even_cycle_passes_with_grading() {
        let c = random_even_cycle::<f64>(8, 3, 1.0, 3.0).unwrap();
        let rep = check_cycle(&c, &[], 200, &CheckOptions::default()).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.get("grading").unwrap().passed);
    }
}
