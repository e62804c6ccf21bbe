//! Series identities and norm envelopes feeding the square-root integral.

use serde::Serialize;
use statrs::function::beta::ln_beta;

use super::{fit_decay, TransformContext};
use crate::error::{Error, Result};
use crate::matfun::{op_norm, CMat, HermMatrix};
use crate::report::IdentityResidual;
use crate::scalar::Real;

/// `Σ_n (1+D²)^p R_λ^{2n+2} λ^{2n}` against `(1+D²)^{p-1} (2λ+1+D²)^{-1}`.
///
/// The series is summed by repeated doubling,
/// `P_{2N} = P_N + (λR_λ)^{2N} P_N`, until the ratio power drops below
/// `1e-17`.
pub fn intrig_residual<T: Real>(
    ctx: &TransformContext<T>,
    lambda: T,
    p: i32,
) -> Result<IdentityResidual> {
    let n = ctx.dim();
    let weight = ctx.d_function(|x| (T::one() + x * x).powi(p))?;
    let r = ctx.resolvent_d2(lambda).into_mat();
    let mut sum = weight.matmul(&r).matmul(&r);
    let lr = r.scale_re(lambda);
    let mut ratio = lr.matmul(&lr);
    let mut doublings = 0;
    while op_norm(&ratio) > T::lit(1e-17) {
        sum = &sum + &ratio.matmul(&sum);
        ratio = ratio.matmul(&ratio);
        doublings += 1;
        if doublings > 200 {
            return Err(Error::NoConvergence {
                iterations: doublings,
            });
        }
    }
    let expected = ctx.d_function(|x| {
        let s = T::one() + x * x;
        s.powi(p - 1) / (T::lit(2.0) * lambda + s)
    })?;
    debug_assert_eq!(sum.shape(), (n, n));
    Ok(IdentityResidual::from_mats(
        "intrig",
        &sum,
        expected.as_mat(),
        Some(lambda),
    ))
}

/// `Σ_{n=0}^N (Δ²/r) K^{2n} (2 - Δ²/r)` against `1 - K^{2(N+1)}`.
pub fn conkay_residual<T: Real>(ctx: &TransformContext<T>, big_n: usize) -> IdentityResidual {
    let n = ctx.dim();
    let a = ctx.delta_squared().scale_re(T::one() / ctx.r);
    let two_minus = &CMat::identity(n).scale_re(T::lit(2.0)) - &a;
    let k = ctx.contraction().as_mat();
    let k2 = k.matmul(k);
    let mut power = CMat::identity(n);
    let mut sum = CMat::zeros(n, n);
    for _ in 0..=big_n {
        sum = &sum + &a.matmul(&power).matmul(&two_minus);
        power = power.matmul(&k2);
    }
    let rhs = &CMat::identity(n) - &power;
    IdentityResidual::from_mats("conkay", &sum, &rhs, None)
}

/// Partial sums `(1/(π√r)) Σ_{n≤N} Δ² Kⁿ B(n+1/2, 1/2)` tested against
/// density matrices.
#[derive(Clone, Debug, Serialize)]
pub struct WeightedSqrtReport {
    pub n_terms: usize,
    /// `‖partial - Δ‖` at the last order.
    pub distance: f64,
    /// Every state sees a non-decreasing sequence of expectations.
    pub monotone: bool,
    /// `tr(ρΔ) - tr(ρ P_N)` per state.
    pub gaps: Vec<f64>,
}

pub fn weasqr_check<T: Real>(
    ctx: &TransformContext<T>,
    n_terms: usize,
    states: &[HermMatrix<T>],
) -> Result<WeightedSqrtReport> {
    let n = ctx.dim();
    for s in states {
        if s.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "state of dim {} on {n}",
                s.dim()
            )));
        }
    }
    let scale = T::one() / (T::PI() * ctx.r.sqrt());
    let mut power = ctx.delta_squared().clone();
    let mut partial = CMat::zeros(n, n);
    let mut last: Vec<T> = vec![T::zero(); states.len()];
    let mut monotone = true;
    let tol = T::lit(1e-13);
    for j in 0..=n_terms {
        let b = T::lit(ln_beta(j as f64 + 0.5, 0.5).exp());
        partial = &partial + &power.scale_re(scale * b);
        power = power.matmul(ctx.contraction());
        for (s, prev) in states.iter().zip(last.iter_mut()) {
            let v = s.matmul(&partial).trace().re;
            if v < *prev - tol * prev.abs().max(T::one()) {
                monotone = false;
            }
            *prev = v;
        }
    }
    let gaps = states
        .iter()
        .zip(&last)
        .map(|(s, &v)| (s.matmul(&ctx.delta).trace().re - v).as_f64())
        .collect();
    Ok(WeightedSqrtReport {
        n_terms,
        distance: op_norm(&(&partial - ctx.delta.as_mat())).as_f64(),
        monotone,
        gaps,
    })
}

/// Three-term domination of the partial sums
/// `f_N(λ) = (λr)^{-1/2} Σ_{n≤N} Δ⁶ Kⁿ R_λ^{n+1} λⁿ`.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub lambda: f64,
    /// `‖f_N(λ)‖` for `N = 0, …, n_max`.
    pub partial_norms: Vec<f64>,
    /// Weighted suprema over `N` of the geometric, commutator and
    /// truncation terms.
    pub geometric: f64,
    pub commutator: f64,
    pub truncation: f64,
    /// `g(λ)`, the sum of the three suprema.
    pub envelope: f64,
    pub dominated: bool,
    /// Largest relative residual of the three-term splitting over `N`.
    pub split_residual: f64,
    /// Whether the geometric term obeys `‖Δ³ Σ X_λⁿ R_λ Δ³‖ ≤ 2r³/(1+λ)`.
    pub geometric_bound: bool,
}

/// Splits `Σ_{n≤N} Δ⁶KⁿR^{n+1}λⁿ` as
/// `Δ³ΣXⁿRΔ³ + Δ³ΣXⁿ I(RΔ³) R + Σ_{n<N} Δ³Kⁿ L_λ(N-n) R^{n+1} λⁿ`
/// and records the weighted norms of each piece.
pub fn envelope_check<T: Real>(
    ctx: &TransformContext<T>,
    lambda: T,
    n_max: usize,
) -> Result<EnvelopeReport> {
    if !(lambda > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "envelope needs lambda > 0, got {lambda}"
        )));
    }
    let n = ctx.dim();
    let weight = (lambda * ctx.r).sqrt().recip();
    let delta3 = ctx.delta_cubed();
    let delta6 = delta3.matmul(delta3);
    let r = ctx.resolvent_d2(lambda).into_mat();
    let x = ctx.neumann_ratio(lambda);
    let k_lambda = ctx.contraction().as_mat().scale_re(lambda);
    let comm = ctx.resolvent_delta3_commutator(lambda).matmul(&r);
    let truncated: Vec<CMat<T>> = (0..=n_max)
        .map(|m| {
            if m == 0 {
                Ok(CMat::zeros(n, n))
            } else {
                ctx.error_term(lambda, Some(m))
            }
        })
        .collect::<Result<_>>()?;

    let mut k_pow = vec![CMat::identity(n)];
    let mut r_pow = vec![r.clone()];
    for j in 0..n_max {
        let kp = k_pow[j].matmul(&k_lambda);
        let rp = r_pow[j].matmul(&r);
        k_pow.push(kp);
        r_pow.push(rp);
    }

    let mut partial = CMat::zeros(n, n);
    let mut x_sum = CMat::zeros(n, n);
    let mut x_pow = CMat::identity(n);
    let mut report = EnvelopeReport {
        lambda: lambda.as_f64(),
        partial_norms: Vec::with_capacity(n_max + 1),
        geometric: 0.0,
        commutator: 0.0,
        truncation: 0.0,
        envelope: 0.0,
        dominated: true,
        split_residual: 0.0,
        geometric_bound: true,
    };
    let cube_bound = (T::lit(2.0) * ctx.r.powi(3) / (T::one() + lambda)).as_f64();
    let mut partial_norms = Vec::with_capacity(n_max + 1);
    for big_n in 0..=n_max {
        partial = &partial + &delta6.matmul(&k_pow[big_n]).matmul(&r_pow[big_n]);
        x_sum = &x_sum + &x_pow;
        x_pow = x_pow.matmul(&x);
        let first = delta3.matmul(&x_sum).matmul(&r).matmul(delta3);
        let second = delta3.matmul(&x_sum).matmul(&comm);
        let mut third = CMat::zeros(n, n);
        for j in 0..big_n {
            third = &third
                + &delta3
                    .matmul(&k_pow[j])
                    .matmul(&truncated[big_n - j])
                    .matmul(&r_pow[j]);
        }
        let split = &(&first + &second) + &third;
        let res = IdentityResidual::from_mats("envelope_split", &partial, &split, Some(lambda));
        report.split_residual = report.split_residual.max(res.relative());
        let first_norm = op_norm(&first).as_f64();
        report.geometric_bound &= first_norm <= cube_bound * (1.0 + 1e-9);
        report.geometric = report.geometric.max(first_norm);
        report.commutator = report.commutator.max(op_norm(&second).as_f64());
        report.truncation = report.truncation.max(op_norm(&third).as_f64());
        partial_norms.push((weight * op_norm(&partial)).as_f64());
    }
    let w = weight.as_f64();
    report.geometric *= w;
    report.commutator *= w;
    report.truncation *= w;
    report.envelope = report.geometric + report.commutator + report.truncation;
    report.dominated = partial_norms
        .iter()
        .all(|&p| p <= report.envelope * (1.0 + 1e-12));
    report.partial_norms = partial_norms;
    Ok(report)
}

/// Fitted tail exponent of `g` over the grid points `λ ≥ 10`; integrability
/// at infinity requires a value below `-1`.
pub fn envelope_tail_slope(reports: &[EnvelopeReport]) -> Option<f64> {
    let (l, g): (Vec<f64>, Vec<f64>) = reports
        .iter()
        .filter(|r| r.lambda >= super::FIT_LAMBDA_MIN)
        .map(|r| (r.lambda, r.envelope))
        .unzip();
    fit_decay(&l, &g).map(|f| f.0)
}

/// One order of the convergence `L_λ(m) → L_λ`.
#[derive(Clone, Debug, Serialize)]
pub struct TruncationRow {
    pub m: usize,
    pub distance: f64,
    /// `C m q^{m-1}` with `q = λ/(1+λ)` and
    /// `C = (λ/r) ‖R_λ [D², Δ²] S_λ‖ ‖λ K Δ³ R_λ‖ + ‖L_λ‖`.
    pub bound: f64,
    pub within_bound: bool,
}

pub fn error_term_convergence<T: Real>(
    ctx: &TransformContext<T>,
    lambda: T,
    orders: &[usize],
) -> Result<Vec<TruncationRow>> {
    let full = ctx.error_term(lambda, None)?;
    let r = ctx.resolvent_d2(lambda).into_mat();
    let s = ctx.resolvent_mod(lambda)?.into_mat();
    let comm = ctx.d2_commutator(ctx.delta_squared());
    let c = (lambda / ctx.r)
        * op_norm(&r.matmul(&comm).matmul(&s))
        * op_norm(
            &ctx.contraction()
                .matmul(ctx.delta_cubed())
                .matmul(&r)
                .scale_re(lambda),
        )
        + op_norm(&full);
    let q = lambda / (T::one() + lambda);
    orders
        .iter()
        .map(|&m| {
            if m == 0 {
                return Err(Error::InvalidArgument(
                    "truncation order must be positive".into(),
                ));
            }
            let distance = op_norm(&(&ctx.error_term(lambda, Some(m))? - &full)).as_f64();
            let bound = (c * T::from_count(m) * q.powi(m as i32 - 1)).as_f64();
            Ok(TruncationRow {
                m,
                distance,
                bound,
                within_bound: distance <= bound * (1.0 + 1e-9) + 1e-15,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_positive, rng};
    use crate::transforms::{log_grid, random_transform_context};

    #[test]
    fn intrig_closed_form() {
        let ctx = random_transform_context::<f64>(4, 6, 3.0, 1.0, 2.0).unwrap();
        for p in 0..3 {
            for &l in &[0.0, 0.7, 20.0, 1e4] {
                let res = intrig_residual(&ctx, l, p).unwrap();
                assert!(res.relative() < 1e-10, "p {p} lambda {l}: {res:?}");
            }
        }
    }

    #[test]
    fn conkay_telescopes() {
        let ctx = random_transform_context::<f64>(6, 5, 1.0, 1.0, 3.0).unwrap();
        for big_n in [0, 1, 5, 40] {
            assert!(conkay_residual(&ctx, big_n).residual < 1e-12);
        }
    }

    #[test]
    fn weighted_sqrt_converges_monotonically() {
        let ctx = random_transform_context::<f64>(7, 4, 1.0, 1.0, 1.5).unwrap();
        let mut g = rng(70);
        let states: Vec<_> = (0..3)
            .map(|_| {
                let p = random_positive::<f64>(&mut g, 4, 1.0, 10.0);
                let t = p.trace().re;
                p.scale(1.0 / t)
            })
            .collect();
        let short = weasqr_check(&ctx, 20, &states).unwrap();
        let long = weasqr_check(&ctx, 3000, &states).unwrap();
        assert!(short.monotone && long.monotone);
        assert!(
            long.distance < short.distance && long.distance < 1e-3,
            "{}",
            long.distance
        );
        assert!(long.gaps.iter().all(|&g| g >= -1e-12));
    }

    #[test]
    fn envelope_dominates_and_decays() {
        let ctx = random_transform_context::<f64>(9, 5, 1.0, 1.0, 2.0).unwrap();
        let reports: Vec<_> = log_grid(0.5, 1e4, 12)
            .into_iter()
            .map(|l| envelope_check(&ctx, l, 12).unwrap())
            .collect();
        for r in &reports {
            assert!(r.dominated && r.geometric_bound, "{r:?}");
            assert!(r.split_residual < 1e-9, "{}", r.split_residual);
        }
        assert!(envelope_tail_slope(&reports).unwrap() < -1.0);
    }

    #[test]
    fn truncated_error_terms_converge() {
        let ctx = random_transform_context::<f64>(10, 6, 2.0, 1.0, 4.0).unwrap();
        for &l in &[0.5, 3.0, 50.0] {
            let rows = error_term_convergence(&ctx, l, &[1, 2, 4, 8, 16, 64, 256]).unwrap();
            assert!(rows.iter().all(|r| r.within_bound), "{rows:?}");
            assert!(rows.last().unwrap().distance < rows[0].distance);
        }
        assert!(error_term_convergence(&ctx, 1.0, &[0]).is_err());
    }

    #[test]
    fn lambda_zero_error_term_vanishes() {
        let ctx = random_transform_context::<f64>(12, 4, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(ctx.error_term(0.0, None).unwrap().max_abs(), 0.0);
        assert_eq!(ctx.error_term(0.0, Some(3)).unwrap().max_abs(), 0.0);
    }
}
