//! Catalogue of resolvent decay estimates and their power-law fits.

use rayon::prelude::*;
use serde::Serialize;

use super::TransformContext;
use crate::error::{Error, Result};
use crate::matfun::{eig_herm, op_norm, CMat, EigDecomp, HermMatrix};
use crate::scalar::Real;

/// Truncation orders over which the truncated error term is maximized.
pub const TRUNCATION_ORDERS: [usize; 5] = [1, 2, 4, 8, 16];
/// Fits only use grid points with `λ` at least this large.
pub const FIT_LAMBDA_MIN: f64 = 10.0;
/// Allowed excess of a fitted slope over the predicted exponent.
pub const SLOPE_SLACK: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Estimate {
    /// `‖Δ S_λ^{1/2}‖ ≤ √(2r) (1+λ)^{-1/2}`.
    DeltaHalfResolvent,
    /// `‖Δ² S_λ Δ^{1/2}‖ ≲ (1+λ)^{-1}`.
    DeltaSquaredResolvent,
    /// `‖Δ D S_λ Δ^{1/2}‖ ≲ (1+λ)^{-1/2}`.
    DeltaDiracResolvent,
    /// `‖D S_λ Δ² (i+D)^{-1}‖ ≲ (1+λ)^{-1}`.
    DiracResolventSmoothed,
    /// `‖S_λ^{3/2} Δ³ (i+D)^{-1}‖ ≲ (1+λ)^{-9/8}`.
    ResolventThreeHalves,
    /// `‖Δ² L_λ‖ ≲ (1+λ)^{-1/2}`.
    ErrorTerm,
    /// `sup_m ‖Δ² L_λ(m) (i+D)^{-1}‖ ≲ (1+λ)^{-1/8}`.
    TruncatedErrorTerm,
}

impl Estimate {
    pub const ALL: [Estimate; 7] = [
        Estimate::DeltaHalfResolvent,
        Estimate::DeltaSquaredResolvent,
        Estimate::DeltaDiracResolvent,
        Estimate::DiracResolventSmoothed,
        Estimate::ResolventThreeHalves,
        Estimate::ErrorTerm,
        Estimate::TruncatedErrorTerm,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Estimate::DeltaHalfResolvent => "delta-half-resolvent",
            Estimate::DeltaSquaredResolvent => "delta-squared-resolvent",
            Estimate::DeltaDiracResolvent => "delta-dirac-resolvent",
            Estimate::DiracResolventSmoothed => "dirac-resolvent-smoothed",
            Estimate::ResolventThreeHalves => "resolvent-three-halves",
            Estimate::ErrorTerm => "error-term",
            Estimate::TruncatedErrorTerm => "truncated-error-term",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.id() == id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimate '{id}'")))
    }

    /// Predicted power of `(1+λ)`.
    pub fn exponent(self) -> f64 {
        match self {
            Estimate::DeltaHalfResolvent | Estimate::DeltaDiracResolvent | Estimate::ErrorTerm => {
                -0.5
            }
            Estimate::DeltaSquaredResolvent | Estimate::DiracResolventSmoothed => -1.0,
            Estimate::ResolventThreeHalves => -1.125,
            Estimate::TruncatedErrorTerm => -0.125,
        }
    }

    /// Explicit bound, when the constant is known.
    pub fn explicit_bound(self, r: f64, lambda: f64) -> Option<f64> {
        match self {
            Estimate::DeltaHalfResolvent => Some((2.0 * r).sqrt() / (1.0 + lambda).sqrt()),
            _ => None,
        }
    }

    /// The estimated norm at `λ`.
    pub fn norm<T: Real>(self, ctx: &TransformContext<T>, lambda: T) -> Result<T> {
        let s_inv = modular_resolvent_inverse(ctx, lambda)?;
        let s_pow = |p: T| -> CMat<T> {
            s_inv
                .apply(|l| l.powf(-p))
                .expect("positive spectrum")
                .into_mat()
        };
        let delta = ctx.delta.as_mat();
        let half = ctx.delta_power(T::lit(0.5));
        let v = match self {
            Estimate::DeltaHalfResolvent => op_norm(&delta.matmul(&s_pow(T::lit(0.5)))),
            Estimate::DeltaSquaredResolvent => op_norm(
                &delta
                    .matmul(delta)
                    .matmul(&s_pow(T::one()))
                    .matmul(half.as_mat()),
            ),
            Estimate::DeltaDiracResolvent => op_norm(
                &delta
                    .matmul(&ctx.d)
                    .matmul(&s_pow(T::one()))
                    .matmul(half.as_mat()),
            ),
            Estimate::DiracResolventSmoothed => op_norm(
                &ctx.d
                    .matmul(&s_pow(T::one()))
                    .matmul(delta)
                    .matmul(delta)
                    .matmul(&ctx.resolvent_i()),
            ),
            Estimate::ResolventThreeHalves => op_norm(
                &s_pow(T::lit(1.5))
                    .matmul(ctx.delta_cubed())
                    .matmul(&ctx.resolvent_i()),
            ),
            Estimate::ErrorTerm => {
                op_norm(&delta.matmul(delta).matmul(&ctx.error_term(lambda, None)?))
            }
            Estimate::TruncatedErrorTerm => {
                let left = delta.matmul(delta);
                let right = ctx.resolvent_i();
                let mut best = T::zero();
                for m in TRUNCATION_ORDERS {
                    best = best.max(op_norm(
                        &left
                            .matmul(&ctx.error_term(lambda, Some(m))?)
                            .matmul(&right),
                    ));
                }
                best
            }
        };
        Ok(v)
    }
}

fn modular_resolvent_inverse<T: Real>(
    ctx: &TransformContext<T>,
    lambda: T,
) -> Result<EigDecomp<T>> {
    let delta2 = ctx.delta.matmul(&ctx.delta).scale_re(lambda / ctx.r);
    let m = &(&delta2 + ctx.d_squared()) + &CMat::identity(ctx.dim());
    eig_herm(&HermMatrix::from_hermitian_part(&m))
}

/// Least-squares power-law fit of one sweep.
#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub estimate: String,
    pub exponent: f64,
    pub lambdas: Vec<f64>,
    pub norms: Vec<f64>,
    /// Explicit bound when known, otherwise `C (1+λ)^{exponent}` with `C`
    /// calibrated at the first fitted grid point.
    pub bounds: Vec<f64>,
    pub pointwise: Vec<bool>,
    /// Fitted power of `(1+λ)`; `None` when the sweep vanishes identically.
    pub slope: Option<f64>,
    /// Fitted prefactor `exp(intercept)`.
    pub constant: f64,
    /// Root-mean-square residual of the log-log fit.
    pub fit_residual: f64,
    pub slope_passed: bool,
    pub bound_passed: bool,
    pub passed: bool,
}

/// Indices used by the fit: `λ ≥ 10` and the upper half of the grid.
pub fn fit_window(lambdas: &[f64]) -> Vec<usize> {
    let start = lambdas.len() / 2;
    (start..lambdas.len())
        .filter(|&i| lambdas[i] >= FIT_LAMBDA_MIN)
        .collect()
}

/// Slope, intercept and RMS residual of `log y` against `log(1 + λ)`; only
/// strictly positive samples enter. `None` with fewer than two of them.
pub fn fit_decay(lambdas: &[f64], norms: &[f64]) -> Option<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = lambdas
        .iter()
        .zip(norms)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&l, &y)| ((1.0 + l).ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Some((slope, intercept, rms))
}

/// Evaluate one estimate on `lambda_grid` (ascending) and fit its decay.
pub fn appendix_sweep<T: Real>(
    ctx: &TransformContext<T>,
    lambda_grid: &[f64],
    which: Estimate,
) -> Result<DecayFit> {
    if lambda_grid.is_empty()
        || lambda_grid.windows(2).any(|w| w[0] >= w[1])
        || lambda_grid.iter().any(|&l| !(l >= 0.0))
    {
        return Err(Error::InvalidArgument(
            "lambda grid must be non-empty, ascending and non-negative".into(),
        ));
    }
    let norms: Vec<f64> = lambda_grid
        .par_iter()
        .map(|&l| which.norm(ctx, T::lit(l)).map(|v| v.as_f64()))
        .collect::<Result<_>>()?;
    let r = ctx.r.as_f64();
    let explicit = which.explicit_bound(r, 0.0).map(|_| {
        lambda_grid
            .iter()
            .map(|&l| which.explicit_bound(r, l).expect("explicit bound"))
            .collect()
    });
    Ok(fit_sweep(
        which.id(),
        which.exponent(),
        lambda_grid.to_vec(),
        norms,
        explicit,
    ))
}

/// Fits a sweep against the predicted `exponent`. Without `explicit`
/// bounds the pointwise column uses `C (1+λ)^{exponent}` calibrated at the
/// first grid point with `λ ≥ 10` and does not affect `passed`.
pub fn fit_sweep(
    id: &str,
    exponent: f64,
    lambdas: Vec<f64>,
    norms: Vec<f64>,
    explicit: Option<Vec<f64>>,
) -> DecayFit {
    let window = fit_window(&lambdas);
    let wl: Vec<f64> = window.iter().map(|&i| lambdas[i]).collect();
    let wn: Vec<f64> = window.iter().map(|&i| norms[i]).collect();
    let fit = fit_decay(&wl, &wn);

    let calibration = lambdas
        .iter()
        .zip(&norms)
        .find(|(&l, _)| l >= FIT_LAMBDA_MIN)
        .map(|(&l, &n)| n * (1.0 + l).powf(-exponent))
        .unwrap_or(0.0);
    let has_explicit = explicit.is_some();
    let bounds: Vec<f64> = explicit.unwrap_or_else(|| {
        lambdas
            .iter()
            .map(|&l| calibration * (1.0 + l).powf(exponent))
            .collect()
    });
    let pointwise: Vec<bool> = norms
        .iter()
        .zip(&bounds)
        .map(|(&n, &b)| n <= b * (1.0 + 1e-9))
        .collect();

    let (slope, constant, fit_residual) = match fit {
        Some((s, c, res)) => (Some(s), c.exp(), res),
        None => (None, 0.0, 0.0),
    };
    let vanishes = wn.iter().all(|&n| n == 0.0);
    let slope_passed = match slope {
        Some(s) => s <= exponent + SLOPE_SLACK,
        None => vanishes,
    };
    let bound_passed = !has_explicit || pointwise.iter().all(|&p| p);
    DecayFit {
        estimate: id.to_string(),
        exponent,
        lambdas,
        norms,
        bounds,
        pointwise,
        slope,
        constant,
        fit_residual,
        slope_passed,
        bound_passed,
        passed: slope_passed && bound_passed,
    }
}

/// `count` points logarithmically spaced on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}
