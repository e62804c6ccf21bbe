//! Adaptive composite Gauss–Legendre quadrature of matrix-valued integrands
//! over the half line.
//!
//! The integral over `λ ∈ (0, ∞)` is pulled back to `t ∈ (0, 1)` by
//! `λ = t² / (1 - t)²`, which turns a `λ^{-1/2}` weight at the origin and a
//! `λ^{-3/2}` tail into a bounded integrand.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matfun::CMat;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Initial number of equal panels on `(0, 1)`.
    pub panels: usize,
    /// Gauss–Legendre order per panel.
    pub points_per_panel: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Cap on integrand evaluations.
    pub max_evals: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            panels: 8,
            points_per_panel: 10,
            abs_tol: 1e-12,
            rel_tol: 1e-8,
            max_evals: 1 << 20,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.panels < 4 || self.points_per_panel == 0 {
            return Err(Error::InvalidArgument(format!(
                "quadrature needs at least 4 panels and 1 point, got {} and {}",
                self.panels, self.points_per_panel
            )));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "quadrature tolerances must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Tolerance actually met: `max(abs_tol, rel_tol · ‖I‖_F)`.
    pub fn target(&self, integral_norm: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * integral_norm)
    }
}

/// Value and bookkeeping of one adaptive integration.
#[derive(Clone, Debug)]
pub struct Quadrature<T: Real> {
    pub value: CMat<T>,
    /// Sum over panels of `‖coarse - refined‖_F`.
    pub error_estimate: f64,
    pub evaluations: usize,
    pub panels: usize,
}

/// `λ(t) = t² / (1 - t)²` and `dλ/dt = 2t / (1 - t)³`.
pub fn half_line_map<T: Real>(t: T) -> (T, T) {
    let s = T::one() - t;
    (t * t / (s * s), T::lit(2.0) * t / (s * s * s))
}

struct Panel<T: Real> {
    a: f64,
    b: f64,
    whole: CMat<T>,
    left: CMat<T>,
    right: CMat<T>,
}

impl<T: Real> Panel<T> {
    fn refined(&self) -> CMat<T> {
        &self.left + &self.right
    }

    fn error(&self) -> f64 {
        (&self.whole - &self.refined()).norm_fro().as_f64()
    }
}

struct Rule<'a, T: Real, F> {
    pairs: Vec<(f64, f64)>,
    integrand: &'a F,
    shape: (usize, usize),
    evaluations: usize,
    _marker: std::marker::PhantomData<T>,
}

impl<'a, T, F> Rule<'a, T, F>
where
    T: Real,
    F: Fn(T) -> Result<CMat<T>> + Sync,
{
    /// Gauss–Legendre sum over `[a, b] ⊂ (0, 1)` of `f(λ(t)) λ'(t)`.
    fn panel(&mut self, a: f64, b: f64) -> Result<CMat<T>> {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let terms: Vec<Result<CMat<T>>> = self
            .pairs
            .par_iter()
            .map(|&(x, w)| {
                let (lambda, jac) = half_line_map(T::lit(mid + half * x));
                let v = (self.integrand)(lambda)?;
                Ok(v.scale_re(T::lit(w * half) * jac))
            })
            .collect();
        self.evaluations += self.pairs.len();
        let mut acc = CMat::zeros(self.shape.0, self.shape.1);
        for t in terms {
            let t = t?;
            if t.shape() != self.shape {
                return Err(Error::DimensionMismatch(format!(
                    "integrand shape {:?} vs {:?}",
                    t.shape(),
                    self.shape
                )));
            }
            acc = &acc + &t;
        }
        Ok(acc)
    }

    fn split(&mut self, a: f64, b: f64, whole: CMat<T>) -> Result<Panel<T>> {
        let m = 0.5 * (a + b);
        let left = self.panel(a, m)?;
        let right = self.panel(m, b)?;
        Ok(Panel {
            a,
            b,
            whole,
            left,
            right,
        })
    }
}

/// `∫₀^∞ f(λ) dλ` for a matrix-valued `f` of fixed shape `shape`.
///
/// Panels are bisected while the summed coarse/refined discrepancy exceeds
/// [`QuadratureSpec::target`]; a panel is split when its own discrepancy
/// exceeds its length share of the target. Panel contributions are summed
/// in positional order, so the result does not depend on thread count.
pub fn integrate_half_line<T, F>(
    f: F,
    shape: (usize, usize),
    spec: &QuadratureSpec,
) -> Result<Quadrature<T>>
where
    T: Real,
    F: Fn(T) -> Result<CMat<T>> + Sync,
{
    spec.validate()?;
    let order = NonZeroUsize::new(spec.points_per_panel).expect("validated order");
    let pairs = GaussLegendre::new(order).as_node_weight_pairs().to_vec();
    let mut rule = Rule {
        pairs,
        integrand: &f,
        shape,
        evaluations: 0,
        _marker: std::marker::PhantomData,
    };

    let width = 1.0 / spec.panels as f64;
    let mut panels = Vec::with_capacity(spec.panels);
    for i in 0..spec.panels {
        let (a, b) = (i as f64 * width, (i + 1) as f64 * width);
        let whole = rule.panel(a, b)?;
        panels.push(rule.split(a, b, whole)?);
    }

    loop {
        let value = panels
            .iter()
            .fold(CMat::zeros(shape.0, shape.1), |acc, p| &acc + &p.refined());
        let errors: Vec<f64> = panels.iter().map(Panel::error).collect();
        let total: f64 = errors.iter().sum();
        let target = spec.target(value.norm_fro().as_f64());
        if total <= target {
            return Ok(Quadrature {
                value,
                error_estimate: total,
                evaluations: rule.evaluations,
                panels: panels.len(),
            });
        }
        if !total.is_finite() || !value.is_finite() {
            return Err(Error::QuadratureNoConvergence {
                evaluations: rule.evaluations,
                estimate: total,
            });
        }
        let mut next = Vec::with_capacity(panels.len() * 2);
        let mut split_any = false;
        for (p, err) in panels.into_iter().zip(errors) {
            if err > target * (p.b - p.a) {
                split_any = true;
                let m = 0.5 * (p.a + p.b);
                let Panel {
                    a, b, left, right, ..
                } = p;
                next.push(rule.split(a, m, left)?);
                next.push(rule.split(m, b, right)?);
            } else {
                next.push(p);
            }
            if rule.evaluations > spec.max_evals {
                return Err(Error::QuadratureNoConvergence {
                    evaluations: rule.evaluations,
                    estimate: total,
                });
            }
        }
        if !split_any {
            return Err(Error::QuadratureNoConvergence {
                evaluations: rule.evaluations,
                estimate: total,
            });
        }
        panels = next;
    }
}

/// Scalar convenience wrapper around [`integrate_half_line`].
pub fn integrate_half_line_scalar<T, F>(f: F, spec: &QuadratureSpec) -> Result<(T, f64)>
where
    T: Real,
    F: Fn(T) -> T + Sync,
{
    let q = integrate_half_line(|l| Ok(CMat::from_real_diag(&[f(l)])), (1, 1), spec)?;
    Ok((q.value[(0, 0)].re, q.error_estimate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_line_map_endpoints() {
        let (l, j) = half_line_map(0.5f64);
        assert!((l - 1.0).abs() < 1e-15);
        assert!((j - 8.0).abs() < 1e-14);
    }

    #[test]
    fn arcsine_weight_gives_pi() {
        let (v, _) = integrate_half_line_scalar(
            |l: f64| 1.0 / (l.sqrt() * (1.0 + l)),
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-9, "{v}");
    }

    #[test]
    fn exponential_integrand() {
        let (v, _) =
            integrate_half_line_scalar(|l: f64| (-l).exp(), &QuadratureSpec::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn rejects_few_panels() {
        let spec = QuadratureSpec {
            panels: 2,
            ..Default::default()
        };
        assert!(matches!(
            integrate_half_line_scalar(|l: f64| l, &spec),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn divergent_integrand_reports_no_convergence() {
        let spec = QuadratureSpec {
            max_evals: 5000,
            ..Default::default()
        };
        let r = integrate_half_line_scalar(|l: f64| 1.0 / (1.0 + l).sqrt(), &spec);
        assert!(
            matches!(r, Err(Error::QuadratureNoConvergence { .. })),
            "{r:?}"
        );
    }

    #[test]
    fn refinement_is_stable() {
        let f = |l: f64| 1.0 / (l.sqrt() * (2.0 + l) * (1.0 + l));
        let coarse = QuadratureSpec::default();
        let fine = QuadratureSpec {
            panels: 16,
            ..Default::default()
        };
        let (a, _) = integrate_half_line_scalar(f, &coarse).unwrap();
        let (b, _) = integrate_half_line_scalar(f, &fine).unwrap();
        assert!((a - b).abs() <= coarse.rel_tol * a.abs() * 10.0, "{a} {b}");
    }
}
