//! Dirac operators on a finite union of intervals `U = ∪ I_k`.
//!
//! With smooth bumps `f_k` supported on the closures of the `I_k` the
//! operator `D_Δ = Σ_k M_{f_k} D M_{f_k}` discretizes
//! `i Σ f_k² d/dx + i Σ f_k f_k'` on a periodic grid enclosing `U`, and
//! `Δ = Σ_k f_k²`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert_module::HilbertModule;
use crate::kk_product::{assemble_from_creations, multiplication_creations};
use crate::matfun::{eig_herm, eigvals_herm, op_norm, CMat, HermMatrix};
use crate::modular_cycle::{check_cycle, CheckOptions, CycleAlgebra, ModularCycle};
use crate::report::{ConditionResult, CycleReport, IdentityResidual};
use crate::scalar::{cre, cx, C};

/// Fraction of the sup-norm budget `1/k` a bump is allowed to use.
pub const BUMP_MARGIN: f64 = 0.99;
/// Padding on each side of the enclosing box, relative to the span of `U`.
pub const BOX_PADDING: f64 = 0.1;
/// Grid points with `Δ < SUPPORT_CUTOFF · ‖Δ‖` are left out of the cycle.
pub const SUPPORT_CUTOFF: f64 = 1e-10;
/// Samples per interval used to calibrate the derivative sup-norm.
const CALIBRATION_SAMPLES: usize = 20_001;

/// Finite family of bounded open intervals `(a_k, b_k)`; overlaps allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalFamily {
    pub intervals: Vec<(f64, f64)>,
}

impl IntervalFamily {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidArgument(format!(
                    "({a}, {b}) is not a bounded open interval"
                )));
            }
        }
        Ok(Self { intervals })
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// True when the intervals are pairwise disjoint.
    pub fn is_disjoint(&self) -> bool {
        let mut sorted = self.intervals.clone();
        sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
        sorted.windows(2).all(|w| w[0].1 <= w[1].0)
    }
}

/// Uniform periodic grid `x_j = start + j h`, `j = 0..n`, of length `n h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridBox {
    pub start: f64,
    pub length: f64,
    pub n: usize,
}

impl GridBox {
    pub fn new(start: f64, length: f64, n: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite() && start.is_finite()) || n < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid of length {length} with {n} points"
            )));
        }
        Ok(Self { start, length, n })
    }

    /// Box around the family with [`BOX_PADDING`] on both sides.
    pub fn enclosing(fam: &IntervalFamily, n: usize) -> Result<Self> {
        if fam.is_empty() {
            return Err(Error::InvalidArgument(
                "an empty family has no enclosing box".into(),
            ));
        }
        let lo = fam
            .intervals
            .iter()
            .map(|i| i.0)
            .fold(f64::INFINITY, f64::min);
        let hi = fam
            .intervals
            .iter()
            .map(|i| i.1)
            .fold(f64::NEG_INFINITY, f64::max);
        let pad = BOX_PADDING * (hi - lo);
        Self::new(lo - pad, hi - lo + 2.0 * pad, n)
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| self.start + j as f64 * self.h())
            .collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.points().into_iter().map(f).collect()
    }
}

/// `f(x) = scale · exp(4/ℓ² - 1/((x-a)(b-x)))` on `(a, b)`, zero outside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bump {
    pub a: f64,
    pub b: f64,
    /// Peak value, attained at the midpoint.
    pub scale: f64,
}

impl Bump {
    fn exponent(&self, x: f64) -> Option<(f64, f64)> {
        if x <= self.a || x >= self.b {
            return None;
        }
        let len = self.b - self.a;
        let t = (x - self.a) * (self.b - x);
        Some((4.0 / (len * len) - 1.0 / t, t))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.exponent(x).map_or(0.0, |(e, _)| self.scale * e.exp())
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.exponent(x).map_or(0.0, |(e, t)| {
            self.scale * e.exp() * (self.a + self.b - 2.0 * x) / (t * t)
        })
    }

    /// Unscaled sup of `|f'|` relative to the peak, from dense sampling.
    fn derivative_ratio(a: f64, b: f64) -> f64 {
        let unit = Bump { a, b, scale: 1.0 };
        let step = (b - a) / (CALIBRATION_SAMPLES - 1) as f64;
        (1..CALIBRATION_SAMPLES - 1)
            .map(|i| unit.derivative(a + i as f64 * step).abs())
            .fold(0.0, f64::max)
    }
}

/// Bumps with `sup|f_k| + sup|f_k'| = 0.99 / k` (`k` counted from 1).
/// Fails when an interval is shorter than four grid steps `h`.
pub fn make_bumps(fam: &IntervalFamily, h: f64) -> Result<Vec<Bump>> {
    fam.intervals
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            if b - a < 4.0 * h {
                return Err(Error::DegenerateInterval { a, b, h });
            }
            let budget = BUMP_MARGIN / (i + 1) as f64;
            let scale = budget / (1.0 + Bump::derivative_ratio(a, b));
            Ok(Bump { a, b, scale })
        })
        .collect()
}

/// Discretization of `d/dx` used for the flat Dirac operator `i d/dx`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiracVariant {
    /// `(i / 2h)(S₊ - S₋)` with `(S₊ u)_j = u_{j+1}`.
    Fd,
    /// Spectral derivative with the Nyquist mode set to zero.
    Fourier,
}

/// `i d/dx` on the periodic grid.
pub fn build_dirac(grid: &GridBox, variant: DiracVariant) -> HermMatrix<f64> {
    let n = grid.n;
    let h = grid.h();
    // Circulant: entry (j, l) depends on (l - j) mod n.
    let mut stencil = vec![C::<f64>::new(0.0, 0.0); n];
    match variant {
        DiracVariant::Fd => {
            stencil[1 % n] += cx(0.0, 0.5 / h);
            stencil[n - 1] += cx(0.0, -0.5 / h);
        }
        DiracVariant::Fourier => {
            let half = n.div_ceil(2);
            for (s, entry) in stencil.iter_mut().enumerate() {
                // (1/n) Σ_m (-2π m / L) e^{-2π i m s / n} over |m| < n/2.
                let acc: f64 = (1..half)
                    .filter(|&m| 2 * m != n)
                    .map(|m| m as f64 * (2.0 * PI * (m * s) as f64 / n as f64).sin())
                    .sum();
                *entry = cx(0.0, 2.0 * (2.0 * PI / grid.length) * acc / n as f64);
            }
        }
    }
    let m = CMat::from_fn(n, n, |j, l| stencil[(l + n - j) % n]);
    HermMatrix::from_hermitian_part(&m)
}

/// Discretized `D_Δ` with its ingredients.
#[derive(Clone, Debug)]
pub struct GridOperator {
    pub grid: GridBox,
    pub variant: DiracVariant,
    pub d_grid: HermMatrix<f64>,
    /// `f_k(x_j)` per interval.
    pub samples: Vec<Vec<f64>>,
    /// `f_k'(x_j)` per interval.
    pub derivative_samples: Vec<Vec<f64>>,
    /// Sup-norm budgets `1/k` (infinite in test mode).
    pub budgets: Vec<f64>,
    pub d_delta: HermMatrix<f64>,
    /// Diagonal `Σ_k f_k(x_j)²`.
    pub delta: Vec<f64>,
}

/// `D_Δ` for the bumps of `fam` on `grid`.
pub fn build_d_delta(
    fam: &IntervalFamily,
    grid: &GridBox,
    variant: DiracVariant,
) -> Result<GridOperator> {
    let bumps = make_bumps(fam, grid.h())?;
    let samples = bumps.iter().map(|b| grid.sample(|x| b.value(x))).collect();
    let derivative_samples = bumps
        .iter()
        .map(|b| grid.sample(|x| b.derivative(x)))
        .collect();
    let budgets = (1..=bumps.len()).map(|k| 1.0 / k as f64).collect();
    grid_operator_from_samples(grid, variant, samples, derivative_samples, budgets)
}

/// `D_Δ` from explicit samples; lets tests use `f ≡ 1` on the whole box.
pub fn grid_operator_from_samples(
    grid: &GridBox,
    variant: DiracVariant,
    samples: Vec<Vec<f64>>,
    derivative_samples: Vec<Vec<f64>>,
    budgets: Vec<f64>,
) -> Result<GridOperator> {
    let n = grid.n;
    if samples.len() != derivative_samples.len()
        || samples.len() != budgets.len()
        || samples
            .iter()
            .chain(&derivative_samples)
            .any(|s| s.len() != n)
    {
        return Err(Error::DimensionMismatch(
            "samples do not match the grid".into(),
        ));
    }
    let d_grid = build_dirac(grid, variant);
    let mut d_delta = CMat::zeros(n, n);
    let mut delta = vec![0.0; n];
    for f in &samples {
        let weights: Vec<C<f64>> = f.iter().map(|&v| cre(v)).collect();
        d_delta = &d_delta + &d_grid.scale_rows(&weights).scale_cols(&weights);
        for (acc, v) in delta.iter_mut().zip(f) {
            *acc += v * v;
        }
    }
    let d_delta = HermMatrix::new(d_delta)?;
    Ok(GridOperator {
        grid: *grid,
        variant,
        d_grid,
        samples,
        derivative_samples,
        budgets,
        d_delta,
        delta,
    })
}

impl GridOperator {
    pub fn dim(&self) -> usize {
        self.grid.n
    }

    /// Grid indices with `Δ ≥ SUPPORT_CUTOFF · max Δ`.
    pub fn support(&self) -> Vec<usize> {
        let top = self.delta.iter().cloned().fold(0.0, f64::max);
        (0..self.dim())
            .filter(|&j| top > 0.0 && self.delta[j] >= SUPPORT_CUTOFF * top)
            .collect()
    }

    /// `i Σ f² D_grid ψ + i Σ f f' ψ`, the stencil of the unsymmetrized form.
    pub fn direct_stencil(&self, psi: &[f64]) -> Vec<C<f64>> {
        let psi_c: Vec<C<f64>> = psi.iter().map(|&v| cre(v)).collect();
        let dpsi = self.d_grid.mul_vec(&psi_c);
        (0..self.dim())
            .map(|j| {
                let ffp: f64 = self
                    .samples
                    .iter()
                    .zip(&self.derivative_samples)
                    .map(|(f, g)| f[j] * g[j])
                    .sum();
                dpsi[j] * self.delta[j] + cx(0.0, ffp * psi[j])
            })
            .collect()
    }

    /// `‖D_Δ ψ - direct_stencil(ψ)‖` in the grid `L²` norm `(h Σ |v_j|²)^{1/2}`.
    pub fn stencil_residual(&self, psi: &[f64]) -> f64 {
        let psi_c: Vec<C<f64>> = psi.iter().map(|&v| cre(v)).collect();
        let sym = self.d_delta.mul_vec(&psi_c);
        let direct = self.direct_stencil(psi);
        let sq: f64 = sym
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (self.grid.h() * sq).sqrt()
    }

    /// Largest `max(Δ_j - Σ_k budget_k², 0)`.
    pub fn delta_budget_excess(&self) -> f64 {
        let bound: f64 = self.budgets.iter().map(|b| b * b).sum();
        self.delta
            .iter()
            .map(|d| (d - bound).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Largest sampled `sup|f_k| + sup|f_k'| - budget_k`.
    pub fn bump_budget_excess(&self) -> f64 {
        self.samples
            .iter()
            .zip(&self.derivative_samples)
            .zip(&self.budgets)
            .map(|((f, g), b)| {
                let s0 = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
                let s1 = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
                s0 + s1 - b
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Multiplication operator by grid samples of `a`.
    pub fn multiplication(&self, a: &[f64]) -> CMat<f64> {
        CMat::from_real_diag(a)
    }

    /// `‖[D_Δ, M_a]‖`.
    pub fn commutator_norm(&self, a: &[f64]) -> f64 {
        let support = self.support();
        if support.is_empty() {
            return 0.0;
        }
        // The commutator vanishes off the support of Δ.
        let dd = self.d_delta.select(&support, &support);
        let weights: Vec<C<f64>> = support.iter().map(|&j| cre(a[j])).collect();
        let comm = &dd.scale_cols(&weights) - &dd.scale_rows(&weights);
        op_norm(&comm)
    }

    /// The cycle `(ℓ²(Z), D_Δ|_Z, Δ|_Z)` on the support `Z` with the given
    /// multiplication operators.
    pub fn cycle(&self, algebra: &[Vec<f64>]) -> Result<ModularCycle<f64>> {
        let support = self.support();
        if support.is_empty() {
            return Err(Error::InvalidArgument("Delta vanishes on the grid".into()));
        }
        let d = HermMatrix::from_hermitian_part(&self.d_delta.select(&support, &support));
        let delta =
            HermMatrix::from_real_diag(&support.iter().map(|&j| self.delta[j]).collect::<Vec<_>>());
        let elems = algebra
            .iter()
            .map(|a| CMat::from_real_diag(&support.iter().map(|&j| a[j]).collect::<Vec<_>>()))
            .collect();
        ModularCycle::new(
            HilbertModule::hilbert_space(support.len()),
            d,
            delta,
            CycleAlgebra::Elements(elems),
            None,
        )
    }
}

/// Cycle conditions for `D_Δ` on the support of `Δ`, plus the straight
/// commutator norms `‖[D_Δ, M_a]‖` as an extra condition.
pub fn spectral_triple_check(
    g: &GridOperator,
    algebra: &[Vec<f64>],
    n_approx: usize,
) -> Result<CycleReport> {
    let cycle = g.cycle(algebra)?;
    let mut report = check_cycle(&cycle, &[], n_approx, &CheckOptions::default())?;
    let norms: Vec<f64> = algebra.iter().map(|a| g.commutator_norm(a)).collect();
    let top = norms.iter().cloned().fold(0.0, f64::max);
    report.push(
        ConditionResult::new("straight_commutators", top.is_finite(), top)
            .with_values(norms)
            .with_note("||[D_Delta, M_a]|| per test function"),
    );
    Ok(report)
}

/// `‖[D_Δ, M_a]‖` across grid sizes.
pub fn commutator_norms(
    fam: &IntervalFamily,
    variant: DiracVariant,
    a: impl Fn(f64) -> f64,
    sizes: &[usize],
) -> Result<Vec<f64>> {
    sizes
        .iter()
        .map(|&n| {
            let grid = GridBox::enclosing(fam, n)?;
            let g = build_d_delta(fam, &grid, variant)?;
            Ok(g.commutator_norm(&grid.sample(&a)))
        })
        .collect()
}

/// Stencil residuals at `n` and `2n` for a smooth periodic `ψ`, and their ratio.
#[derive(Clone, Debug, Serialize)]
pub struct Refinement {
    pub n: usize,
    pub coarse: f64,
    pub fine: f64,
    pub ratio: f64,
}

/// Smooth periodic test function `exp(sin(2π(x - x₀)/L))` on the box.
pub fn periodic_test_function(grid: &GridBox) -> Vec<f64> {
    grid.sample(|x| (2.0 * PI * (x - grid.start) / grid.length).sin().exp())
}

pub fn refinement_ratio(
    fam: &IntervalFamily,
    variant: DiracVariant,
    n: usize,
) -> Result<Refinement> {
    let residual = |m: usize| -> Result<f64> {
        let grid = GridBox::enclosing(fam, m)?;
        let g = build_d_delta(fam, &grid, variant)?;
        Ok(g.stencil_residual(&periodic_test_function(&grid)))
    };
    let coarse = residual(n)?;
    let fine = residual(2 * n)?;
    Ok(Refinement {
        n,
        coarse,
        fine,
        ratio: coarse / fine,
    })
}

/// Kasparov-product assembly `Σ T_f D T_f^*` for the multiplication module
/// against the direct `D_Δ`, on the support and off it.
#[derive(Clone, Debug, Serialize)]
pub struct CrossValidation {
    pub support_size: usize,
    pub d_delta: IdentityResidual,
    pub delta: IdentityResidual,
    /// Largest entry of the direct `D_Δ` outside the support block.
    pub off_support: f64,
}

pub fn cross_validate(g: &GridOperator) -> Result<CrossValidation> {
    let (support, creations) = multiplication_creations(&g.samples, 0.0)?;
    if support.is_empty() {
        return Err(Error::InvalidArgument(
            "all bumps vanish on the grid".into(),
        ));
    }
    let (delta_kk, d_kk) = assemble_from_creations(&creations, &g.d_grid, None)?;
    let direct = g.d_delta.select(&support, &support);
    let delta_direct =
        CMat::from_real_diag(&support.iter().map(|&j| g.delta[j]).collect::<Vec<_>>());
    let mut inside = vec![false; g.dim()];
    for &j in &support {
        inside[j] = true;
    }
    let mut off_support = 0.0f64;
    for i in 0..g.dim() {
        for j in 0..g.dim() {
            if !(inside[i] && inside[j]) {
                off_support = off_support.max(g.d_delta[(i, j)].norm());
            }
        }
    }
    Ok(CrossValidation {
        support_size: support.len(),
        d_delta: IdentityResidual::from_mats("kk_assembly", d_kk.as_mat(), &direct, None),
        delta: IdentityResidual::from_mats("kk_delta", delta_kk.as_mat(), &delta_direct, None),
        off_support,
    })
}

/// Sorted eigenvalues of `D_Δ` and the counting function
/// `N(t) = #{μ : |μ| ≤ t}` at each `|μ|`.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub counting: Vec<(f64, usize)>,
}

impl SpectrumReport {
    /// `index,eigenvalue` rows.
    pub fn spectrum_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue\n");
        for (i, v) in self.eigenvalues.iter().enumerate() {
            out.push_str(&format!("{i},{v:.16e}\n"));
        }
        out
    }

    /// `threshold,count` rows.
    pub fn counting_csv(&self) -> String {
        let mut out = String::from("threshold,count\n");
        for (t, c) in &self.counting {
            out.push_str(&format!("{t:.16e},{c}\n"));
        }
        out
    }

    /// `max_i |μ_i + μ_{n-1-i}|`, zero for a spectrum symmetric about 0.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.eigenvalues.len();
        (0..n)
            .map(|i| (self.eigenvalues[i] + self.eigenvalues[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }
}

pub fn spectrum_report(g: &GridOperator) -> Result<SpectrumReport> {
    let eigenvalues = eigvals_herm(&g.d_delta)?;
    let mut abs: Vec<f64> = eigenvalues.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mut counting: Vec<(f64, usize)> = Vec::with_capacity(abs.len());
    for (i, &t) in abs.iter().enumerate() {
        match counting.last_mut() {
            Some(last) if last.0 == t => last.1 = i + 1,
            _ => counting.push((t, i + 1)),
        }
    }
    Ok(SpectrumReport {
        eigenvalues,
        counting,
    })
}

/// Eigenvalues of each diagonal block of `D_Δ` over the per-interval supports,
/// merged and sorted; equals the full spectrum for disjoint supports when
/// the grid points outside every support contribute zeros.
pub fn block_spectrum(g: &GridOperator) -> Result<Vec<f64>> {
    let mut all = Vec::with_capacity(g.dim());
    let mut covered = vec![false; g.dim()];
    for f in &g.samples {
        let block: Vec<usize> = (0..g.dim()).filter(|&j| f[j] != 0.0).collect();
        for &j in &block {
            covered[j] = true;
        }
        if !block.is_empty() {
            let m = HermMatrix::from_hermitian_part(&g.d_delta.select(&block, &block));
            all.extend(eig_herm(&m)?.values);
        }
    }
    all.extend(std::iter::repeat_n(
        0.0,
        covered.iter().filter(|c| !**c).count(),
    ));
    all.sort_by(f64::total_cmp);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_intervals() -> IntervalFamily {
        IntervalFamily::new(vec![(0.0, 1.0), (1.5, 2.5)]).unwrap()
    }

    #[test]
    fn bump_is_symmetric_and_supported_on_the_closure() {
        let b = make_bumps(&IntervalFamily::new(vec![(0.0, 1.0)]).unwrap(), 0.01).unwrap()[0];
        for x in [0.1, 0.25, 0.4, 0.49] {
            assert!((b.value(x) - b.value(1.0 - x)).abs() < 1e-15);
        }
        assert_eq!(b.value(0.0), 0.0);
        assert_eq!(b.value(1.0), 0.0);
        assert_eq!(b.value(-0.3), 0.0);
        assert!(b.value(1e-3) >= 0.0 && b.value(0.5) > 0.0);
    }

    #[test]
    fn bumps_respect_the_budget_on_a_fine_grid() {
        let fam = IntervalFamily::new(vec![(0.0, 1.0), (1.2, 1.5), (2.0, 2.1)]).unwrap();
        for (k, b) in make_bumps(&fam, 1e-3).unwrap().iter().enumerate() {
            // Finite-difference derivative on an independent grid.
            let m = 100_000;
            let step = (b.b - b.a) / m as f64;
            let xs: Vec<f64> = (0..=m).map(|i| b.a + i as f64 * step).collect();
            let vals: Vec<f64> = xs.iter().map(|&x| b.value(x)).collect();
            let s0 = vals.iter().cloned().fold(0.0, f64::max);
            let s1 = vals
                .windows(2)
                .map(|w| ((w[1] - w[0]) / step).abs())
                .fold(0.0, f64::max);
            let budget = 1.0 / (k + 1) as f64;
            assert!(s0 + s1 <= budget, "{k}: {}", s0 + s1);
            assert!(s0 + s1 >= 0.97 * budget, "{k}: {}", s0 + s1);
        }
    }

    #[test]
    fn degenerate_and_empty_families() {
        let fam = IntervalFamily::new(vec![(0.0, 0.01)]).unwrap();
        assert!(matches!(
            make_bumps(&fam, 0.01),
            Err(Error::DegenerateInterval { .. })
        ));
        assert!(make_bumps(&IntervalFamily::new(vec![]).unwrap(), 0.1)
            .unwrap()
            .is_empty());
        assert!(IntervalFamily::new(vec![(1.0, 0.0)]).is_err());
    }

    #[test]
    fn four_point_central_difference() {
        let grid = GridBox::new(0.0, 4.0, 4).unwrap();
        let ev = eigvals_herm(&build_dirac(&grid, DiracVariant::Fd)).unwrap();
        let expect = [-1.0, 0.0, 0.0, 1.0];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{ev:?}");
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let grid = GridBox::new(-1.0, 3.0, 32).unwrap();
        for v in [DiracVariant::Fd, DiracVariant::Fourier] {
            let d = build_dirac(&grid, v);
            let out = d.mul_vec(&vec![cre(1.0); 32]);
            assert!(out.iter().all(|z| z.norm() < 1e-12));
            assert!(d.hermitian_defect() < 1e-12);
        }
    }

    #[test]
    fn fourier_spectrum_is_the_lattice() {
        let grid = GridBox::new(0.0, 3.0, 16).unwrap();
        let ev = eigvals_herm(&build_dirac(&grid, DiracVariant::Fourier)).unwrap();
        let mut expect: Vec<f64> = (-7..=7).map(|m| 2.0 * PI * m as f64 / 3.0).collect();
        expect.push(0.0);
        expect.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-11, "{a} {b}");
        }
    }

    #[test]
    fn fourier_derivative_is_spectrally_accurate() {
        let grid = GridBox::new(0.0, 2.0, 64).unwrap();
        let d = build_dirac(&grid, DiracVariant::Fourier);
        let psi: Vec<C<f64>> = grid
            .sample(|x| (PI * x).sin().exp())
            .into_iter()
            .map(cre)
            .collect();
        let out = d.mul_vec(&psi);
        for (x, z) in grid.points().into_iter().zip(out) {
            let exact = (PI * x).sin().exp() * PI * (PI * x).cos();
            assert!((z - cx(0.0, exact)).norm() < 1e-9);
        }
    }

    #[test]
    fn whole_box_constant_reproduces_dirac() {
        let grid = GridBox::new(0.0, 1.0, 24).unwrap();
        for v in [DiracVariant::Fd, DiracVariant::Fourier] {
            let g = grid_operator_from_samples(
                &grid,
                v,
                vec![vec![1.0; 24]],
                vec![vec![0.0; 24]],
                vec![f64::INFINITY],
            )
            .unwrap();
            assert!((g.d_delta.as_mat() - g.d_grid.as_mat()).max_abs() == 0.0);
            let spec = spectrum_report(&g).unwrap();
            let direct = eigvals_herm(&g.d_grid).unwrap();
            assert_eq!(spec.eigenvalues, direct);
        }
    }

    #[test]
    fn empty_family_has_zero_spectrum() {
        let grid = GridBox::new(0.0, 1.0, 8).unwrap();
        let g =
            grid_operator_from_samples(&grid, DiracVariant::Fd, vec![], vec![], vec![]).unwrap();
        assert!(spectrum_report(&g)
            .unwrap()
            .eigenvalues
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn disjoint_supports_give_exact_blocks() {
        let fam = two_intervals();
        let grid = GridBox::enclosing(&fam, 128).unwrap();
        let g = build_d_delta(&fam, &grid, DiracVariant::Fourier).unwrap();
        for i in 0..128 {
            for j in 0..128 {
                if g.samples[0][i] != 0.0 && g.samples[1][j] != 0.0 {
                    assert_eq!(g.d_delta[(i, j)], cre(0.0));
                }
            }
        }
        let full = spectrum_report(&g).unwrap().eigenvalues;
        let blocks = block_spectrum(&g).unwrap();
        for (a, b) in full.iter().zip(&blocks) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn stencil_refinement_is_second_order() {
        let r = refinement_ratio(&two_intervals(), DiracVariant::Fd, 128).unwrap();
        assert!((3.5..=4.5).contains(&r.ratio), "{r:?}");
    }

    #[test]
    fn kk_assembly_matches_direct_form() {
        let fam = IntervalFamily::new(vec![(0.0, 1.0), (0.6, 1.4)]).unwrap();
        let grid = GridBox::enclosing(&fam, 96).unwrap();
        let g = build_d_delta(&fam, &grid, DiracVariant::Fd).unwrap();
        let cv = cross_validate(&g).unwrap();
        assert!(
            cv.d_delta.residual < 1e-10 && cv.delta.residual < 1e-10,
            "{cv:?}"
        );
        assert!(cv.off_support < 1e-10);
    }

    #[test]
    fn symmetric_family_has_symmetric_spectrum() {
        let fam = IntervalFamily::new(vec![(-2.0, -0.5), (0.5, 2.0)]).unwrap();
        let grid = GridBox::enclosing(&fam, 96).unwrap();
        for v in [DiracVariant::Fourier, DiracVariant::Fd] {
            let g = build_d_delta(&fam, &grid, v).unwrap();
            assert!(spectrum_report(&g).unwrap().symmetry_defect() < 1e-8);
        }
    }

    #[test]
    fn delta_respects_the_budget() {
        let fam = IntervalFamily::new(vec![(0.0, 1.0), (0.5, 1.5), (1.0, 2.0)]).unwrap();
        let grid = GridBox::enclosing(&fam, 200).unwrap();
        let g = build_d_delta(&fam, &grid, DiracVariant::Fd).unwrap();
        assert_eq!(g.delta_budget_excess(), 0.0);
        assert!(g.bump_budget_excess() <= 0.0);
    }

    #[test]
    fn cycle_conditions_hold_on_the_support() {
        let fam = two_intervals();
        let grid = GridBox::enclosing(&fam, 128).unwrap();
        let g = build_d_delta(&fam, &grid, DiracVariant::Fd).unwrap();
        let centered = |c: f64, w: f64| {
            grid.sample(move |x| {
                let t = (x - c) / w;
                if t.abs() < 1.0 {
                    (-1.0 / (1.0 - t * t)).exp()
                } else {
                    0.0
                }
            })
        };
        let algebra = vec![vec![0.0; 128], centered(0.5, 0.1), centered(2.0, 0.1)];
        let rep = spectral_triple_check(&g, &algebra, 2000).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.get("straight_commutators").unwrap().values[0], 0.0);
    }

    #[test]
    fn commutators_outside_the_union_vanish() {
        let fam = two_intervals();
        let grid = GridBox::enclosing(&fam, 128).unwrap();
        let g = build_d_delta(&fam, &grid, DiracVariant::Fd).unwrap();
        let outside = grid.sample(|x| if (1.15..1.35).contains(&x) { 1.0 } else { 0.0 });
        assert_eq!(g.commutator_norm(&outside), 0.0);
    }
}
