use modkk_core::kk_product::growth_factor;
use modkk_core::matfun::op_norm;
use modkk_core::transforms::{
    appendix_sweep, bounded_transform, circle_truncation, fit_decay, log_grid,
    random_transform_context, Estimate,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_recovers_exact_power_laws(p in -3.0f64..1.0, c in 1e-3f64..1e3, lo in 1.0f64..100.0) {
        let l = log_grid(lo, lo * 1e3, 17);
        let n: Vec<f64> = l.iter().map(|&x| c * (1.0 + x).powf(p)).collect();
        let (slope, intercept, rms) = fit_decay(&l, &n).unwrap();
        prop_assert!((slope - p).abs() < 1e-9);
        prop_assert!((intercept.exp() - c).abs() < 1e-8 * c);
        prop_assert!(rms < 1e-9);
    }

    #[test]
    fn log_grid_is_ascending_with_exact_ends(lo in 1e-3f64..1.0, ratio in 2.0f64..1e6, count in 2usize..100) {
        let g = log_grid(lo, lo * ratio, count);
        prop_assert_eq!(g.len(), count);
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
        prop_assert!((g[0] - lo).abs() <= 1e-12 * lo);
        prop_assert!((g[count - 1] - lo * ratio).abs() <= 1e-9 * lo * ratio);
    }
}

#[test]
fn all_estimates_decay_on_seeded_contexts() {
    let grid = log_grid(10.0, 1e4, 31);
    for seed in 0..3 {
        let ctx = random_transform_context::<f64>(seed, 6, 1.0, 1.0, 2.0).unwrap();
        for e in Estimate::ALL {
            let fit = appendix_sweep(&ctx, &grid, e).unwrap();
            assert!(fit.passed, "seed {seed} {}: slope {:?}", e.id(), fit.slope);
        }
    }
}

#[test]
fn explicit_constant_bounds_every_point() {
    let grid = log_grid(0.1, 1e4, 41);
    for seed in 0..5 {
        let ctx = random_transform_context::<f64>(seed, 8, 1.0, 1.0, 4.0).unwrap();
        let fit = appendix_sweep(&ctx, &grid, Estimate::DeltaHalfResolvent).unwrap();
        assert!(fit.bound_passed, "seed {seed}");
        let r = ctx.r;
        for (&l, &n) in fit.lambdas.iter().zip(&fit.norms) {
            assert!(n <= (2.0 * r).sqrt() / (1.0 + l).sqrt() * (1.0 + 1e-9));
        }
    }
}

#[test]
fn empty_or_unsorted_grid_is_rejected() {
    let ctx = random_transform_context::<f64>(0, 4, 1.0, 1.0, 2.0).unwrap();
    assert!(appendix_sweep(&ctx, &[], Estimate::ErrorTerm).is_err());
    assert!(appendix_sweep(&ctx, &[2.0, 1.0], Estimate::ErrorTerm).is_err());
}

#[test]
fn circle_commutators_stay_bounded_under_refinement() {
    let mut worst = Vec::new();
    for n in [8, 16, 32] {
        let c = circle_truncation::<f64>(n).unwrap();
        let f = bounded_transform(&c.d).unwrap();
        let norm = c
            .generators
            .iter()
            .map(|a| op_norm(&f.commutator(a)))
            .fold(0.0, f64::max);
        worst.push(norm);
    }
    assert!(growth_factor(&worst) < 1.5, "{worst:?}");
    assert!(worst.iter().all(|&v| v > 0.0 && v < 2.0));
}

#[test]
fn growth_factor_edge_cases() {
    assert_eq!(growth_factor(&[]), 1.0);
    assert_eq!(growth_factor(&[0.0, 0.0]), 1.0);
    assert_eq!(growth_factor(&[0.0, 1.0]), f64::INFINITY);
    assert_eq!(growth_factor(&[2.0, 1.0, 3.0]), 3.0);
}
