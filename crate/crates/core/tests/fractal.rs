use modkk_core::fractal_string::{
    block_spectrum, build_d_delta, commutator_norms, cross_validate, refinement_ratio,
    spectrum_report, DiracVariant, GridBox, IntervalFamily,
};
use modkk_core::kk_product::growth_factor;
use proptest::prelude::*;

fn two_intervals() -> IntervalFamily {
    IntervalFamily::new(vec![(0.0, 1.0), (1.5, 2.5)]).unwrap()
}

#[test]
fn stencil_error_is_second_order() {
    let r = refinement_ratio(&two_intervals(), DiracVariant::Fd, 256).unwrap();
    assert!((3.5..=4.5).contains(&r.ratio), "{r:?}");
}

#[test]
fn commutators_are_stable_under_refinement() {
    let a = |x: f64| (3.0 * x).sin();
    let norms = commutator_norms(&two_intervals(), DiracVariant::Fd, a, &[256, 512, 1024]).unwrap();
    assert!(growth_factor(&norms) < 1.5, "{norms:?}");
}

#[test]
fn disjoint_supports_split_the_spectrum() {
    let fam = IntervalFamily::new(vec![(0.0, 1.0), (1.3, 1.9), (2.4, 3.0)]).unwrap();
    let grid = GridBox::enclosing(&fam, 256).unwrap();
    let g = build_d_delta(&fam, &grid, DiracVariant::Fd).unwrap();
    let full = spectrum_report(&g).unwrap().eigenvalues;
    let blocks = block_spectrum(&g).unwrap();
    for (a, b) in full.iter().zip(&blocks) {
        assert!((a - b).abs() < 1e-10, "{a} {b}");
    }
    let supports: Vec<Vec<usize>> = g
        .samples
        .iter()
        .map(|f| (0..g.dim()).filter(|&j| f[j] != 0.0).collect())
        .collect();
    for (i, s) in supports.iter().enumerate() {
        for t in &supports[i + 1..] {
            for &p in s {
                for &q in t {
                    assert_eq!(g.d_delta[(p, q)].norm(), 0.0);
                }
            }
        }
    }
}

#[test]
fn fourier_spectrum_of_a_symmetric_family_is_symmetric() {
    let fam = IntervalFamily::new(vec![(-1.0, -0.2), (0.2, 1.0)]).unwrap();
    let grid = GridBox::enclosing(&fam, 256).unwrap();
    let g = build_d_delta(&fam, &grid, DiracVariant::Fourier).unwrap();
    let rep = spectrum_report(&g).unwrap();
    assert!(rep.symmetry_defect() < 1e-8, "{}", rep.symmetry_defect());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn assembly_agrees_with_module_product(
        gaps in proptest::collection::vec((0.3f64..1.0, 0.05f64..0.5), 1..4),
        fourier in any::<bool>(),
    ) {
        let mut start = 0.0;
        let mut intervals = Vec::new();
        for (len, gap) in gaps {
            intervals.push((start, start + len));
            start += len + gap;
        }
        let fam = IntervalFamily::new(intervals).unwrap();
        let variant = if fourier { DiracVariant::Fourier } else { DiracVariant::Fd };
        let grid = GridBox::enclosing(&fam, 128).unwrap();
        let g = build_d_delta(&fam, &grid, variant).unwrap();
        let cv = cross_validate(&g).unwrap();
        prop_assert!(cv.d_delta.residual < 1e-10);
        prop_assert!(cv.delta.residual < 1e-10);
        prop_assert_eq!(cv.off_support, 0.0);
        let ev = spectrum_report(&g).unwrap().eigenvalues;
        prop_assert!(ev.iter().all(|v| v.is_finite()));
        prop_assert!(g.d_delta.hermitian_defect() < 1e-12);
    }
}
