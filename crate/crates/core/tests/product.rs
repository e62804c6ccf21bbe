use modkk_core::hilbert_module::MatrixAlgebra;
use modkk_core::kk_product::{
    f_connection_residual, gram_reconstruction_residual, kasparov_module_check, kasparov_product,
    random_differentiable_module, random_product_instance, trivial_product_instance,
    DifferentiableModule, ProductOptions,
};
use modkk_core::matfun::{op_norm, CMat};
use modkk_core::modular_cycle::random_cycle_over;
use modkk_core::transforms::log_grid;
use modkk_core::Error;
use proptest::prelude::*;

#[test]
fn seeded_products_pass_every_check() {
    for seed in 0..4 {
        let (dm, cycle) = random_product_instance::<f64>(seed, 3, 2, 4).unwrap();
        let pc = kasparov_product(&dm, &cycle, 4, &ProductOptions::default()).unwrap();
        assert!(pc.report.passed(), "seed {seed}: {:?}", pc.report);
        assert!(pc.dual_assembly.residual < 1e-10, "seed {seed}");
        assert!(pc.twicom.relative() < 1e-9, "seed {seed}");
        let rep = kasparov_module_check(&pc.cycle, &[]).unwrap();
        assert!(rep.passed(), "seed {seed}: {rep:?}");
    }
}

#[test]
fn f_connection_decays_faster_than_predicted_bound() {
    let grid = log_grid(0.1, 1e4, 41);
    for seed in 0..3 {
        let (dm, cycle) = random_product_instance::<f64>(seed, 3, 2, 4).unwrap();
        let pc = kasparov_product(&dm, &cycle, 4, &ProductOptions::default()).unwrap();
        let fc = f_connection_residual(&pc, &cycle, &dm.xis[0], &grid).unwrap();
        assert!(
            fc.sweep.slope.unwrap() <= -0.70,
            "seed {seed}: {:?}",
            fc.sweep.slope
        );
    }
}

#[test]
fn trivial_module_has_no_connection_defect() {
    let (dm, cycle) = trivial_product_instance::<f64>(11, 3, 1.0, 2.0).unwrap();
    let pc = kasparov_product(&dm, &cycle, 1, &ProductOptions::default()).unwrap();
    let fc =
        f_connection_residual(&pc, &cycle, &CMat::identity(1), &log_grid(1.0, 1e3, 9)).unwrap();
    assert_eq!(fc.norm, 0.0);
    assert_eq!(op_norm(&(pc.cycle.d.as_mat() - cycle.d.as_mat())), 0.0);
    assert_eq!(
        op_norm(&(pc.cycle.delta.as_mat() - cycle.delta.as_mat())),
        0.0
    );
}

#[test]
fn too_few_generators_are_reported() {
    let (dm, cycle) = random_product_instance::<f64>(5, 3, 2, 4).unwrap();
    let short =
        DifferentiableModule::new(dm.x, dm.pi_a.clone(), vec![dm.xis[0].clone()], 1.0).unwrap();
    let err = kasparov_product(&short, &cycle, 1, &ProductOptions::default()).unwrap_err();
    assert!(matches!(err, Error::GeneratorDeficient { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gram_reconstruction_for_random_modules(seed in 0u64..1000, p in 2usize..=4) {
        let dm = random_differentiable_module::<f64>(seed, p, 2, 4, true).unwrap();
        let cycle = random_cycle_over::<f64>(seed + 1, 2, 2, 1.0, 2.0).unwrap();
        let pc = kasparov_product(&dm, &cycle, 4, &ProductOptions::default()).unwrap();
        for a in MatrixAlgebra::new(p).units::<f64>() {
            prop_assert!(gram_reconstruction_residual(&pc, &dm, &a).unwrap().residual < 1e-10);
        }
        prop_assert!(pc.dual_assembly.residual < 1e-10);
        let d = pc.cycle.d.as_mat();
        prop_assert!(op_norm(&(d - &d.adjoint())) < 1e-12);
    }
}
