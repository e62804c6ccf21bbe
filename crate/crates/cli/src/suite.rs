//! The identity suite behind `verify`.

use std::collections::BTreeMap;

use modkk_core::fractal_string::{
    build_d_delta, cross_validate, DiracVariant, GridBox, IntervalFamily,
};
use modkk_core::hilbert_module::MatrixAlgebra;
use modkk_core::kk_product::{
    gram_reconstruction_residual, kasparov_product, omega_isometry_check, random_product_instance,
    repconcon_chain, ProductOptions,
};
use modkk_core::matfun::{op_norm, CMat, HermMatrix};
use modkk_core::modular_lift::{
    cruxide_one_residual, cruxide_residual, cruxide_two_residual, modadjinv_residual, modular_lift,
    random_lift_context, strlimzer_sweep,
};
use modkk_core::random::{random_positive, rng};
use modkk_core::scalar::cre;
use modkk_core::transforms::{
    beta_resolvent_check, bounded_transform, conkay_residual, intrig_residual, modular_transform,
    prealg_decomposition, random_transform_context, series_expansion_check, sqrt_integral_check,
    QuadratureSpec, TransformContext,
};
use modkk_core::Result;
use rayon::prelude::*;
use serde::Serialize;

/// How a measured value is compared with its tolerance.
#[derive(Clone, Copy, Debug)]
enum Measure {
    /// `residual / max(‖lhs‖, ‖rhs‖)`.
    Relative,
    /// Plain residual.
    Absolute,
}

/// One named check with its default tolerance.
#[derive(Clone, Copy, Debug)]
pub struct CheckSpec {
    pub name: &'static str,
    pub tolerance: f64,
    measure: Measure,
}

const fn rel(name: &'static str, tolerance: f64) -> CheckSpec {
    CheckSpec {
        name,
        tolerance,
        measure: Measure::Relative,
    }
}

const fn abs(name: &'static str, tolerance: f64) -> CheckSpec {
    CheckSpec {
        name,
        tolerance,
        measure: Measure::Absolute,
    }
}

/// Every check, in report order.
pub const CHECKS: [CheckSpec; 21] = [
    rel("modadj", 1e-9),
    rel("modadjinv", 1e-9),
    abs("strlimzer", 1.0 + 1e-9),
    rel("cruxide", 1e-9),
    rel("cruxide_one", 1e-9),
    rel("cruxide_two", 1e-9),
    rel("prealg", 1e-9),
    rel("intrig", 1e-9),
    rel("conkay", 1e-9),
    rel("series_expansion", 1e-9),
    rel("sqrt_integral", 1e-7),
    abs("beta", 1e-8),
    abs("modular_transform", 1e-7),
    abs("bounded_transform", 1e-12),
    abs("product_cycle", 0.1),
    abs("dual_assembly", 1e-10),
    rel("twicom", 1e-9),
    abs("gram_reconstruction", 1e-10),
    abs("omega_isometry", 1e-9),
    rel("connection_expansion", 1e-10),
    abs("fractal_assembly", 1e-10),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Entry {
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Seeded inputs shared by the checks.
pub struct SuiteInputs {
    pub seed: u64,
    pub dim: usize,
}

enum Value {
    Identity(modkk_core::report::IdentityResidual),
    Scalar(f64),
    Flagged(f64, bool),
}

fn measure(spec: &CheckSpec, inputs: &SuiteInputs) -> Result<Value> {
    let seed = inputs.seed;
    let dim = inputs.dim;
    let quad = QuadratureSpec::default();
    let lift = || random_lift_context::<f64>(seed, dim, dim + 2, 1.0, 2.0);
    let transform = || random_transform_context::<f64>(seed, dim, 2.0, 1.0, 3.0);
    let product = || {
        let (dm, cycle) = random_product_instance::<f64>(seed, 3, 2, 4)?;
        let pc = kasparov_product(&dm, &cycle, 4, &ProductOptions::default())?;
        Ok::<_, modkk_core::Error>((dm, cycle, pc))
    };
    Ok(match spec.name {
        "modadj" => Value::Identity(modular_lift(&lift()?).1),
        "modadjinv" => Value::Identity(modadjinv_residual(&lift()?, cre(-1.0))?),
        "strlimzer" => {
            let rows = strlimzer_sweep(&lift()?, &[1, 10, 100, 1000])?;
            let worst = rows.iter().map(|r| r.norm / r.bound).fold(0.0, f64::max);
            Value::Scalar(worst)
        }
        "cruxide" => Value::Identity(cruxide_residual(&lift()?)?),
        "cruxide_one" => Value::Identity(cruxide_one_residual(&lift()?)?),
        "cruxide_two" => Value::Identity(cruxide_two_residual(&lift()?, 1.0)?),
        "prealg" => Value::Identity(prealg_decomposition(&transform()?, 2.0)?),
        "intrig" => Value::Identity(intrig_residual(&transform()?, 1.0, 1)?),
        "conkay" => Value::Identity(conkay_residual(&transform()?, 20)),
        "series_expansion" => {
            Value::Identity(series_expansion_check(&transform()?, 2.0, 80)?.closed_form)
        }
        "sqrt_integral" => Value::Identity(sqrt_integral_check(&transform()?, &quad)?),
        "beta" => {
            let res = beta_resolvent_check(&HermMatrix::<f64>::zeros(1), 0.5, 0.5, &quad)?;
            Value::Scalar(
                (res.rhs_norm - std::f64::consts::PI)
                    .abs()
                    .max(res.residual),
            )
        }
        "modular_transform" => {
            let mut g = rng(seed);
            let d: Vec<f64> = (0..dim)
                .map(|i| (i as f64 - dim as f64 / 2.0) * 0.7)
                .collect();
            let delta = random_positive::<f64>(&mut g, dim, 1.0, 3.0);
            let diag: Vec<f64> = (0..dim).map(|i| delta[(i, i)].re.abs().max(0.3)).collect();
            let ctx = TransformContext::new(
                HermMatrix::from_real_diag(&d),
                HermMatrix::from_real_diag(&diag),
                None,
            )?;
            let gmat = modular_transform(&ctx, &quad)?;
            let f = bounded_transform(&ctx.d)?;
            Value::Scalar(op_norm(&(&gmat - f.as_mat())))
        }
        "bounded_transform" => {
            let ctx = transform()?;
            let f = bounded_transform(&ctx.d)?;
            let n = ctx.dim();
            let one_plus = ctx.d_function(|x| 1.0 / (1.0 + x * x))?;
            let square = &(&f.matmul(&f) - &CMat::identity(n)) + one_plus.as_mat();
            Value::Scalar(op_norm(&square).max(op_norm(&(f.as_mat() - &f.adjoint()))))
        }
        "product_cycle" => {
            let (_, _, pc) = product()?;
            let unit = pc
                .report
                .get("approximate_unit")
                .map_or(f64::INFINITY, |c| c.residual);
            Value::Flagged(unit, pc.report.passed())
        }
        "dual_assembly" => Value::Scalar(product()?.2.dual_assembly.residual),
        "twicom" => Value::Identity(product()?.2.twicom),
        "gram_reconstruction" => {
            let (dm, _, pc) = product()?;
            let mut worst = 0.0f64;
            for a in MatrixAlgebra::new(dm.pi_a.k()).units::<f64>() {
                worst = worst.max(gram_reconstruction_residual(&pc, &dm, &a)?.residual);
            }
            Value::Scalar(worst)
        }
        "omega_isometry" => Value::Scalar(omega_isometry_check(&product()?.2)?.residual),
        "connection_expansion" => {
            let (_, cycle, pc) = product()?;
            Value::Identity(repconcon_chain(&pc, &cycle, 5, &[1, 10, 100])?.regularized_expansion)
        }
        "fractal_assembly" => {
            let fam = IntervalFamily::new(vec![(0.0, 1.0), (0.6, 1.4), (1.8, 2.4)])?;
            let grid = GridBox::enclosing(&fam, 128)?;
            let g = build_d_delta(&fam, &grid, DiracVariant::Fd)?;
            let cv = cross_validate(&g)?;
            Value::Scalar(
                cv.d_delta
                    .residual
                    .max(cv.delta.residual)
                    .max(cv.off_support),
            )
        }
        other => unreachable!("unknown check {other}"),
    })
}

fn evaluate(spec: &CheckSpec, inputs: &SuiteInputs, tolerance: f64) -> Entry {
    match measure(spec, inputs) {
        Ok(value) => {
            let (residual, flag) = match value {
                Value::Identity(r) => match spec.measure {
                    Measure::Relative => (r.relative(), true),
                    Measure::Absolute => (r.residual, true),
                },
                Value::Scalar(v) => (v, true),
                Value::Flagged(v, ok) => (v, ok),
            };
            Entry {
                residual: Some(residual),
                tolerance,
                pass: flag && residual <= tolerance,
                error: None,
            }
        }
        Err(e) => Entry {
            residual: None,
            tolerance,
            pass: false,
            error: Some(format!("{}: {e}", e.name())),
        },
    }
}

/// Runs the selected checks in parallel; results keep declaration order.
pub fn run_suite(
    inputs: &SuiteInputs,
    only: Option<&str>,
    overrides: &BTreeMap<String, f64>,
) -> Vec<(&'static str, Entry)> {
    let selected: Vec<&CheckSpec> = CHECKS
        .iter()
        .filter(|c| only.is_none_or(|o| o == c.name))
        .collect();
    selected
        .par_iter()
        .map(|spec| {
            let tol = overrides.get(spec.name).copied().unwrap_or(spec.tolerance);
            (spec.name, evaluate(spec, inputs, tol))
        })
        .collect()
}
