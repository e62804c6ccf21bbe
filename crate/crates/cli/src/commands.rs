//! The four subcommands. Each returns a JSON report, auxiliary files and a
//! pass flag; nothing here touches the filesystem.

use modkk_core::fractal_string::{
    build_d_delta, cross_validate, grid_operator_from_samples, spectral_triple_check,
    spectrum_report, GridBox, GridOperator, IntervalFamily,
};
use modkk_core::kk_product::{
    f_connection_residual, kasparov_module_check, kasparov_product, random_differentiable_module,
    repconcon_chain, trivial_product_instance, DifferentiableModule, ProductCycle, ProductOptions,
};
use modkk_core::matfun::op_norm;
use modkk_core::modular_cycle::{random_cycle_over, random_even_cycle, ModularCycle};
use modkk_core::transforms::{
    appendix_sweep, fit_decay, fit_window, random_transform_context, DecayFit, Estimate,
};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ProductConfig, RunConfig};
use crate::suite::{check_names, run_suite, SuiteInputs};
use crate::CliError;

/// Result of one command.
#[derive(Debug)]
pub struct Outcome {
    pub report: Value,
    /// `(file name, contents)` written under the output directory.
    pub files: Vec<(String, String)>,
    pub passed: bool,
}

impl Outcome {
    pub fn report_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }
}

fn to_value<S: Serialize>(s: &S) -> Value {
    serde_json::to_value(s).expect("plain data serializes")
}

fn math_error(e: modkk_core::Error) -> CliError {
    CliError::Failure(format!("{}: {e}", e.name()))
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let only = cfg.verify.only.as_deref();
    if let Some(name) = only {
        if !check_names().contains(&name) {
            return Err(CliError::Usage(format!(
                "unknown check {name}; known: {}",
                check_names().join(", ")
            )));
        }
    }
    for key in cfg.tolerances.keys() {
        if !check_names().contains(&key.as_str()) {
            return Err(CliError::Usage(format!(
                "tolerance override for unknown check {key}"
            )));
        }
    }
    if cfg.verify.dim < 2 {
        return Err(CliError::Usage("verify.dim must be at least 2".into()));
    }
    let inputs = SuiteInputs {
        seed: cfg.seed,
        dim: cfg.verify.dim,
    };
    let entries = run_suite(&inputs, only, &cfg.tolerances);
    let passed = entries.iter().all(|(_, e)| e.pass);
    let mut results = Map::new();
    for (name, entry) in &entries {
        results.insert(name.to_string(), to_value(entry));
    }
    let report = json!({
        "command": "verify",
        "seed": cfg.seed,
        "dim": cfg.verify.dim,
        "passed": passed,
        "results": Value::Object(results),
    });
    Ok(Outcome {
        report,
        files: Vec::new(),
        passed,
    })
}

/// Sweep CSV: `lambda,norm,bound,slope_so_far` rows, then a `# ...` footer
/// with the fitted slope.
pub fn sweep_csv(fit: &DecayFit) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lambda", "norm", "bound", "slope_so_far"])
        .expect("in-memory write");
    for i in 0..fit.lambdas.len() {
        let prefix_l = &fit.lambdas[..=i];
        let prefix_n = &fit.norms[..=i];
        let window = fit_window(prefix_l);
        let slope = if window.len() >= 2 {
            let wl: Vec<f64> = window.iter().map(|&j| prefix_l[j]).collect();
            let wn: Vec<f64> = window.iter().map(|&j| prefix_n[j]).collect();
            fit_decay(&wl, &wn)
                .map(|(s, _, _)| format!("{s:.16e}"))
                .unwrap_or_default()
        } else {
            String::new()
        };
        w.write_record([
            format!("{:.16e}", fit.lambdas[i]),
            format!("{:.16e}", fit.norms[i]),
            format!("{:.16e}", fit.bounds[i]),
            slope,
        ])
        .expect("in-memory write");
    }
    let mut out = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
    let slope = fit
        .slope
        .map_or("none".to_string(), |s| format!("{s:.16e}"));
    out.push_str(&format!(
        "# estimate={},exponent={},slope={},passed={}\n",
        fit.estimate, fit.exponent, slope, fit.passed
    ));
    out
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sc = &cfg.sweep;
    let grid = sc.grid();
    if grid.is_empty() {
        return Err(CliError::Usage("empty lambda grid".into()));
    }
    let ids: Vec<String> = if sc.estimates.is_empty() {
        Estimate::ALL.iter().map(|e| e.id().to_string()).collect()
    } else {
        sc.estimates.clone()
    };
    let mut plan = Vec::with_capacity(ids.len());
    for id in &ids {
        if id == "f-connection" {
            plan.push(None);
        } else {
            plan.push(Some(
                Estimate::from_id(id).map_err(|e| CliError::Usage(e.to_string()))?,
            ));
        }
    }
    let ctx =
        random_transform_context::<f64>(cfg.seed, sc.dim, sc.radius, sc.delta_max, sc.condition)
            .map_err(|e| CliError::Usage(format!("sweep context: {e}")))?;
    let mut fits = Vec::with_capacity(plan.len());
    for which in plan {
        let fit = match which {
            Some(est) => {
                appendix_sweep(&ctx, &grid, est).map_err(|e| CliError::Usage(e.to_string()))?
            }
            None => {
                let (dm, cycle, pc) = build_product(cfg.seed, &ProductConfig::default())?;
                f_connection_residual(&pc, &cycle, &dm.xis[0], &grid)
                    .map_err(math_error)?
                    .sweep
            }
        };
        fits.push(fit);
    }
    let passed = fits.iter().all(|f| f.passed);
    let files = fits
        .iter()
        .map(|f| (format!("{}.csv", f.estimate), sweep_csv(f)))
        .collect();
    let summary: Vec<Value> = fits
        .iter()
        .map(|f| {
            json!({
                "estimate": f.estimate,
                "exponent": f.exponent,
                "slope": f.slope,
                "slope_passed": f.slope_passed,
                "bound_passed": f.bound_passed,
                "passed": f.passed,
            })
        })
        .collect();
    let report =
        json!({"command": "sweep", "seed": cfg.seed, "passed": passed, "estimates": summary});
    Ok(Outcome {
        report,
        files,
        passed,
    })
}

fn build_product(
    seed: u64,
    pc: &ProductConfig,
) -> Result<
    (
        DifferentiableModule<f64>,
        ModularCycle<f64>,
        ProductCycle<f64>,
    ),
    CliError,
> {
    let m = &pc.module;
    let c = &pc.cycle;
    let bad = |e: modkk_core::Error| CliError::Usage(format!("product config: {e}"));
    let (dm, cycle) = if m.trivial {
        if c.multiplicity == 0 {
            return Err(CliError::Usage(
                "product dimensions must be positive".into(),
            ));
        }
        trivial_product_instance(
            seed.wrapping_add(1_000),
            c.multiplicity,
            c.radius,
            c.condition,
        )
        .map_err(bad)?
    } else {
        if m.rows == 0 || m.k == 0 || m.generators == 0 || c.multiplicity == 0 {
            return Err(CliError::Usage(
                "product dimensions must be positive".into(),
            ));
        }
        // A deficient frame cannot be normalized; surface that from the product.
        let parseval = m.parseval && m.generators * m.k >= m.rows;
        let dm =
            random_differentiable_module(seed, m.rows, m.k, m.generators, parseval).map_err(bad)?;
        let cycle = if c.even {
            random_even_cycle(seed.wrapping_add(1_000), m.k, c.radius, c.condition)
        } else {
            random_cycle_over(
                seed.wrapping_add(1_000),
                m.k,
                c.multiplicity,
                c.radius,
                c.condition,
            )
        }
        .map_err(bad)?;
        (dm, cycle)
    };
    let n = pc.n.unwrap_or(dm.len());
    if n == 0 || n > dm.len() {
        return Err(CliError::Usage(format!(
            "N = {n} but the module has {} generators",
            dm.len()
        )));
    }
    let product =
        kasparov_product(&dm, &cycle, n, &ProductOptions::default()).map_err(math_error)?;
    Ok((dm, cycle, product))
}

pub fn cmd_product(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (dm, cycle, pc) = build_product(cfg.seed, &cfg.product)?;
    let grid = cfg.sweep.grid();
    let kasmod = kasparov_module_check(&pc.cycle, &[]).map_err(math_error)?;
    let connection = f_connection_residual(&pc, &cycle, &dm.xis[0], &grid).map_err(math_error)?;
    let chain =
        repconcon_chain(&pc, &cycle, cfg.product.k, &[1, 10, 100, 1000]).map_err(math_error)?;
    let tol = |name: &str, default: f64| cfg.tolerances.get(name).copied().unwrap_or(default);
    let dual_ok = pc.dual_assembly.residual <= tol("dual_assembly", 1e-10);
    let twicom_ok = pc.twicom.relative() <= tol("twicom", 1e-9);
    let passed =
        pc.report.passed() && dual_ok && twicom_ok && kasmod.passed() && connection.sweep.passed;
    let mut report = json!({
        "command": "product",
        "seed": cfg.seed,
        "passed": passed,
        "dimension": pc.cycle.dim(),
        "cycle_report": to_value(&pc.report),
        "phi": to_value(&pc.phi_report),
        "dual_assembly": to_value(&pc.dual_assembly),
        "twicom": to_value(&pc.twicom),
        "modadj": to_value(&pc.modadj),
        "kasparov_module": to_value(&kasmod),
        "f_connection": to_value(&connection),
        "connection_chain": to_value(&chain),
    });
    if cfg.product.module.trivial {
        let d_gap = op_norm(&(pc.cycle.d.as_mat() - cycle.d.as_mat()));
        let delta_gap = op_norm(&(pc.cycle.delta.as_mat() - cycle.delta.as_mat()));
        report["trivial_module"] = json!({"d_difference": d_gap, "delta_difference": delta_gap});
    }
    Ok(Outcome {
        report,
        files: Vec::new(),
        passed,
    })
}

fn fractal_operator(cfg: &RunConfig) -> Result<GridOperator, CliError> {
    let fc = &cfg.fractal;
    let usage = |e: modkk_core::Error| CliError::Usage(format!("fractal config: {e}"));
    if fc.test_mode {
        let fam = IntervalFamily::new(fc.intervals.clone()).map_err(usage)?;
        let grid = if fam.is_empty() {
            GridBox::new(0.0, 1.0, fc.n_points)
        } else {
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
            GridBox::new(lo, hi - lo, fc.n_points)
        }
        .map_err(usage)?;
        let n = grid.n;
        return grid_operator_from_samples(
            &grid,
            fc.variant,
            vec![vec![1.0; n]],
            vec![vec![0.0; n]],
            vec![f64::INFINITY],
        )
        .map_err(usage);
    }
    let fam = IntervalFamily::new(fc.intervals.clone()).map_err(usage)?;
    let grid = GridBox::enclosing(&fam, fc.n_points).map_err(usage)?;
    build_d_delta(&fam, &grid, fc.variant).map_err(usage)
}

/// Smooth bump of half-width a fifth of the interval, centered in it.
fn centered_test_function(grid: &GridBox, a: f64, b: f64) -> Vec<f64> {
    let c = 0.5 * (a + b);
    let w = 0.2 * (b - a);
    grid.sample(|x| {
        let t = (x - c) / w;
        if t.abs() < 1.0 {
            (-1.0 / (1.0 - t * t)).exp()
        } else {
            0.0
        }
    })
}

pub fn cmd_fractal(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g = fractal_operator(cfg)?;
    let spectrum = spectrum_report(&g).map_err(math_error)?;
    let mut report = json!({
        "command": "fractal",
        "seed": cfg.seed,
        "n_points": g.dim(),
        "variant": to_value(&g.variant),
        "symmetry_defect": spectrum.symmetry_defect(),
    });
    let mut passed = true;
    if !cfg.fractal.test_mode && !cfg.fractal.intervals.is_empty() {
        let algebra: Vec<Vec<f64>> = cfg
            .fractal
            .intervals
            .iter()
            .map(|&(a, b)| centered_test_function(&g.grid, a, b))
            .collect();
        let triple =
            spectral_triple_check(&g, &algebra, cfg.fractal.n_approx).map_err(math_error)?;
        let cv = cross_validate(&g).map_err(math_error)?;
        let cv_ok = cv
            .d_delta
            .residual
            .max(cv.delta.residual)
            .max(cv.off_support)
            <= cfg
                .tolerances
                .get("fractal_assembly")
                .copied()
                .unwrap_or(1e-10);
        passed = triple.passed() && cv_ok;
        report["spectral_triple"] = to_value(&triple);
        report["cross_validation"] = to_value(&cv);
    }
    report["passed"] = json!(passed);
    let files = vec![
        ("spectrum.csv".to_string(), spectrum.spectrum_csv()),
        ("counting.csv".to_string(), spectrum.counting_csv()),
    ];
    Ok(Outcome {
        report,
        files,
        passed,
    })
}
