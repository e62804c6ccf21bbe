//! Run configuration read from JSON, with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use modkk_core::fractal_string::DiracVariant;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Verify,
    Sweep,
    Product,
    Fractal,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandKind>,
    #[serde(default)]
    pub seed: u64,
    /// Per-check tolerance overrides, keyed by check name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub product: ProductConfig,
    #[serde(default)]
    pub fractal: FractalConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Dimension of the seeded lift and transform contexts.
    pub dim: usize,
    pub only: Option<String>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { dim: 6, only: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Estimate ids; `f-connection` selects the product sweep.
    pub estimates: Vec<String>,
    pub lambdas: Option<Vec<f64>>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    pub dim: usize,
    pub radius: f64,
    pub delta_max: f64,
    pub condition: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            estimates: Vec::new(),
            lambdas: None,
            lambda_min: 0.1,
            lambda_max: 1e4,
            points: 41,
            dim: 6,
            radius: 1.0,
            delta_max: 1.0,
            condition: 2.0,
        }
    }
}

impl SweepConfig {
    pub fn grid(&self) -> Vec<f64> {
        match &self.lambdas {
            Some(l) => l.clone(),
            None => modkk_core::transforms::log_grid(self.lambda_min, self.lambda_max, self.points),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModuleSpec {
    /// Rows `p` of `X = M_{p,k}`; `M_p` acts on the left.
    pub rows: usize,
    /// Size `k` of `B = M_k`.
    pub k: usize,
    pub generators: usize,
    pub parseval: bool,
    /// `X = B = ℂ` with the single generator `1`.
    pub trivial: bool,
}

impl Default for ModuleSpec {
    fn default() -> Self {
        Self {
            rows: 3,
            k: 2,
            generators: 4,
            parseval: true,
            trivial: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleSpec {
    /// `Y = ℂ^{k m}` with `B` acting by `b ⊗ 1_m` up to a unitary.
    pub multiplicity: usize,
    /// Graded cycle on `ℂ^k ⊕ ℂ^k`.
    pub even: bool,
    pub radius: f64,
    pub condition: f64,
}

impl Default for CycleSpec {
    fn default() -> Self {
        Self {
            multiplicity: 2,
            even: false,
            radius: 1.0,
            condition: 2.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProductConfig {
    pub module: ModuleSpec,
    pub cycle: CycleSpec,
    /// Number of generators used; all of them when absent.
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Power in the connection chain.
    pub k: u32,
}

impl Default for ProductConfig {
    fn default() -> Self {
        Self {
            module: ModuleSpec::default(),
            cycle: CycleSpec::default(),
            n: None,
            k: 5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FractalConfig {
    pub intervals: Vec<(f64, f64)>,
    pub n_points: usize,
    pub variant: DiracVariant,
    /// One bump `f ≡ 1` on the whole box, ignoring the sup-norm budget.
    pub test_mode: bool,
    pub n_approx: usize,
}

impl Default for FractalConfig {
    fn default() -> Self {
        Self {
            intervals: vec![(0.0, 1.0), (1.5, 2.5)],
            n_points: 256,
            variant: DiracVariant::Fd,
            test_mode: false,
            n_approx: 2000,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
