//! Plain-data results shared by the verification routines.

use serde::Serialize;

use crate::matfun::{op_norm, CMat};
use crate::scalar::Real;

/// Norms of both sides of an operator identity and of their difference.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub name: String,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    pub residual: f64,
    pub lambda: Option<f64>,
}

impl IdentityResidual {
    pub fn from_mats<T: Real>(name: &str, lhs: &CMat<T>, rhs: &CMat<T>, lambda: Option<T>) -> Self {
        Self {
            name: name.to_string(),
            lhs_norm: op_norm(lhs).as_f64(),
            rhs_norm: op_norm(rhs).as_f64(),
            residual: op_norm(&(lhs - rhs)).as_f64(),
            lambda: lambda.map(|l| l.as_f64()),
        }
    }

    /// Residual divided by the larger side; absolute when both vanish.
    pub fn relative(&self) -> f64 {
        let scale = self.lhs_norm.max(self.rhs_norm);
        if scale > 0.0 {
            self.residual / scale
        } else {
            self.residual
        }
    }

    pub fn passes(&self, rel_tol: f64) -> bool {
        self.relative() <= rel_tol
    }
}

/// Outcome of one named condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionResult {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub values: Vec<f64>,
    pub note: String,
}

impl ConditionResult {
    pub fn new(name: &str, passed: bool, residual: f64) -> Self {
        Self {
            name: name.to_string(),
            passed,
            residual,
            values: Vec::new(),
            note: String::new(),
        }
    }

    pub fn with_values(mut self, values: Vec<f64>) -> Self {
        self.values = values;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CycleReport {
    pub conditions: Vec<ConditionResult>,
}

impl CycleReport {
    pub fn push(&mut self, c: ConditionResult) {
        self.conditions.push(c);
    }

    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }
}
