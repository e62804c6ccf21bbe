use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (residual {residual:e})")]
    NonHermitian { residual: f64 },
    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("function is not finite at eigenvalue {eigenvalue:e}")]
    DomainError { eigenvalue: f64 },
    #[error("eigenvalues below floor {floor:e}: {eigenvalues:?}")]
    NearSingular { floor: f64, eigenvalues: Vec<f64> },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("not a *-representation (residual {residual:e})")]
    NotRepresentation { residual: f64 },
    #[error("not a state: {0}")]
    NotState(String),
    #[error("grading violates {relation} (residual {residual:e})")]
    GradingMismatch {
        relation: &'static str,
        residual: f64,
    },
    #[error("Delta is not strictly positive (smallest eigenvalue {min_eigenvalue:e})")]
    DeltaSingular { min_eigenvalue: f64 },
    #[error("quadrature did not reach tolerance within {evaluations} evaluations (error estimate {estimate:e})")]
    QuadratureNoConvergence { evaluations: usize, estimate: f64 },
    #[error("generators are deficient: rank {rank} < dimension {dim}")]
    GeneratorDeficient { rank: usize, dim: usize },
    #[error("interval [{a}, {b}] is shorter than four grid steps (h = {h})")]
    DegenerateInterval { a: f64, b: f64, h: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable identifier used in machine-readable reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonHermitian { .. } => "NonHermitian",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::DomainError { .. } => "DomainError",
            Error::NearSingular { .. } => "NearSingular",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::Singular => "Singular",
            Error::NotRepresentation { .. } => "NotRepresentation",
            Error::NotState(_) => "NotState",
            Error::GradingMismatch { .. } => "GradingMismatch",
            Error::DeltaSingular { .. } => "DeltaSingular",
            Error::QuadratureNoConvergence { .. } => "QuadratureNoConvergence",
            Error::GeneratorDeficient { .. } => "GeneratorDeficient",
            Error::DegenerateInterval { .. } => "DegenerateInterval",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
