//! Finite-dimensional toolkit for modular spectral triples, their twisted
//! derivatives, modular lifts through Hilbert C*-module correspondences and
//! the resulting unbounded Kasparov products.
//!
//! Every numerical routine is generic over a [`Real`] scalar (`f32` or
//! `f64`); the aliases below fix the double precision instances used by the
//! command-line tools.

pub mod error;
pub mod fractal_string;
pub mod hilbert_module;
pub mod kk_product;
pub mod matfun;
pub mod modular_cycle;
pub mod modular_lift;
pub mod random;
pub mod report;
pub mod scalar;
pub mod transforms;

pub use error::{Error, Result};
pub use scalar::{Real, C};

/// Double precision complex matrix.
pub type CMatrix = matfun::CMat<f64>;
/// Double precision Hermitian matrix.
pub type HermMatrix = matfun::HermMatrix<f64>;
/// Double precision eigendecomposition.
pub type EigDecomp = matfun::EigDecomp<f64>;
