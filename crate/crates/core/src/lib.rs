//! Flight-dynamics simulation and neural system identification for a
//! small-scale helicopter in hover.
//!
//! The crate provides, bottom up:
//!
//! - [`linalg`]: dense matrix kernels (LU solve, eigenvalues, matrix exponential)
//! - [`dynamics`]: the hover state-space plant, exact ZOH discretization,
//!   simulation, eigen-analysis, transfer-function evaluation, and the
//!   nonlinear rigid-body propagator
//! - [`excitation`]: deterministic excitation signals and dataset synthesis
//! - [`nn`]: multilayer perceptrons and NARX regressors
//! - [`lm`]: the Levenberg-Marquardt least-squares optimizer
//! - [`sysid`]: the identification pipeline with residual validation
//! - [`mrc`]: neural model-reference control trained through the plant model
//!
//! All numerics are generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); the aliases below fix the common `f64` instantiations.

pub mod dynamics;
pub mod error;
pub mod excitation;
pub mod linalg;
pub mod lm;
pub mod nn;
pub mod rng;
pub mod sysid;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` instantiations of the core types.
pub type Matrix64 = linalg::Matrix<f64>;
pub type Complex64 = num_complex::Complex<f64>;
