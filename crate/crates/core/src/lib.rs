//! Optimal stepsizes and exact spectra for two-block gradient descent on
//! least squares, plus the reference solvers and alternating-projection
//! operators built on the same spectral analysis.

pub mod altproj;
pub mod datagen;
pub mod error;
pub mod model;
pub mod numkernels;
pub mod real;
pub mod rng;
pub mod solvers;
pub mod spectrum;
pub mod stepsizes;
pub mod tol;

pub use error::{Error, Result};
pub use real::Real;

/// Dense `f64` matrix, the default instantiation.
pub type Matrix64 = numkernels::DenseMatrix<f64>;
/// Dense `f64` vector, the default instantiation.
pub type Vector64 = numkernels::DenseVector<f64>;
/// Dense `f32` matrix.
pub type Matrix32 = numkernels::DenseMatrix<f32>;
/// Dense `f32` vector.
pub type Vector32 = numkernels::DenseVector<f32>;
