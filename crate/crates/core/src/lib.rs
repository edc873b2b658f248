//! Method comparison toolkit: Deming-family and Passing-Bablok regressions,
//! pairs bootstrap, robust covariance of the bootstrapped coefficients and
//! the joint-ellipse test of `(intercept, slope) = (0, 1)`, plus the Monte
//! Carlo and curve-fitting machinery used to study their power.

pub mod dataset;
pub mod error;
pub mod estimators;
pub mod jetest;
pub mod powerfit;
pub mod resampling;
pub mod rng;
pub mod robustcov;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};
