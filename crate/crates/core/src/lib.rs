//! Numerics for parabolic equations driven by anisotropic non-local
//! operators built from Bernstein functions of the block Laplacians.

pub mod bernstein;
pub mod coefficients;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod kernels;
pub mod multiplier;
pub mod operators;
pub mod quad;
pub mod report;
pub mod solver;
pub mod special;
pub mod stochastic;

pub use bernstein::{Anisotropy, BernsteinFunction, BernsteinSpec, LevyPart, ScalingCertificate};
pub use error::{Error, Result};
pub use report::EstimateReport;
