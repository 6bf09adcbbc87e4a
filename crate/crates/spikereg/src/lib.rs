//! Numerical laboratory for minimum-norm interpolation on spiked-covariance
//! data: closed-form risk evaluators, an overfitting-regime classifier,
//! alignment phase boundaries, and a Monte Carlo engine that validates the
//! theory against the pseudoinverse estimator at desk scale.

pub mod config;
pub mod error;
pub mod linalg;
pub mod model;
pub mod rmt;
pub mod simulate;
pub mod sweep;
pub mod theory;

pub use error::{Error, Result};
pub use model::{Branch, ProblemSpec, ScalingRegime, SpecParams, GUARD_BAND_DELTA};
