//! Smoothing-spline estimation for scalar-on-function linear regression.
//!
//! The model is `Y = α₀ + ∫₀¹ α(t) X(t) dt + ε` with predictor curves observed on
//! an equidistant grid. The slope function is estimated by a penalised least
//! squares criterion whose solution is available in closed form at the grid
//! points and extends to `[0, 1]` as a natural spline.
//!
//! - [`spline`]: grids, natural-spline interpolation and penalty matrices.
//! - [`estimator`]: centring, the closed-form fit and error semi-norms.
//! - [`selection`]: generalised cross-validation over `ρ` and `m`.
//! - [`eiv`]: noisy predictor curves and the bias-corrected fit.
//! - [`prediction`]: point predictions, residual variance and intervals.
//! - [`synthetic`]: data generators and convergence-rate studies.
//! - [`io`]: CSV ingestion, irregular-grid regularisation and model files.

mod bspline;
pub mod eiv;
pub mod error;
pub mod estimator;
pub mod io;
pub mod prediction;
pub mod selection;
mod smoother;
pub mod spline;
pub mod synthetic;

pub use error::{Error, Result};
pub use estimator::{CenteredDesign, FittedModel, FunctionalSample};
pub use spline::{build_grid, build_penalty, Grid, PenaltyOperator, SplineFunction};
