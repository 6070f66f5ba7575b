//! Decoupling-ratio experiments: ensembles of inputs, Monte Carlo and grid
//! estimates of both sides, growth fits across scales, the planar curve
//! pieces, curvature of the quartic surface and the scale recursion.

mod curve;
mod ensemble;
mod ratio;
mod recursion;
mod sweep;

use thiserror::Error;

use crate::caps::CapsError;
use crate::oscillo::OscilloError;

pub use curve::{curve_family, curve_ratio, CurveMode};
pub use ensemble::Ensemble;
pub use ratio::{check_p, decoupling_ratio, RatioRecord, RhsWeight, MIN_BUDGET};
pub use recursion::{recursion_closed_form, recursion_iterate, recursion_trajectory, DEFAULT_K_EXPONENT};
pub use sweep::{fit_growth, median, run_cell, seedless_label, sweep, CellFailure, GrowthFit, SweepCell, SweepConfig, SweepOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("ensemble produced no nonzero piece")]
    EmptyEnsemble,
    #[error("budget {0} below the minimum of {MIN_BUDGET} points")]
    BudgetTooSmall(usize),
    #[error("exponent p = {0} outside [2, 6]")]
    ExponentOutOfRange(f64),
    #[error("need at least 3 distinct scales, got {0}")]
    TooFewScales(usize),
    #[error("incompatible scales: {0}")]
    NonCompatibleScales(String),
    #[error("family scale {family} does not match R = {requested}")]
    ScaleMismatch { requested: u64, family: u64 },
    #[error("degenerate measurement: {0}")]
    Degenerate(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Caps(#[from] CapsError),
    #[error(transparent)]
    Oscillo(#[from] OscilloError),
}

/// Gaussian curvature numerator `12³ (ξ₁ξ₂ξ₃)²` of the quartic graph and
/// the diagonal of its Hessian.
pub fn curvature(xi: &[f64; 3]) -> (f64, [f64; 3]) {
    let prod = xi[0] * xi[1] * xi[2];
    let hess = xi.map(|t| 12.0 * t * t);
    (1728.0 * prod * prod, hess)
}
