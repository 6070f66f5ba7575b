//! Extension operators for separable polynomial phases and weighted `L^p`
//! norms over balls.

mod engine;
pub mod filon;
mod freq;
mod norm;
mod phase;
mod points;
mod quad;

use thiserror::Error;

pub use engine::{box_of, eval_extension, FieldEngine, Workspace};
pub use filon::{e, sph_bessel_into, AxisIntegrator, Scratch};
pub use freq::{Atom, FrequencyFunction, Piece, PieceCoeffs};
pub use norm::{abs_pow, accumulate, lp_norm, write_field_csv, ChunkSums, NormEstimate};
pub use phase::{derivative, horner, PhaseSpec};
pub use points::{
    ball_volume, paper_weight_mass, sphere_area, weight_value, PointSetKind, SpacePointSet,
    WeightKind, WeightSpec, CHUNK,
};
pub use quad::{
    gauss_legendre, gauss_legendre_on, lagrange_basis, legendre_values, quadrature_nodes, QuadNode,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OscilloError {
    #[error("support outside Q: {0}")]
    SupportOutsideQ(String),
    #[error("quadrature order {0} too low (need q >= 2)")]
    QuadratureOrderTooLow(usize),
    #[error("mismatched lengths: {values} values for {points} points")]
    MismatchedLengths { values: usize, points: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
}
