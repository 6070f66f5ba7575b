//! Numerical laboratory for ℓ² decoupling of the quartic hypersurface
//! `(ξ₁, ξ₂, ξ₃, ξ₁⁴ + ξ₂⁴ + ξ₃⁴)` and its `ξ^{2m}` relatives.

pub mod caps;
pub mod oscillo;
pub mod rescale;
pub mod harness;
