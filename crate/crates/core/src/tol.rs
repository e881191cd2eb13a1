//! Numeric tolerances used across the crate.
//!
//! Values are pinned once here so every module and test agrees on what
//! "equal", "positive" and "projection" mean in floating point.

/// Weights of a tracial algebra must sum to 1 within this bound.
pub const WEIGHT_SUM: f64 = 1e-12;

/// An element counts as hermitian when each block differs from its
/// adjoint by at most this (relative to the block scale).
pub const HERMITIAN: f64 = 1e-10;

/// Projections: eigenvalues must be within this of {0, 1}, and
/// idempotency defects are accepted up to this bound.
pub const PROJECTION: f64 = 1e-8;

/// Relative positivity slack: `x` is accepted as positive iff its
/// minimal eigenvalue is at least `-POSITIVITY_REL * (1 + sup_norm(x))`.
/// Eigensolvers produce noise of order machine-eps times the scale.
pub const POSITIVITY_REL: f64 = 1e-9;

/// Compressions by spectral projections stay inside the target interval
/// up to this slack.
pub const SPECTRAL: f64 = 1e-8;

/// Positivity slack accepted on a computed positive element.
pub fn positivity_floor(sup_norm: f64) -> f64 {
    -POSITIVITY_REL * (1.0 + sup_norm)
}
