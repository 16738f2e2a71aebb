//! Central table of numerical tolerances.
//!
//! Every module pulls its thresholds from here so that a tolerance is never
//! duplicated or silently diverges between an implementation and its tests.

/// Structural float comparisons (graph weights, balance, exact gain identities).
pub const EXACT: f64 = 1e-12;

/// Row sums / entry positivity when classifying a matrix as stochastic.
pub const STOCHASTIC: f64 = 1e-9;

/// Target relative accuracy of the scaled Padé matrix exponential.
pub const MAT_EXP: f64 = 1e-10;

/// Characteristic-polynomial coefficients (Faddeev–LeVerrier, m <= 8).
pub const CHAR_POLY: f64 = 1e-8;

/// Root residual scale for the companion-matrix root finder.
pub const ROOT_RESIDUAL: f64 = 1e-8;

/// Rank decisions (controllability / observability, PBH tests).
pub const RANK: f64 = 1e-9;

/// Canonical-form shape invariants after the similarity transform.
pub const CANONICAL: f64 = 1e-9;

/// Observer pole placement: coefficientwise residual of the achieved
/// characteristic polynomial.
pub const PLACEMENT: f64 = 1e-7;

/// Default consensus detection tolerance.
pub const CONSENSUS: f64 = 1e-3;

/// Monotone envelope slack for the reduced states along trajectories.
pub const MONOTONE: f64 = 1e-9;

/// Max-abs state guard beyond which a simulation is declared divergent.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// Semigroup / composition checks on transition-matrix products.
pub const COMPOSITION: f64 = 1e-8;
