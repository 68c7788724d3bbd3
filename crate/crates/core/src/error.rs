//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A schedule or query parameter is outside its admissible range.
    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    /// A height-function window needs particle labels beyond the data.
    #[error("window requires labels beyond the available {available} particles")]
    WindowUnderflow { available: usize },

    /// A query label exceeds the number of particles in the initial data.
    #[error("label {label} exceeds particle count {count}")]
    LabelOutOfRange { label: usize, count: usize },

    /// Adaptive quadrature or a finite-section sweep failed to stabilize.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// An integrand was evaluated too close to one of its poles.
    #[error("evaluation point within {dist:e} of a pole")]
    PoleHit { dist: f64 },

    /// No contour radius separates the enclosed from the excluded poles.
    #[error("no admissible contour radius: {0}")]
    RadiusInfeasible(String),

    /// A dense determinant was requested beyond the configured size guard.
    #[error("size {n} exceeds guard {guard}")]
    SizeGuard { n: usize, guard: usize },

    /// A truncated infinite sum never met its stopping rule.
    #[error("truncated sum failed to converge: {0}")]
    TruncationFailure(String),

    /// The finite-section matrix  I - K  is numerically singular.
    #[error("ill-conditioned determinant, condition estimate {cond:e}")]
    SingularityWarning { cond: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
