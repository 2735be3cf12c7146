//! Error type shared by all model operations.

use thiserror::Error;

/// Errors raised by geometry, kernel, and gain computations.
#[derive(Debug, Clone, Error)]
pub enum ModelError {
    /// Field point and source point coincide, or a source lies inside the
    /// receiving volume where the Green's function diverges.
    #[error("singular point: {0}")]
    SingularPoint(String),

    /// A numeric argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A local frame cannot be built because the element center and the
    /// target coincide, or a user sits on top of an element.
    #[error("degenerate frame: element center and target coincide")]
    DegenerateFrame,

    /// The paraxial form was requested for a geometry where the
    /// separation-to-extent ratio is below the trusted threshold.
    /// Warning grade: callers that accept the error may evaluate the
    /// unchecked form instead.
    #[error("paraxial approximation not trusted: separation/extent = {ratio:.2} < {min_ratio:.1}")]
    ParaxialDomainViolation { ratio: f64, min_ratio: f64 },

    /// Eigen-iteration did not reach the requested residual.
    #[error("eigensolver failed to converge: residual {residual:.3e} after {iterations} iterations")]
    ConvergenceFailure { residual: f64, iterations: usize },

    /// The reactive boundary is at or beyond the radiating boundary, so the
    /// region formulas have no common domain.
    #[error("degenerate region: reactive boundary {reactive_m:.3} m >= field boundary {boundary_m:.3} m")]
    DegenerateRegion { reactive_m: f64, boundary_m: f64 },

    /// An element grouping does not partition the surface elements.
    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),

    /// The shadow-edge formula was evaluated at its divergent angle.
    #[error("singular angle: indoor diffraction law diverges at the shadow edge (theta = {theta_rad:.4} rad)")]
    SingularAngle { theta_rad: f64 },

    /// A hybrid-scenario user is on the wrong side of the field boundary
    /// for the requested closed form.
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, ModelError>;
