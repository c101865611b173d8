//! Error taxonomy shared by the whole crate.

use thiserror::Error;

/// Everything that can go wrong in the library, by failure class.
#[derive(Debug, Error)]
pub enum FracError {
    /// A parameter is outside its mathematical domain (negative time, order
    /// outside `[1,2]`, truncation radius beyond the grid, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested order has no quadrature path (`alpha = 2` kernels are
    /// purely oscillatory and are handled symbolically by the solver only).
    #[error("unsupported order: {0}")]
    UnsupportedOrder(String),

    /// Adaptive quadrature stopped before reaching the requested tolerance.
    #[error("quadrature did not converge: {message} (achieved error estimate {achieved:.3e})")]
    Quadrature { message: String, achieved: f64 },

    /// Invalid or inconsistent configuration (grids that do not pair, unknown
    /// keys, missing files).
    #[error("configuration error: {0}")]
    Config(String),

    /// The grid is too coarse to resolve the feature being measured.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Malformed numeric input (non-finite samples, shape mismatch).
    #[error("input error: {0}")]
    Input(String),

    /// Not enough samples for the requested statistic.
    #[error("statistics error: {0}")]
    Statistics(String),

    /// The spectral measure fails the integrability condition required for
    /// the operator machinery; sampling and simulation refuse to run.
    #[error("measure refused: {0}")]
    MeasureRefused(String),

    /// The truncation radius schedule did not stabilise the operator norm.
    #[error("stabilization failure: {0}")]
    Stabilization(String),

    /// The discretized measure cannot support the requested basis size.
    #[error("basis error: {0}")]
    Basis(String),

    /// Two independent numerical checks disagree; neither is trusted.
    #[error("numerically inconclusive: {0}")]
    Inconclusive(String),

    /// The tail of the computed kernel is not yet in its asymptotic regime.
    #[error("asymptote regime not reached: {0}")]
    AsymptoteRegime(String),
}

pub type FracResult<T> = Result<T, FracError>;
