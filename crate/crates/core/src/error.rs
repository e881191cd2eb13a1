use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Block shapes, site counts or partition structure do not line up.
    #[error("structural error: {0}")]
    Structure(String),

    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An enumeration would exceed the configured element cap.
    #[error("element cap exceeded: needed {needed} elements, cap is {cap}")]
    CapExceeded { needed: usize, cap: usize },

    /// No covering cell fits inside the configured window.
    #[error("window too small: {0}")]
    WindowTooSmall(String),

    /// An iterative solve stalled before reaching its tolerance.
    #[error("no convergence: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn structure(msg: impl Into<String>) -> Self {
        CoreError::Structure(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        CoreError::Domain(msg.into())
    }
}
