use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    /// Malformed or out-of-range input; `field` names the offending item.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("disconnected network: vertices {component:?} are not joined to vertex 0 by positive-weight edges")]
    Disconnected { component: Vec<usize> },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("capacity exceeded: {what} needs {needed} configurations, limit is {limit}")]
    Capacity {
        what: &'static str,
        needed: f64,
        limit: f64,
    },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("not a superposition: reconstructed mass {mass:e} for configuration {config}")]
    NotSuperposition { config: String, mass: f64 },

    #[error("division by zero: {0}")]
    Division(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("field defined only up to additive constant: pinning conductance must be > 0")]
    Unpinned,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("loop truncation bound {bound:e} exceeds tolerance {tolerance:e}; increase the cutoff length")]
    Truncation { bound: f64, tolerance: f64 },

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("runaway simulation: more than {cap} events in one pass")]
    Runaway { cap: usize },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn contract(message: impl Into<String>) -> Self {
        LabError::Contract(message.into())
    }

    /// True for errors caused by bad user input rather than failed checks.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            LabError::Validation { .. }
                | LabError::Disconnected { .. }
                | LabError::Io { .. }
                | LabError::Capacity { .. }
                | LabError::Unpinned
                | LabError::Truncation { .. }
                | LabError::Unsupported(_)
                | LabError::Contract(_)
        )
    }
}
