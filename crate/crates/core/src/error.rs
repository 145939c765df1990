use thiserror::Error;

/// Errors produced by the numeric layers and the model validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of a special function or formula.
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    /// The moment pair cannot be represented by the requested family.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An iterative routine failed to converge.
    #[error("convergence failure in {routine}: {detail}")]
    Convergence { routine: &'static str, detail: String },

    /// Model input that violates a structural invariant.
    #[error("invalid {field}: {detail}")]
    Invalid { field: String, detail: String },
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { func, detail: detail.into() }
    }

    pub fn invalid(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Invalid { field: field.into(), detail: detail.into() }
    }

    /// True for errors caused by malformed input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Invalid { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
