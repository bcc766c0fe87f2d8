use thiserror::Error;

/// Errors produced anywhere in the lab.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    /// An argument lies outside the domain of a function (e.g. a negative density).
    #[error("domain error: {0}")]
    Domain(String),
    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A numerical procedure failed (non-convergence, instability, horizon exceeded).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The time integrator failed at a given simulation time.
    #[error("numerical failure at t = {t}: {message}")]
    SolverFailure { t: f64, message: String },
    /// A state that should be unreachable was reached.
    #[error("internal consistency error: {0}")]
    Internal(String),
    /// Configuration could not be parsed or validated.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl LabError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::Domain(_) => "domain",
            LabError::Precondition(_) => "precondition",
            LabError::Numerical(_) => "numerical",
            LabError::SolverFailure { .. } => "solver",
            LabError::Internal(_) => "internal",
            LabError::Config { .. } => "config",
            LabError::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
