use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular pressure system: {0}")]
    SingularSystem(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("saturation update needs {needed} sub-steps, cap is {cap}")]
    SubstepCap { needed: usize, cap: usize },

    #[error("simulation failed at report step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("forward model failed for ensemble member {member}: {source}")]
    Forward {
        member: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::InvalidField(_) => "invalid_field",
            Error::Dimension(_) => "dimension",
            Error::SingularSystem(_) => "singular_system",
            Error::SolverDiverged { .. } => "solver_diverged",
            Error::SubstepCap { .. } => "substep_cap",
            Error::Step { .. } => "simulation_step",
            Error::Forward { .. } => "forward",
            Error::Factorization(_) => "factorization",
            Error::Format(_) => "format",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
        }
    }
}
