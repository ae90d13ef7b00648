use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input document. `path` names the offending field.
    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pair (A, B) is not controllable (rank {rank} < {n})")]
    Uncontrollable { rank: usize, n: usize },

    #[error("system is not exactly controllable: {0}")]
    NotControllable(String),

    #[error("eigenvalue 0 of the neutral matrix is uncontrollable; no feedback makes A + BP nonsingular")]
    UncontrollableZero,

    #[error("neutral matrix is singular; regularize it by feedback first")]
    SingularNeutral,

    #[error("neutral matrix has a repeated eigenvalue near {0}")]
    RepeatedEigenvalue(String),

    #[error("Newton iteration diverged from seed {seed}")]
    NewtonDivergence { seed: String },

    #[error("{0}")]
    Numerical(String),

    #[error("target state is outside D(A): domain residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    NotInDomain { residual: f64, tol: f64 },

    #[error("horizon T = {time} is not above the critical time {critical}; pass the subcritical override to proceed")]
    Subcritical { time: f64, critical: f64 },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Attaches the pipeline stage that produced the error.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
