use thiserror::Error;

/// Errors raised by the library.
///
/// Validation problems are not errors; see [`crate::model::Violation`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("{code} at {path}: expected {expected}, found {found}")]
    DimMismatch {
        code: String,
        path: String,
        expected: String,
        found: String,
    },

    #[error("no-modes: the system must declare at least one mode")]
    NoModes,

    #[error("ambient dimension mismatch: {0} vs {1}")]
    AmbientMismatch(usize, usize),

    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("system is not constant: modes `{first}` and `{second}` disagree on {field}")]
    NotConstant {
        first: String,
        second: String,
        field: &'static str,
    },

    #[error("C-nonzero: jump matrices are nonzero on edges {}", .0.join(", "))]
    NonzeroJumps(Vec<String>),

    #[error("singular controllability Gramian for mode `{mode}` (condition {condition:.3e})")]
    SingularGramian { mode: String, condition: f64 },

    #[error("continuous-switching criterion fails at mode `{0}`")]
    CriterionFails(String),

    #[error("feedback witness infeasible at mode `{mode}`: residual {residual:.3e}")]
    FeedbackInfeasible { mode: String, residual: f64 },

    #[error("Riccati step failed at t = {t}: I + K lost positive definiteness")]
    RiccatiStep { t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
