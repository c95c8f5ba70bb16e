use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{field} out of range: {detail}")]
    OutOfRange { field: String, detail: String },

    /// LwF was asked for a distillation signal before any task finished.
    #[error("no preservation state yet (no completed task)")]
    NoPreservationState,

    /// Kendall tau is undefined when either ranking is entirely tied.
    #[error("kendall tau undefined: all items tied in one ranking")]
    UndefinedTau,

    #[error("label sets differ between rankings")]
    LabelMismatch,

    #[error("GEM dual QP did not converge after {iterations} sweeps (KKT residual {residual:e})")]
    QpNotConverged { iterations: usize, residual: f64 },

    #[error("power iteration did not converge after {iterations} iterations")]
    EigenNotConverged { iterations: usize },

    #[error(transparent)]
    Idx(#[from] crate::data::idx::IdxError),

    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "invalid_spec",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::Empty(_) => "empty",
            Error::OutOfRange { .. } => "out_of_range",
            Error::NoPreservationState => "no_preservation_state",
            Error::UndefinedTau => "undefined_tau",
            Error::LabelMismatch => "label_mismatch",
            Error::QpNotConverged { .. } => "qp_not_converged",
            Error::EigenNotConverged { .. } => "eigen_not_converged",
            Error::Idx(_) => "idx",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
