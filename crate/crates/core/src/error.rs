use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("degree {degree} out of range (max {max})")]
    DegreeOutOfRange { degree: usize, max: usize },

    #[error("column {column} did not reach orthogonality after {sweeps} sweeps (orth_err = {orth_err:e})")]
    NonConvergence {
        column: usize,
        sweeps: usize,
        orth_err: f64,
    },

    #[error("column {column} collapsed during projection (norm = {norm:e}); lattice is degenerate")]
    DegenerateLattice { column: usize, norm: f64 },

    #[error("series lattice does not match basis lattice")]
    LatticeMismatch,

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("malformed SP3 header: {0}")]
    MalformedHeader(String),

    #[error("malformed SP3 epoch line {line}: {reason}")]
    MalformedEpochLine { line: usize, reason: String },

    #[error("unsupported SP3 version '{0}'")]
    UnknownVersion(char),

    #[error("insufficient coverage: {missing} of {expected} epochs missing")]
    InsufficientCoverage { missing: usize, expected: usize },

    #[error("window too noisy: robust sigma {sigma:e} exceeds ceiling {ceiling:e}")]
    WindowTooNoisy { sigma: f64, ceiling: f64 },

    #[error("basis cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::InvalidParameters(msg.into())
    }
}
