use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate belief update: observation {observed} has zero likelihood under every supported belief")]
    DegenerateUpdate { observed: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("singular design matrix (rank {rank} < {columns} columns)")]
    SingularDesign { rank: usize, columns: usize },

    #[error(
        "underidentified model: {instruments} instruments (constant included), {regressors} regressors, {observations} observations"
    )]
    Underidentified { instruments: usize, regressors: usize, observations: usize },

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("panel schema mismatch, missing columns: {}", .missing.join(", "))]
    Schema { missing: Vec<String> },

    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
