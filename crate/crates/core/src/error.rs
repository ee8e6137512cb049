use thiserror::Error;

/// Error type shared by every pipeline stage.
#[derive(Debug, Error)]
pub enum Error {
    /// Input geometry does not determine a result (coincident points,
    /// collinear cluster, empty set where data is required).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    /// Tanimoto distance is undefined when both preference vectors are zero.
    #[error("tanimoto distance undefined: both preference vectors are all-zero")]
    UndefinedDistance,
    /// Every point of a segment was declared an outlier.
    #[error("no cluster survived outlier removal")]
    NoCluster,
    /// Gate covariance B = H*P*H' + R is not positive definite.
    #[error("gate covariance is not positive definite")]
    SingularGate,
    /// Innovation covariance S = H*P*H' + R is not positive definite.
    #[error("innovation covariance is not positive definite")]
    SingularInnovation,
    /// A scenario specification is inconsistent or incomplete.
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    /// Results could not be aligned with ground truth.
    #[error("alignment failed: {0}")]
    Alignment(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
