use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building inputs or estimating.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input shape mismatch: {0}")]
    InputShape(String),

    #[error("need at least 2 individuals, found {found}")]
    InsufficientGroups { found: usize },

    #[error("no individual has two or more replicates; within-individual spread is undefined")]
    InsufficientReplicates,

    #[error("non-finite value in payload of individual {individual:?}")]
    NonFinite { individual: String },

    #[error("duplicate observation: individual {individual:?}, replicate {replicate:?}")]
    DuplicateObservation { individual: String, replicate: String },

    #[error("distance is not applicable to this payload: {0}")]
    MetricMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("matrix is not positive definite")]
    SingularMatrix,

    #[error("all between-individual distances are zero")]
    DegenerateDistances,

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("invalid distance matrix: {0}")]
    InvalidDistanceMatrix(String),
}

impl Error {
    /// Stable name of the error kind, used in diagnostics and CLI output.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Error::InputShape(_) => "InputShapeError",
            Error::InsufficientGroups { .. } => "InsufficientGroupsError",
            Error::InsufficientReplicates => "InsufficientReplicatesError",
            Error::NonFinite { .. } => "NonFiniteError",
            Error::DuplicateObservation { .. } => "DuplicateObservationError",
            Error::MetricMismatch(_) => "MetricMismatchError",
            Error::DegenerateInput(_) => "DegenerateInputError",
            Error::InsufficientData(_) => "InsufficientDataError",
            Error::Parameter(_) => "ParameterError",
            Error::SingularMatrix => "SingularMatrixError",
            Error::DegenerateDistances => "DegenerateDistancesError",
            Error::Factorization(_) => "FactorizationError",
            Error::InvalidDistanceMatrix(_) => "InvalidDistanceMatrixError",
        }
    }
}
