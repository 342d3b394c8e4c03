use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("circuit depth {depth} exceeds the encodable maximum {d_max}")]
    DepthOverflow { depth: usize, d_max: usize },

    #[error("gate {0} has no representation in the RL-state encoding")]
    Unencodable(String),

    #[error("action {action} out of range for an action space of size {size}")]
    InvalidAction { action: usize, size: usize },

    #[error("objective returned a non-finite value {value} at evaluation {eval}")]
    NonFiniteObjective { value: f64, eval: usize },

    #[error("episode is finished; call reset first")]
    EpisodeDone,

    #[error("empty batch")]
    EmptyBatch,

    #[error("network architecture mismatch: {0:?} vs {1:?}")]
    ArchitectureMismatch(Vec<usize>, Vec<usize>),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
