use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown leg label `{0}`")]
    UnknownLabel(String),

    #[error("duplicate leg label `{0}`")]
    DuplicateLabel(String),

    #[error("non-finite entry encountered")]
    NonFinite,

    #[error("not an isometry: {0}")]
    NotIsometry(String),

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("Kraus set is not trace preserving (max deviation {0:.3e})")]
    NotTracePreserving(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("site tensor is not injective")]
    NonInjective,

    #[error("eta {eta} exceeds the admissible maximum {max}")]
    EtaTooLarge { eta: f64, max: f64 },

    #[error("size cap exceeded: {0}")]
    CapExceeded(String),

    #[error("postselection has vanishing probability")]
    ZeroProbabilityPostselection,

    #[error("all Monte Carlo samples were rejected")]
    AllSamplesRejected,

    #[error("lattice geometry error: {0}")]
    Geometry(String),

    #[error("circuit embedding error: {0}")]
    Embedding(String),
}

pub type Result<T> = std::result::Result<T, Error>;
