use thiserror::Error;

/// Errors raised by the simulator, the demand model and the experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("fermion count {particles} is out of range for {sites} sites")]
    ParticleCount { sites: usize, particles: usize },

    #[error("{sites} sites exceeds the dimension guard of {max_sites}")]
    DimensionGuard { sites: usize, max_sites: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("orbital columns are not orthonormal (max deviation {0:.3e})")]
    NonOrthonormal(f64),

    #[error("sites {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),

    #[error("boundary hop needs at least 3 sites, got {0}")]
    BoundaryTooSmall(usize),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("bitstring {mask:#b} is infeasible: expected {expected} selected participants")]
    Infeasible { mask: u32, expected: usize },

    #[error("basis does not match the instance: {0}")]
    BasisMismatch(String),

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
