use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration contains a non-finite value")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown scene '{name}' (available: {})", available.join(", "))]
    UnknownScene { name: String, available: Vec<String> },
    #[error("unknown object '{0}'")]
    UnknownObject(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("start configuration is not on the first manifold (residual {0:e})")]
    StartOffManifold(f64),
    #[error("planning failed in phase {phase}: no intersection node found")]
    PhaseFailed { phase: usize },
    #[error("planning failed: {0}")]
    NoSolution(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
