use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: String,
        expected: String,
        got: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("svd did not converge after {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },

    #[error("invalid architecture: {0}")]
    Architecture(String),

    #[error("weight initialization failed: W_{layer} not full rank after {retries} retries")]
    InitRank { layer: usize, retries: usize },

    #[error(
        "top singular value is not distinct: sigma1 = {sigma1:e}, sigma2 = {sigma2:e} (gap tolerance {gap_tol:e})"
    )]
    DegenerateGap {
        sigma1: f64,
        sigma2: f64,
        gap_tol: f64,
    },

    #[error("{0}")]
    Unsupported(String),

    #[error("kronecker form needs vectors of length {len}, above the cap of {cap}; use the sum form")]
    KroneckerTooLarge { len: usize, cap: usize },

    #[error("layer index {index} out of range 1..={max}")]
    LayerIndex { index: usize, max: usize },

    #[error("non-finite loss at iteration {iter}")]
    NonFiniteLoss { iter: usize },

    #[error("linear solve failed (damping {damping:e}, condition estimate {condition:e})")]
    LinearSolve { damping: f64, condition: f64 },

    #[error("could not reach full rank after {retries} retries")]
    FullRank { retries: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(
        context: impl Into<String>,
        expected: impl ToString,
        got: impl ToString,
    ) -> Self {
        Error::Shape {
            context: context.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
