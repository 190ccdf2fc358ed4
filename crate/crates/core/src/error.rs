use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("bit sequence of length {len} is not a multiple of {bits_per_symbol} bits per symbol")]
    LengthMismatch { len: usize, bits_per_symbol: usize },

    #[error("index {index} out of range for size {size}")]
    OutOfRange { index: usize, size: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("malformed ternary codeword: {0}")]
    MalformedCodeword(String),

    #[error("tape recorded at parameter version {tape}, network is at version {network}")]
    StaleTape { tape: u64, network: u64 },

    #[error("unsupported checkpoint format version {found} (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("MAP detector infeasible: {states} trellis states exceed the budget of {budget}")]
    MapInfeasible { states: u128, budget: usize },

    #[error("missing ground truth: train-feedback mode needs the transmitted symbol indices")]
    MissingGroundTruth,

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("equalizer `{0}` needs a checkpoint")]
    MissingCheckpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
