use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient probes: need at least {needed}, got {got}")]
    InsufficientProbes { needed: usize, got: usize },

    #[error("degenerate abscissae: all x values are identical")]
    DegenerateAbscissae,

    #[error("insufficient points for smoothing: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("position out of bounds: {position} not in [1, {length}]")]
    PositionOutOfBounds { position: usize, length: usize },

    #[error("singular design: numerical rank {rank} of {columns} columns")]
    SingularDesign { rank: usize, columns: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid correlation {0}: must lie in [0, 1)")]
    InvalidCorrelation(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed sequence at position {position}: {reason}")]
    MalformedSequence { position: usize, reason: String },

    #[error("empty array {0}")]
    EmptyArray(usize),

    #[error("insufficient background probes: need at least {needed}, got {got}")]
    InsufficientBackgroundProbes { needed: usize, got: usize },

    #[error("no signal stratum: {0}")]
    NoSignalStratum(String),

    #[error("no usable genes for normalization")]
    NoUsableGenes,

    #[error("no valid probes")]
    NoValidProbes,

    #[error("no background model: {0}")]
    NoBackgroundModel(String),

    #[error("singular bread matrix")]
    SingularBread,

    #[error("degenerate mixture: {0}")]
    DegenerateMixture(String),

    #[error("no data for tag {0}")]
    NoTagData(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("degenerate truth: need at least one positive and one negative")]
    DegenerateTruth,

    #[error("channel missing: {0}")]
    ChannelMissing(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("{file}:{line}:{column}: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for configuration errors, 3 for data problems,
    /// 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::SingularDesign { .. }
            | Error::SingularBread
            | Error::DegenerateMixture(_)
            | Error::DegenerateAbscissae
            | Error::NoUsableGenes => 4,
            _ => 3,
        }
    }
}
