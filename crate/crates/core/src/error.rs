use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants carry enough context to name the failing
/// node, file line, or training step, as the calling layer reports them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch in {op}: {details}")]
    ShapeMismatch { op: &'static str, details: String },

    #[error("non-finite value produced by node {node} ({op})")]
    NonFinite { node: usize, op: &'static str },

    #[error("non-finite value in {0}")]
    NonFiniteEval(String),

    #[error("backward requires a scalar output, got shape {shape:?}")]
    NonScalarOutput { shape: Vec<usize> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {msg}")]
    Csv { path: PathBuf, line: usize, msg: String },

    #[error("{path}: no data rows")]
    NoDataRows { path: PathBuf },

    #[error("unsupported version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("checksum mismatch (expected {expected:#010x}, got {actual:#010x}): file is corrupt or truncated")]
    ChecksumMismatch { expected: u32, actual: u32 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("tilted observation-space dynamics require a base with analytic log-density; got {kind}")]
    NonAnalyticBase { kind: &'static str },

    #[error("non-finite gradient in Langevin chain at step {step}")]
    LangevinDiverged { step: usize },

    #[error("training diverged at step {step}: {details}")]
    TrainDiverged { step: u64, details: String },

    #[error("metric requires at least one sample")]
    EmptySamples,

    #[error("degenerate importance weights: effective sample size {ess:.2} below threshold {threshold}")]
    DegenerateWeights { ess: f64, threshold: f64 },

    #[error("quadrature tail mass {mass:.3e} above threshold {threshold:.3e}; widen the grid")]
    TailMass { mass: f64, threshold: f64 },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code classification used by the CLI: 1 for errors in the
    /// user's inputs, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::ShapeMismatch { .. }
            | Error::Csv { .. }
            | Error::NoDataRows { .. }
            | Error::UnsupportedVersion { .. }
            | Error::ChecksumMismatch { .. }
            | Error::CorruptCheckpoint(_)
            | Error::Config(_)
            | Error::NonAnalyticBase { .. }
            | Error::EmptySamples => 1,
            _ => 2,
        }
    }
}
