use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("degenerate vector: norm {norm:e} <= eps {eps:e}")]
    Degenerate { norm: f64, eps: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("sequence of {len} tokens exceeds positional table of length {max}")]
    LengthExceeded { len: usize, max: usize },

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("vocabulary error: {0}")]
    Vocab(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported schema version {found:?} (expected {expected:?})")]
    Version {
        found: String,
        expected: &'static str,
    },

    #[error("training diverged at step {step}: non-finite gradient for {param}")]
    Divergence { step: usize, param: String },

    #[error("step {step}, batch {batch}: {source}")]
    Step {
        step: usize,
        batch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::Degenerate { .. } => "degenerate",
            Error::NonFinite(_) => "non_finite",
            Error::Contract(_) => "contract",
            Error::Param(_) => "param",
            Error::Input(_) => "input",
            Error::LengthExceeded { .. } => "length_exceeded",
            Error::Generation(_) => "generation",
            Error::Vocab(_) => "vocab",
            Error::Template(_) => "template",
            Error::Protocol(_) => "protocol",
            Error::Parse { .. } => "parse",
            Error::Version { .. } => "version",
            Error::Divergence { .. } => "divergence",
            Error::Step { source, .. } => source.kind(),
            Error::Io { .. } => "io",
        }
    }
}
