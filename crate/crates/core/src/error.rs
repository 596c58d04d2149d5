use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Toolkit-wide error type. `Usage` maps to exit code 1, everything else
/// is a data or I/O error and maps to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: invalid UTF-8")]
    InvalidUtf8 { path: PathBuf, line: usize },

    #[error("parallel line-count mismatch: source has {src_lines} lines, target has {tgt_lines}")]
    LineCountMismatch { src_lines: usize, tgt_lines: usize },

    #[error("{path}:{line}: malformed alignment token '{token}'")]
    MalformedAlignment {
        path: PathBuf,
        line: usize,
        token: String,
    },

    #[error("line {line}: alignment link ({i},{j}) out of range for lengths ({src_len},{tgt_len})")]
    AlignmentOutOfRange {
        line: usize,
        i: usize,
        j: usize,
        src_len: usize,
        tgt_len: usize,
    },

    #[error("empty corpus: {context}")]
    EmptyCorpus { context: String },

    #[error("empty input: {context}")]
    EmptyInput { context: String },

    #[error("no eligible items to sample (all weights zero or unscorable)")]
    NoEligibleItems,

    #[error("cannot split {n} items into {k} bins")]
    TooFewItems { n: usize, k: usize },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("model file {path}: {message}")]
    BadModelFile { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("pipeline stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code per the CLI contract: 1 usage, 2 data error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
