use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid keyword: {0}")]
    InvalidKeyword(String),

    #[error("invalid KPI input: {0}")]
    InvalidKpi(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("deeper keywords requested but no categories exist")]
    NoCategories,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("no JSON object found in model output")]
    Parse,

    #[error("model output has the wrong shape: {0}")]
    Schema(String),

    #[error("dataset validation failed with {} problem(s); first: {}", .0.len(), .0.first().map(|e| e.to_string()).unwrap_or_default())]
    Validation(Vec<LineError>),

    #[error("unsupported snapshot version {found} (expected {expected})")]
    SnapshotVersion { found: u64, expected: u64 },

    #[error("corrupt snapshot at line {line}: {reason}")]
    CorruptSnapshot { line: usize, reason: String },

    #[error("generation failed: {0}")]
    GenerationFailure(String),

    #[error(transparent)]
    Tool(#[from] ToolError),

    #[error("I/O error on {}: {source}", path.display())]
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
}

/// One offending line of a dataset file (1-based, header is line 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToolErrorKind {
    Timeout,
    /// 401/403, never retried.
    Auth,
    Status(u16),
    /// Response body did not match the expected wire schema.
    Schema,
    Transport,
    /// Missing credentials or endpoint.
    Config,
    /// Deterministic failure raised by a test double.
    Injected,
}

/// Failure of an external tool (chat model, search, embedder, KPI source).
#[derive(Debug, Clone, Error)]
#[error("{tool} failed ({kind:?}{}): {message}", if *.retriable { ", retriable" } else { "" })]
pub struct ToolError {
    pub tool: &'static str,
    pub kind: ToolErrorKind,
    pub retriable: bool,
    pub message: String,
}

impl ToolError {
    pub fn new(tool: &'static str, kind: ToolErrorKind, message: impl Into<String>) -> Self {
        let retriable = match kind {
            ToolErrorKind::Timeout | ToolErrorKind::Transport => true,
            ToolErrorKind::Status(code) => code == 429 || (500..600).contains(&code),
            ToolErrorKind::Auth
            | ToolErrorKind::Schema
            | ToolErrorKind::Config
            | ToolErrorKind::Injected => false,
        };
        ToolError {
            tool,
            kind,
            retriable,
            message: message.into(),
        }
    }

    pub fn injected(tool: &'static str, message: impl Into<String>) -> Self {
        Self::new(tool, ToolErrorKind::Injected, message)
    }
}
