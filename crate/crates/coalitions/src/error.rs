//! Crate-wide error type.
//!
//! Variants are grouped by how a caller should react: `Io`/`Parse` are input
//! problems, `Domain`/`Validation`/`NodeIndex` are bad arguments or data,
//! `Unsatisfiable` means a generator stage ran out of restarts, and `Search`
//! means every local-search start failed to reach a feasible structure.

use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// File could not be read or written.
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed input text; `line` is 1-based.
    Parse { line: usize, msg: String },
    /// Structurally invalid data (self-loops, mismatched node sets, ...).
    Validation(String),
    /// Arguments outside the mathematical domain of an operation.
    Domain(String),
    /// Node id out of range for a graph with `n` nodes.
    NodeIndex { node: usize, n: usize },
    /// A generator stage exhausted its restart budget.
    Unsatisfiable { stage: &'static str, attempts: u32 },
    /// Every local-search start failed; carries per-start diagnostics.
    Search { diagnostics: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io { path, source } => write!(f, "{}: {}", path.display(), source),
            Error::Parse { line, msg } => write!(f, "line {}: {}", line, msg),
            Error::Validation(msg) => write!(f, "invalid input: {}", msg),
            Error::Domain(msg) => write!(f, "domain error: {}", msg),
            Error::NodeIndex { node, n } => {
                write!(f, "node {} out of range for graph with {} nodes", node, n)
            }
            Error::Unsatisfiable { stage, attempts } => {
                write!(f, "generator stage '{}' failed after {} attempts", stage, attempts)
            }
            Error::Search { diagnostics } => {
                write!(f, "no search start reached a feasible structure\n{}", diagnostics)
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
