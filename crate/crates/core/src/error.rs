//! Error type shared across the crate.
//!
//! Every fallible routine returns [`Result`]. Variants are grouped by what
//! the caller can do about them: `Domain` and `Config` are caller bugs or
//! bad settings, `Parse`/`Data` mean unusable input files, and
//! `Numeric`/`Degenerate*` signal that a computation lost its footing on
//! otherwise well-formed input.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside a function's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value was structurally valid but unusable.
    #[error("config error: {0}")]
    Config(String),

    /// Input text could not be parsed. `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Input parsed but violates a documented data contract.
    #[error("data error: {0}")]
    Data(String),

    /// A numeric routine failed to converge or produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An observed count sits at a cell whose model rate is exactly zero.
    #[error("model degeneracy: observed count at zero-rate cell (term {term}, doc {doc})")]
    DegenerateCell { term: usize, doc: usize },

    /// A conditional distribution collapsed (zero scale, empty support, ...).
    #[error("degenerate conditional: {0}")]
    DegenerateUpdate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
