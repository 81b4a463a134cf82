use std::io;

use thiserror::Error;

use crate::token::PageId;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A format descriptor, filter rule or parameter is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed content in a file the library was asked to read.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A query outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("page {0} is not part of the model")]
    UnknownPage(PageId),

    #[error("page id {0} is reserved for the artificial start/finish states")]
    ReservedPage(u32),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;
