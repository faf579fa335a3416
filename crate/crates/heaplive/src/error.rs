use thiserror::Error;

use crate::syntax::SourcePos;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: SourcePos, message: String },

    #[error("invalid program: {0}")]
    Validate(String),

    #[error("invalid access pattern: {0}")]
    Pattern(String),

    #[error("runtime error: {0}")]
    Runtime(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
