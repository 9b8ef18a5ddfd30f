use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("junction mismatch between piece {index} and piece {next}")]
    Junction { index: usize, next: usize },

    #[error("dimension {0} is not supported (1..={max})", max = crate::path::MAX_DIM)]
    Dimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("local time {l} is beyond the stored range {l_max} and extension is disabled")]
    BeyondTable { l: u32, l_max: u32 },

    #[error("resource cap exceeded: requested {requested}, cap {cap} ({what})")]
    CapExceeded {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("root not bracketed: {0}")]
    NoRoot(String),
}
