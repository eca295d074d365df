use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or non-finite input, mismatched shapes, unreadable files.
    #[error("input error: {0}")]
    Input(String),
    /// An iterative routine ran out of budget.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A matrix that must have full (retained) rank does not.
    #[error("rank error: {0}")]
    Rank(String),
    /// Invalid configuration (ranks, window size, step constants).
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!(
            "{what} contains a non-finite value at flat index {pos}"
        )));
    }
    Ok(())
}
