use thiserror::Error;

/// Errors raised by the simulation core.
///
/// `Clone` so an aborted simulation can carry its cause alongside the
/// partial trajectory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A field was queried where it is undefined (fan exclusion zone or the
    /// fan centre itself).
    #[error("point is {distance:.6} m from the fan, inside the {d_min} m exclusion radius")]
    Domain { distance: f64, d_min: f64 },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad configuration rather than by the run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must be strictly positive, got {value}")))
    }
}
