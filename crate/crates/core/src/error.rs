use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Rejected parameters, configuration keys or operation preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A noise index outside the declared tape layout.
    #[error("noise index out of layout: {0}")]
    Layout(String),

    #[error("overflow: {0}")]
    Overflow(String),

    /// NaN or infinity appeared in the swarm state.
    #[error("non-finite {field} at step {step}, particle {particle}")]
    NonFinite {
        step: usize,
        particle: usize,
        field: &'static str,
    },

    /// A run inside a study aborted; tags the offending cell.
    #[error("cell m={m}, replicate={replicate}: {source}")]
    Cell {
        m: f64,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that originate in the numerics rather than in input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. } | Error::Overflow(_) => true,
            Error::Cell { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
