use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid layer {layer}: {message}")]
    Validation { layer: usize, message: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The LP solver returned something other than optimal or infeasible.
    #[error("linear program indeterminate: {0}")]
    LpIndeterminate(String),

    #[error("no input point satisfies any guard of a cases node")]
    NoBranch,

    #[error("degenerate conditioning: no delta-close pair among {samples} draws")]
    DegenerateConditioning { samples: usize },

    #[error("too few samples: {0}")]
    InsufficientSamples(String),

    #[error("sampling failed for polyhedron {poly_index}: {message}")]
    SamplingFailure { poly_index: usize, message: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
