use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),

    #[error("mesh validation failed: {0}")]
    MeshValidation(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("linear solver failed ({message}); achieved relative residual {residual:.3e}")]
    SolverFailure { residual: f64, message: String },

    #[error("tensor table build failed at (u, v) = ({u}, {v}): {message}")]
    TableBuild { u: f64, v: f64, message: String },

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("verification check failed: {0}")]
    Verification(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
