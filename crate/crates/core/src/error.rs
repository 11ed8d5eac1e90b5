use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("assembly failure: cell {cell} has non-positive measure")]
    AssemblyFailure { cell: usize },

    #[error("field belongs to mesh {field} but forms were assembled on mesh {forms}")]
    MeshMismatch { field: u64, forms: u64 },

    #[error("stiffness matrix is not positive definite at row {row}")]
    NotPositiveDefinite { row: usize },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("mountain-pass path collapsed onto an endpoint after {points} path points")]
    PathCollapse { points: usize },

    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("{path}: {msg}")]
    Format { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
