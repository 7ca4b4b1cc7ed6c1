use thiserror::Error;

/// Errors raised by the solver kit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh size {0}: need at least one subdivision per axis")]
    InvalidMeshSize(usize),

    #[error("coarse mesh with {coarse} subdivisions does not nest in fine mesh with {fine}")]
    NotNested { fine: usize, coarse: usize },

    #[error("{sub} subdomains per axis do not divide {n} mesh subdivisions")]
    NonDivisibleCover { n: usize, sub: usize },

    #[error("degenerate element: signed volume {volume:e}")]
    DegenerateElement { volume: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("zero pivot at row {pivot} (matrix is singular to working precision)")]
    SingularPivot { pivot: usize },

    #[error("degree of freedom {dof} is not interior to any subdomain")]
    UncoveredDof { dof: usize },

    #[error("empty element set for a local problem")]
    EmptySubdomain,

    #[error("absorption must be nonzero for factorized preconditioner blocks")]
    ZeroAbsorption,

    #[error("two-level preconditioner requires a coarse space")]
    MissingCoarseSpace,

    #[error("weight matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
