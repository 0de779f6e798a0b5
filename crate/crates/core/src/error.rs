use thiserror::Error;

/// Errors raised by the qha library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QhaError {
    #[error("backend mismatch: {0}")]
    BackendMismatch(String),

    #[error("grid mismatch: operands live on different Haar grids")]
    GridMismatch,

    #[error("basis mismatch: operands live on different Hilbert bases")]
    BasisMismatch,

    #[error("invalid group point ({0}, {1}): {2}")]
    InvalidPoint(f64, f64, String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("dilation a = {0} is not on the basis lattice")]
    OffLattice(f64),

    #[error("`{op}` is not available on the {backend} backend")]
    Unsupported { op: &'static str, backend: &'static str },

    #[error("operator is not self-adjoint (relative asymmetry {0:.3e})")]
    NotSelfAdjoint(f64),

    #[error("operator is not positive (smallest eigenvalue {0:.6e})")]
    NotPositive(f64),

    #[error("scalar function undefined at eigenvalue {0:.17e}")]
    FunctionDomain(f64),

    #[error("invalid Schatten exponent {0}")]
    InvalidExponent(f64),

    #[error("mixture weights must be non-negative and not all zero")]
    InvalidWeights,

    #[error("window exceeds grid: {0}")]
    WindowExceedsGrid(String),

    #[error("grid needs {needed} nodes along an axis, cap is {cap}")]
    ResolutionCap { needed: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for QhaError {
    fn from(e: std::io::Error) -> Self {
        QhaError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QhaError>;
