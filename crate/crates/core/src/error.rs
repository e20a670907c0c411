use crate::birkhoff::CellReport;
use crate::linalg::C64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("loop is not invertible at sample {index} of {samples}")]
    SingularSample { index: usize, samples: usize },

    #[error("truncation residual {achieved:.3e} exceeds tolerance {tol:.3e}")]
    TruncationResidual { achieved: f64, tol: f64 },

    #[error("winding number is ambiguous (rounding error {error:.3e} at {samples} samples)")]
    AmbiguousWinding { error: f64, samples: usize },

    #[error("parameter violation: {0}")]
    ParameterViolation(String),

    #[error("loop is not in the big cell: {0}")]
    NotInBigCell(Box<CellReport>),

    #[error("factorization residual {residual:.3e} exceeds tolerance {tol:.3e} at truncation {truncation}")]
    ResidualTooLarge { residual: f64, tol: f64, truncation: usize },

    #[error("input is not in the real form (fixed residual {residual:.3e} > {tol:.3e})")]
    FormViolation { residual: f64, tol: f64 },

    #[error("factor left the real form: minus residual {minus:.3e}, plus residual {plus:.3e}, bound {bound:.3e}")]
    FactorFormViolation { minus: f64, plus: f64, bound: f64 },

    #[error("loop has coefficients on the wrong side of degree 0")]
    WrongSidedInput,

    #[error("second-kind involution does not commute with the form (residual {0:.3e})")]
    NonCommuting(f64),

    #[error("Birkhoff step failed: {0}")]
    BirkhoffSingular(Box<Error>),

    #[error("constant obstruction has spectrum on the closed negative real axis: {spectrum:?}")]
    LogBranchFailure { spectrum: Vec<C64> },

    #[error("symmetry assertion failed in {stage}: residual {residual:.3e} > {bound:.3e}")]
    SymmetryResidual { stage: &'static str, residual: f64, bound: f64 },

    #[error("factors are not canonical (deviation {0:.3e})")]
    NonCanonical(f64),

    #[error("coset comparison is not constant in the loop parameter (spread {0:.3e})")]
    NotConstant(f64),

    #[error("requested {requested} commuting generators but the abelian subspace has dimension {available}")]
    NoAbelianFamily { requested: usize, available: usize },

    #[error("immersion point {point} fails the norm certificate (deviation {deviation:.3e})")]
    NormCertificateFailure { point: usize, deviation: f64 },

    #[error("invariant form identification failed: {0}")]
    SignatureFailure(String),

    #[error("induced metric is degenerate at every interior point ({0} points)")]
    DegenerateMetric(usize),

    #[error("grid point {point:?}: {source}")]
    AtGridPoint {
        point: Vec<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl Error {
    /// True for rejections that carry mathematical meaning (as opposed to
    /// bad input or I/O trouble).
    pub fn is_mathematical_rejection(&self) -> bool {
        match self {
            Error::NotInBigCell(_) | Error::LogBranchFailure { .. } => true,
            Error::BirkhoffSingular(inner) => inner.is_mathematical_rejection(),
            Error::AtGridPoint { source, .. } => source.is_mathematical_rejection(),
            _ => false,
        }
    }
}
