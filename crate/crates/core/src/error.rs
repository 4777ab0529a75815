use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a spectrum needs at least 2 entries, got {0}")]
    TooShort(usize),
    #[error("entry {0} is not finite")]
    NonFinite(usize),
    #[error("spectrum is not sorted in decreasing order")]
    NotSorted,
    #[error("degree {k} is out of range for dimension {n}")]
    DegreeOutOfRange { k: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point is not in the cone Gamma_{k} (sigma_{failed} = {value:e})")]
    NotInCone { k: usize, failed: usize, value: f64 },
    #[error("largest eigenvalue must be positive, got {0:e}")]
    NonPositiveLeading(f64),
    #[error("dynamic plurisubharmonic condition fails: lambda_n + delta*lambda_1 = {0:e}")]
    DynamicPshViolated(f64),
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
    #[error("auxiliary polynomial is not real-rooted (largest imaginary part {0:e})")]
    NotRealRooted(f64),
    #[error("roots reproduce the coefficients only to relative residual {0:e}")]
    RootResidual(f64),
    #[error("matrix is not Hermitian (defect {0:e})")]
    NonHermitianInput(f64),
    #[error("denominator sigma is degenerate ({0:e})")]
    DegenerateDenominator(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}
