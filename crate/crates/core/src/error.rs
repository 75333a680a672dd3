use thiserror::Error;

/// Failures raised by the numerical engines.
///
/// Undefined phases (nodal points) are not errors; they are reported through
/// [`crate::linalg::PhaseResult::defined`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },
    #[error("operator is not an orthogonal projector (residual {residual:.3e})")]
    NotProjector { residual: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("negative eigenvalue {0:.3e} in density operator")]
    NegativeEigenvalue(f64),
    #[error("degenerate nonzero spectrum: {0}")]
    DegenerateSpectrum(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular configuration: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
