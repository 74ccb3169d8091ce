use thiserror::Error;

/// Errors raised by the linear algebra, batch-control and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    /// The reference gradient is too small for the sample-size tests to be defined.
    #[error("degenerate gradient: norm {norm:e} is below the floor {floor:e}")]
    DegenerateGradient { norm: f64, floor: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigenvalue iteration did not converge after {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },

    #[error("matrix is singular")]
    SingularMatrix,

    /// A tolerance is zero while the covariance contraction it controls is not.
    #[error("zero tolerance `{which}` with nonzero covariance contraction {contraction:e}")]
    ZeroTolerance {
        which: &'static str,
        contraction: f64,
    },

    /// The optimal split is 0/0 when the covariance trace vanishes.
    #[error("zero covariance: the optimal tolerance split is undefined")]
    ZeroCovariance,

    #[error("invalid smoothness constants: L = {l}, mu = {mu}")]
    InvalidSmoothness { l: f64, mu: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("objective does not provide the exact {0} oracle")]
    OracleUnavailable(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
