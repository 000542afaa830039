use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point {point}: matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { point: usize, asymmetry: f64 },

    #[error("point {point}: matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { point: usize, min_eigenvalue: f64 },

    #[error("point {point}: non-finite matrix entry")]
    NonFinite { point: usize },

    #[error("fields live on different manifolds")]
    ManifoldMismatch,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("path optimizer did not converge after {iterations} iterations (final gradient norm {grad_norm:.3e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("point {point}: path optimizer failed: {message}")]
    FiberOptimizer { point: usize, message: String },

    #[error("time {t} lies outside the domain of definition [0, {t_max})")]
    OutOfDomain { t: f64, t_max: f64 },

    #[error("metric left the positive-definite cone at t = {t} (point {point})")]
    LeftCone { t: f64, point: usize },

    #[error("path is not a geodesic: relative residual {residual:.3e} exceeds {threshold:.3e}")]
    NotGeodesic { residual: f64, threshold: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("arctangent branch bookkeeping failed at point {point}, t = {t}: angle {angle} outside branch {branch}")]
    Branch { point: usize, t: f64, angle: f64, branch: i64 },

    #[error("Richardson extrapolation disagreement {disagreement:.3e} exceeds bound {bound:.3e}")]
    Extrapolation { disagreement: f64, bound: f64 },

    #[error("plane is not orthonormal in the chosen metric (Gram deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("cutoff set does not contain point {point}, where the two metrics differ")]
    Cutoff { point: usize },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Re-attributes a fiber-level error to quadrature point `point`.
    pub fn at_point(self, point: usize) -> Self {
        match self {
            Error::NotSymmetric { asymmetry, .. } => Error::NotSymmetric { point, asymmetry },
            Error::NotPositiveDefinite { min_eigenvalue, .. } => Error::NotPositiveDefinite { point, min_eigenvalue },
            Error::NonFinite { .. } => Error::NonFinite { point },
            Error::NonConvergence { iterations, grad_norm } => Error::FiberOptimizer {
                point,
                message: format!("no convergence after {iterations} iterations, gradient norm {grad_norm:.3e}"),
            },
            other => other,
        }
    }

    /// Input errors map to exit status 2 in the CLI; everything else is a computation failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::NotSymmetric { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::NonFinite { .. }
                | Error::InvalidInput(_)
                | Error::UnknownExperiment(_)
                | Error::Parse(_)
                | Error::Io(_)
                | Error::Cutoff { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
