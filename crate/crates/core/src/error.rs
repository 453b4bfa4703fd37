use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("finite-difference stencil leaves the domain at node ({i}, {j})")]
    Stencil { i: usize, j: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("grid has no quadrature cells inside the mask")]
    EmptyMask,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown norm kind `{0}` (expected C0, L2 or W22)")]
    UnknownNorm(String),

    #[error("matrix is not symmetric: off-diagonal entries {0} and {1}")]
    NotSymmetric(f64, f64),

    #[error("metric not positive definite at node ({i}, {j}): det g = {det:.3e}; {hint}")]
    MetricDegenerate { i: usize, j: usize, det: f64, hint: String },

    #[error("linearized operator lost ellipticity at node ({i}, {j}): {detail}")]
    NotElliptic { i: usize, j: usize, detail: String },

    #[error("no convergence after {iterations} iterations; residual history {history:?}")]
    NoConvergence { iterations: usize, history: Vec<f64> },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("metric is not flat: |kappa|_C0 = {kappa:.3e} exceeds {tol:.3e}")]
    CurvatureTooLarge { kappa: f64, tol: f64 },

    #[error("immersion lost orientation at node ({i}, {j})")]
    Orientation { i: usize, j: usize },

    #[error("load is not balanced: int f = {mean:.3e}, int x f = ({mx:.3e}, {my:.3e}), allowed {tol:.3e}")]
    UnbalancedLoad { mean: f64, mx: f64, my: f64, tol: f64 },

    #[error("constraint det D2v = det D2v0 violated: L2 residual {residual:.3e} > {tol:.3e}")]
    ConstraintViolated { residual: f64, tol: f64 },

    #[error("Kirchhoff-Love map degenerates: det b^h = {det:.3e} at node ({i}, {j})")]
    ShellDegenerate { i: usize, j: usize, det: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
