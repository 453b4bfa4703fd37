use std::fmt;

use ssl_core::Error;

/// A failed command: exit status plus the `ERROR code=... detail=...` line.
#[derive(Debug)]
pub struct Failure {
    pub exit: u8,
    pub code: &'static str,
    pub detail: String,
}

pub const USAGE: u8 = 2;
pub const VALIDATION: u8 = 3;
pub const SOLVER: u8 = 4;
pub const IO: u8 = 5;

impl Failure {
    pub fn usage(detail: impl Into<String>) -> Self {
        Failure {
            exit: USAGE,
            code: "usage",
            detail: detail.into(),
        }
    }

    pub fn invalid(code: &'static str, detail: impl Into<String>) -> Self {
        Failure {
            exit: VALIDATION,
            code,
            detail: detail.into(),
        }
    }

    pub fn io(path: &std::path::Path, err: impl fmt::Display) -> Self {
        Failure {
            exit: IO,
            code: "io",
            detail: format!("{}: {err}", path.display()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let detail = self.detail.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "ERROR code={} detail={detail}", self.code)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (exit, code) = match &e {
            Error::NotElliptic { .. } => (SOLVER, "not_elliptic"),
            Error::NoConvergence { .. } => (SOLVER, "no_convergence"),
            Error::Factorization(_) => (SOLVER, "factorization"),
            Error::Orientation { .. } => (SOLVER, "orientation"),
            Error::Io(_) => (IO, "io"),
            Error::Stencil { .. } => (VALIDATION, "stencil"),
            Error::GridMismatch => (VALIDATION, "grid_mismatch"),
            Error::EmptyMask => (VALIDATION, "empty_mask"),
            Error::InvalidGrid(_) => (VALIDATION, "invalid_grid"),
            Error::InvalidArgument(_) => (VALIDATION, "invalid_argument"),
            Error::UnknownNorm(_) => (VALIDATION, "unknown_norm"),
            Error::NotSymmetric(..) => (VALIDATION, "not_symmetric"),
            Error::MetricDegenerate { .. } => (VALIDATION, "metric_degenerate"),
            Error::CurvatureTooLarge { .. } => (VALIDATION, "curvature_too_large"),
            Error::UnbalancedLoad { .. } => (VALIDATION, "unbalanced_load"),
            Error::ConstraintViolated { .. } => (VALIDATION, "constraint_violated"),
            Error::ShellDegenerate { .. } => (VALIDATION, "shell_degenerate"),
            Error::Parse(_) => (VALIDATION, "parse"),
        };
        Failure {
            exit,
            code,
            detail: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_line_is_one_line() {
        let f = Failure::invalid("config", "line 3:\n  bad   value");
        assert_eq!(f.to_string(), "ERROR code=config detail=line 3: bad value");
        assert_eq!(f.exit, VALIDATION);
    }

    #[test]
    fn solver_errors_map_to_four() {
        let f = Failure::from(Error::NoConvergence {
            iterations: 3,
            history: vec![1.0],
        });
        assert_eq!((f.exit, f.code), (SOLVER, "no_convergence"));
        let f = Failure::from(Error::InvalidArgument("x".into()));
        assert_eq!((f.exit, f.code), (VALIDATION, "invalid_argument"));
    }
}
