//! Error type carrying the process exit code.
//!
//! Exit codes: `0` success, `2` configuration or input parsing, `3` numeric
//! failure, `4` violated singularity-related precondition.

use thiserror::Error;
use vessiot_core::expr::{EvalError, ExprError};
use vessiot_core::integrate::IntegrateError;
use vessiot_core::invman::InvmanError;
use vessiot_core::quasilinear::QuasilinearError;
use vessiot_core::streamlines::StreamlineError;
use vessiot_core::vessiot::VessiotError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, unreadable or malformed input files, invalid
    /// parameters. Exit code 2.
    #[error("{0}")]
    Config(String),
    /// A computation failed numerically. Exit code 3.
    #[error("{0}")]
    Numeric(String),
    /// A singularity-related precondition was violated (irregular starting
    /// point, singular Jacobian, non-stationary expansion point). Exit
    /// code 4.
    #[error("{0}")]
    Singular(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Singular(_) => 4,
        }
    }
}

impl From<ExprError> for CliError {
    fn from(e: ExprError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<VessiotError> for CliError {
    fn from(e: VessiotError) -> Self {
        match e {
            VessiotError::IrregularPoint => CliError::Singular(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<IntegrateError> for CliError {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::IrregularStart
            | IntegrateError::Vessiot(VessiotError::IrregularPoint) => {
                CliError::Singular(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<InvmanError> for CliError {
    fn from(e: InvmanError) -> Self {
        match e {
            InvmanError::SingularJacobian { .. } | InvmanError::NotStationary { .. } => {
                CliError::Singular(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<QuasilinearError> for CliError {
    fn from(e: QuasilinearError) -> Self {
        match e {
            QuasilinearError::NotQuasiLinear { .. }
            | QuasilinearError::RequiresDetermined { .. } => CliError::Config(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<StreamlineError> for CliError {
    fn from(e: StreamlineError) -> Self {
        match e {
            StreamlineError::InvalidParams(_) => CliError::Config(e.to_string()),
            StreamlineError::EmptyResult => CliError::Numeric(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_class() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Numeric("x".into()).exit_code(), 3);
        assert_eq!(CliError::Singular("x".into()).exit_code(), 4);
    }

    #[test]
    fn module_errors_map_to_the_right_class() {
        let e: CliError = IntegrateError::IrregularStart.into();
        assert_eq!(e.exit_code(), 4);
        let e: CliError = VessiotError::NoConvergence {
            iterations: 5,
            residual: 1.0,
        }
        .into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = StreamlineError::EmptyResult.into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = StreamlineError::InvalidParams("bad".into()).into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = InvmanError::NotStationary { residual: 1.0 }.into();
        assert_eq!(e.exit_code(), 4);
    }
}
