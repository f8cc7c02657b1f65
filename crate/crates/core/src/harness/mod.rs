//! Studies, demos and configuration behind the `pe-fem` binary.

pub mod cases;
pub mod study;
pub mod acoustic_demo;
pub mod config;
pub mod run;

use crate::coercivity::CoercivityError;
use crate::discretization::DiscretizationError;
use crate::problem::ProblemError;
use crate::projection::ProjectionError;
use crate::report::ReportError;
use crate::solver::SolverError;
use crate::stepper::StepError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Coercivity(#[from] CoercivityError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// 2 for bad input or data that fails the well-posedness checks, 3 for
    /// failures inside the numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_)
            | HarnessError::Problem(_)
            | HarnessError::Coercivity(_)
            | HarnessError::Discretization(_) => 2,
            HarnessError::Projection(ProjectionError::TooFewResolutions(..)) => 2,
            HarnessError::Step(StepError::InvalidPlan(_) | StepError::StepTooLarge { .. } | StepError::OutOfRange { .. }) => 2,
            HarnessError::Step(_) | HarnessError::Projection(_) | HarnessError::Solver(_) => 3,
            HarnessError::Report(_) | HarnessError::Io { .. } => 3,
        }
    }
}
