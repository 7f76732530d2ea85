//! File handling, reports and experiment runners behind the `kwidth` binary.

pub mod experiments;
pub mod io;

use std::fmt;

use kwidth::absorption::AbsorptionError;
use kwidth::algebra::AlgebraError;
use kwidth::consistency::ConsistencyError;
use kwidth::constructions::ConstructionError;
use kwidth::instance::InstanceError;
use kwidth::patterns::PatternError;
use kwidth::solver::SolverError;

/// `git describe` of the source tree at build time, or `unknown`.
pub const BUILD_TAG: &str = env!("KWIDTH_BUILD_TAG");

/// A failure that ends a command, split by exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed input, failed validation: exit 2.
    Usage(String),
    /// A resource guard stopped the computation: exit 3.
    Guard(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Guard(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Guard(m) => write!(f, "resource guard: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError::Guard(e.to_string())
    }
}

impl From<AlgebraError> for CliError {
    fn from(e: AlgebraError) -> Self {
        match e {
            AlgebraError::ResourceLimit(_) => CliError::Guard(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<InstanceError> for CliError {
    fn from(e: InstanceError) -> Self {
        match e {
            InstanceError::Algebra(a) => a.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ConsistencyError> for CliError {
    fn from(e: ConsistencyError) -> Self {
        match e {
            ConsistencyError::Solver(s) => s.into(),
            ConsistencyError::Instance(i) => i.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ConstructionError> for CliError {
    fn from(e: ConstructionError) -> Self {
        match e {
            ConstructionError::Instance(i) => i.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<AbsorptionError> for CliError {
    fn from(e: AbsorptionError) -> Self {
        match e {
            AbsorptionError::Algebra(a) => a.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PatternError> for CliError {
    fn from(e: PatternError) -> Self {
        match e {
            PatternError::Solver(s) => s.into(),
            PatternError::Algebra(a) => a.into(),
            PatternError::Instance(i) => i.into(),
            PatternError::TooLarge(_) => CliError::Guard(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}
