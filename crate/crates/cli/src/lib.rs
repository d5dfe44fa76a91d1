//! Command-line plumbing for `symrad`: configuration, dispatch and artifact
//! emission.

pub mod config;
pub mod fixtures;
pub mod plot;
pub mod run;

pub use config::{RunConfig, Task};
pub use run::{run, Outcome};

/// Why a run did not pass; maps onto the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// An inequality or acceptance check was violated.
    Violation(String),
    /// Unreadable, malformed or out-of-range configuration.
    Config(String),
    /// A solver or shooting step did not produce a solution.
    Solver(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Violation(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Violation(m) => write!(f, "violation: {m}"),
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl From<symrad::Error> for Failure {
    fn from(e: symrad::Error) -> Self {
        use symrad::Error::*;
        match e {
            Solver(_) | NoSolution(_) | TrivialSolution => Failure::Solver(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("io: {e}"))
    }
}
