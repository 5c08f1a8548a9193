//! Self-contained LP/MILP machinery: a bounded-variable sparse primal
//! simplex, best-bound branch-and-bound with a relative gap target, and
//! fixed-format MPS export for cross-checking with external solvers.

mod bnb;
mod lu;
pub mod mps;
mod problem;
mod simplex;

use thiserror::Error;

pub use bnb::{relative_gap, solve_milp, BbEvent, MilpOptions, MilpSolution, MilpStatus};
pub use problem::{LpProblem, MilpProblem, Row, Sense, Tolerances};
pub use simplex::{solve_lp, solve_lp_warm, Basis, BasisStatus, LpSolution, LpStatus, SimplexOptions};

/// Structural problems with an LP/MILP that prevent solving it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("{what}: expected length {expected}, found {found}")]
    Dimension { what: &'static str, expected: usize, found: usize },
    #[error("row {row} references column {column} but there are {num_cols} columns")]
    ColumnIndex { row: usize, column: usize, num_cols: usize },
    #[error("row {row} lists column {column} twice")]
    DuplicateEntry { row: usize, column: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("integer column {0} has an infinite bound")]
    UnboundedInteger(usize),
}
