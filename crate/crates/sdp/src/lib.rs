//! Dense semidefinite programming: a primal-dual interior-point solver and
//! SDPA sparse file exchange.

mod problem;
mod sdpa;
mod solver;

pub use problem::{
    Block, BlockKind, Constraint, LinearForm, Residuals, SdpError, SdpProblem, SdpSolution,
    SolveStatus, SparseSym,
};
pub use sdpa::{export_sdpa, export_solution, import_sdpa, import_solution, split_free};
pub use solver::{solve, SolverOptions};
