//! First-order optimization on the variety of `m × n` real matrices of rank
//! at most `r`.
//!
//! The centerpiece is P²GDR: projected steepest descent with backtracking
//! line search, where every iteration also tries steps from rank-truncated
//! copies of the iterate down to its Δ-rank and keeps the best result. Every
//! accumulation point of the iterates it produces is stationary.
//!
//! Modules:
//! - [`linalg`]: SVD, numerical rank, Δ-rank, Eckart–Young truncation.
//! - [`variety`]: factored points, tangent-cone projection, stationarity
//!   measure, tangent-line distance bound.
//! - [`problems`]: cost functions and the built-in test problems.
//! - [`solver`]: the P²GD step, the rank-reduction search and the outer loops.
//! - [`checks`]: the property suite behind `boundedrank check`.
//! - [`cli`]: the experiment runner.

pub mod checks;
pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod problems;
pub mod sampling;
pub mod solver;
pub mod variety;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, RankParams, SvdFactorization};
pub use problems::{
    CostFunction, LowRankApproxProblem, MatrixCompletionProblem, UserPolynomialProblem,
};
pub use solver::{
    p2gd_plain, p2gd_step, p2gdr, p2gdr_search, Algorithm, IterationRecord, LineSearchParams,
    SolverParams, StepOutcome, Termination, Trace,
};
pub use variety::{StationarityReport, TangentDecomposition, VarietyPoint};
