//! A second-order cone program container and its solve contract.
//!
//! Programs are built from [`Affine`] expressions over real scalar variables,
//! always in maximization form. Complex quantities are lowered by the caller
//! into interleaved real/imaginary pairs ([`ConicProgram::add_complex_var`]).
//! [`solve`] hands the program to the Clarabel interior-point solver and
//! re-checks the returned point against the original rows.

mod affine;
mod dump;
mod error;
mod program;
mod solve;

pub use affine::Affine;
pub use dump::write_triplets;
pub use error::ConicError;
pub use program::{Census, ConicProgram, Constraint, GroupId, PsdFactor, Row, VarInfo, VarKind};
pub use solve::{solve, SolveOptions, SolveResult, SolveStatus};
