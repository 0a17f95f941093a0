//! Embedded linear and mixed-integer programming engine.
//!
//! [`solve_lp`] runs a bounded-variable revised primal simplex on a sparse
//! LU-factored basis; [`solve_milp`] wraps it in best-bound branch-and-bound
//! with depth-first plunging. Everything is plain `f64` arithmetic with the
//! tolerances reported alongside each result.

mod bnb;
mod error;
mod lu;
mod model;
mod simplex;

pub use bnb::{solve_milp, MilpOptions, MilpSolution, MilpStatus};
pub use error::MilpError;
pub use model::{LinearProgram, Milp, Relation, Row, Sense};
pub use simplex::{
    certificate_margin, solve_lp, solve_lp_from, Basis, LpSolution, LpStatus, Tolerances,
    VarState,
};
