//! Mixed-integer conic programs and a branch-and-bound engine over a
//! pluggable continuous backend.

mod backend;
mod bnb;
mod presolve;
mod program;

pub use backend::{
    solve_continuous, BackendResult, ContinuousBackend, ContinuousSolution, ContinuousStatus,
};
pub use bnb::{
    relative_gap, solve_michp, solve_michp_with, BnBConfig, BranchingRule, Clock, LimitKind,
    MipSolution, MipStatus, NoClock, SearchRule,
};
pub use presolve::{presolve, AffineRow, Presolved, SocBlock, StandardForm};
pub use program::{
    branch_class, ConicProgram, Integrality, LinExpr, LinearConstraint, QuadraticEquality, Sense,
    SocConstraint, VarId, Variable, Violation,
};
