//! Arc-variable model: enumeration with pre-processing, equality
//! constraints, and penalty-QUBO compilation with Ising conversion.
//!
//! A variable `x[i,s,j,t]` reads "leave node `i` at time `s`, then leave
//! node `j` at time `t`". Pre-processing fixes to 0 every variable that
//! cannot appear in a feasible route; the survivors form the active set
//! the solver works on.

mod constraints;
mod qubo;
mod vars;

pub use constraints::{build_constraints, Constraint, ConstraintKind, ConstraintSet};
pub use qubo::{
    compile_qubo, export_qubo_text, parse_qubo_text, reference_energy, to_ising, IsingModel,
    Penalties, Qubo,
};
pub use vars::{
    earliest_service_start, enumerate_variables, exclusion_rule, varmap_csv, FixReason, VarKey,
    VarStatus, VariableSet,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("customer {id} has no active {direction} variable; instance infeasible under this grid")]
    DisconnectedCustomer { id: usize, direction: &'static str },
    #[error("variable {index} is already fixed")]
    FixConflict { index: usize },
    #[error("penalty weights must be positive, got coverage {coverage}, flow {flow}")]
    BadPenalty { coverage: f64, flow: f64 },
    #[error("QUBO text line {line}: {message}")]
    BadQuboText { line: usize, message: String },
}
