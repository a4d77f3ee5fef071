//! Sampler backends: the contract, sample-set statistics, seeded
//! simulated annealing, and an exact branch-and-bound solver.

mod exact;
mod sa;

pub use exact::{ExactOutcome, ExactSolver};
pub use sa::SimulatedAnnealing;

use crate::model::{ConstraintSet, Qubo, VariableSet};
use std::fmt::Write as _;
use thiserror::Error;

/// One compiled subproblem handed to a sampler: the QUBO over active
/// variables plus the structures it was compiled from, so exact backends
/// can consume the constraint system directly.
pub struct Subproblem<'a> {
    pub qubo: &'a Qubo,
    pub vars: &'a VariableSet,
    pub cons: &'a ConstraintSet,
    /// Dense QUBO index -> universe variable index, lexicographic.
    pub dense: &'a [usize],
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("cannot sample an empty model")]
    EmptyModel,
    #[error("at least one read is required")]
    NoReads,
    #[error("{active} active variables exceed the exact solver limit of {limit}")]
    TooLarge { active: usize, limit: usize },
    #[error("constraint system is infeasible; conflict at {constraint}")]
    Infeasible { constraint: String },
}

/// A batch of assignments over the dense variable space with their exact
/// energies and the budget metadata that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub assignments: Vec<Vec<u8>>,
    pub energies: Vec<f64>,
    pub sweeps: usize,
    pub seed: u64,
}

impl SampleSet {
    pub fn reads(&self) -> usize {
        self.assignments.len()
    }

    /// Index of a minimum-energy read (first among ties).
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (i, &e) in self.energies.iter().enumerate() {
            if e < self.energies[best] {
                best = i;
            }
        }
        best
    }

    /// Per-variable frequency of ones across all reads; identical to the
    /// spin-form statistic `(mean(z) + 1) / 2` because `x = (z + 1) / 2`
    /// is affine and the mean commutes with it.
    pub fn one_body_expectations(&self) -> Vec<f64> {
        let m = self.assignments.len();
        let n = self.assignments.first().map_or(0, Vec::len);
        let mut exp = vec![0.0; n];
        for bits in &self.assignments {
            for (i, &b) in bits.iter().enumerate() {
                exp[i] += b as f64;
            }
        }
        for e in &mut exp {
            *e /= m as f64;
        }
        exp
    }

    /// CSV dump: `read,energy,bits` with bits in dense variable order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("read,energy,bits\n");
        for (r, (bits, e)) in self.assignments.iter().zip(&self.energies).enumerate() {
            let s: String = bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
            writeln!(out, "{r},{e},{s}").unwrap();
        }
        out
    }
}

/// The backend contract: `m` assignments for a seeded, deterministic run.
pub trait Sampler {
    fn sample(&self, problem: &Subproblem<'_>, m: usize, seed: u64) -> Result<SampleSet, SamplerError>;
    fn name(&self) -> &'static str;
}
