//! Fleet-sizing solver for the vehicle routing problem with time windows.
//!
//! The toolkit minimizes the number of vehicles needed to serve a set of
//! customers inside their time windows. It discretizes time into a small
//! grid, models routing decisions as binary arc variables
//! `x_{i,s,j,t}` ("leave node `i` at time `s`, then leave node `j` at
//! time `t`"), compiles the covering/flow equalities into a penalty QUBO,
//! and runs a greedy loop: sample the QUBO, keep the most confident arcs,
//! decompose them into depot-anchored path fragments over a DAG, commit
//! those fragments by pruning, and recompile the shrunken model until
//! nothing is left. Committed fragments concatenate into complete routes.
//!
//! Two interchangeable samplers drive the loop: seeded simulated annealing
//! and an exact branch-and-bound over the constraint system. An independent
//! oracle and a benchmark harness measure optimality gaps and feasibility
//! rates over seeded sub-instances of Solomon-format files.
//!
//! ```
//! use routegen::fixtures;
//! use routegen::greedy::{self, GreedyConfig};
//!
//! let (sub, grid, vars) = fixtures::fig1();
//! let cfg = GreedyConfig::exact();
//! let sol = greedy::run(&sub, &grid, vars, &cfg, 0).unwrap();
//! assert_eq!(sol.objective, 2);
//! ```

pub mod bench;
pub mod dagpath;
pub mod fixtures;
pub mod greedy;
pub mod grid;
pub mod instance;
pub mod model;
pub mod oracle;
pub mod samplers;

/// Derives a child seed from a master seed and a stream index.
///
/// SplitMix64 finalizer over `master + odd * (stream + 1)`; used for
/// per-iteration sampler seeds so runs are reproducible regardless of
/// how many streams a component consumes.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
