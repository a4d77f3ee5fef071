//! Ground truth and baselines computed outside the solve loop: the exact
//! optimum (cross-checked exhaustively on small models), a
//! sample-and-filter baseline, and a content-addressed result cache.

use crate::greedy::validate_routes;
use crate::grid::TimeGrid;
use crate::instance::{Node, SubInstance};
use crate::model::{
    build_constraints, compile_qubo, enumerate_variables, ConstraintSet, ModelError, Penalties,
    VarStatus, VariableSet,
};
use crate::samplers::{ExactSolver, Sampler, SamplerError, SimulatedAnnealing, Subproblem};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use thiserror::Error;

/// Exact search is refused above this many active variables.
pub const EXACT_LIMIT: usize = 600;

/// Models at most this large are re-solved by brute force as a check on
/// the branch-and-bound result.
pub const EXHAUSTIVE_LIMIT: usize = 22;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleResult {
    /// Minimum number of vehicles.
    pub optimum: usize,
    /// An optimal route set, stops as `(node, departure time)`.
    pub routes: Vec<Vec<(usize, f64)>>,
    /// Branch decisions the exact search explored.
    pub nodes: u64,
    /// True when brute-force enumeration confirmed the optimum.
    pub cross_checked: bool,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("optimal assignment does not decode into routes")]
    UndecodableOptimum,
    #[error("optimal routes fail validation: {0:?}")]
    InvalidOptimum(Vec<String>),
    #[error("exact search found {exact} vehicles but exhaustive enumeration found {exhaustive}")]
    CrossCheckMismatch { exact: usize, exhaustive: usize },
    #[error("cache I/O at {path}: {source}")]
    Cache {
        path: String,
        source: std::io::Error,
    },
}

/// Value of a universe variable under a dense assignment over the active
/// set; fixed variables contribute their constants.
fn universe_value(vars: &VariableSet, dense_of: &[usize], bits: &[u8], u: usize) -> f64 {
    match vars.status(u) {
        VarStatus::Fixed1(_) => 1.0,
        VarStatus::Fixed0(_) => 0.0,
        VarStatus::Active => f64::from(bits[dense_of[u]]),
    }
}

/// Reads a route set out of an assignment by walking set arcs from each
/// depot departure to the sink. Returns `None` unless every walk reaches
/// the sink unambiguously and every set arc is used by exactly one walk.
pub fn decode_routes(
    vars: &VariableSet,
    dense: &[usize],
    bits: &[u8],
    sub: &SubInstance,
    grid: &TimeGrid,
) -> Option<Vec<Vec<(usize, f64)>>> {
    let mut dense_of = vec![usize::MAX; vars.len()];
    for (d, &u) in dense.iter().enumerate() {
        dense_of[u] = d;
    }
    let set: Vec<usize> = (0..vars.len())
        .filter(|&u| universe_value(vars, &dense_of, bits, u) == 1.0)
        .collect();
    let sink = sub.sink();

    let mut used = vec![false; set.len()];
    let mut routes = Vec::new();
    for (start, &arc) in set.iter().enumerate() {
        if vars.key(arc).from != Node(0) {
            continue;
        }
        let mut route = vec![(0usize, 0.0f64)];
        let mut pos = start;
        for _ in 0..=sub.n {
            used[pos] = true;
            let key = vars.key(set[pos]);
            route.push((key.to.0, grid.time(key.dep_to)));
            if key.to == sink {
                break;
            }
            let mut next = None;
            for (cand, &other) in set.iter().enumerate() {
                let k = vars.key(other);
                if k.from == key.to && k.dep_from == key.dep_to {
                    if next.is_some() {
                        return None;
                    }
                    next = Some(cand);
                }
            }
            pos = next?;
        }
        if route.last().map(|&(n, _)| n) != Some(sink.0) {
            return None;
        }
        routes.push(route);
    }
    if used.iter().all(|&u| u) {
        Some(routes)
    } else {
        None
    }
}

/// Brute-force minimum vehicle count over every assignment of the active
/// variables that satisfies all live constraints exactly. States are
/// visited in Gray-code order so each step updates only the constraints
/// touching one flipped variable; coefficients are integers, so the
/// running residuals stay exact.
fn exhaustive_optimum(vars: &VariableSet, cons: &ConstraintSet, dense: &[usize]) -> Option<usize> {
    let n = dense.len();
    assert!(n <= EXHAUSTIVE_LIMIT, "exhaustive check over {n} variables");
    let mut dense_of = vec![usize::MAX; vars.len()];
    for (d, &u) in dense.iter().enumerate() {
        dense_of[u] = d;
    }

    let live: Vec<&crate::model::Constraint> = cons.iter().filter(|c| !c.removed).collect();
    let mut residual: Vec<f64> = live
        .iter()
        .map(|c| c.residual(|u| match vars.status(u) {
            VarStatus::Fixed1(_) => 1.0,
            _ => 0.0,
        }))
        .collect();
    let mut touches: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (ci, c) in live.iter().enumerate() {
        for &(u, a) in &c.members {
            if vars.is_active(u) {
                touches[dense_of[u]].push((ci, a));
            }
        }
    }
    let is_depot: Vec<bool> = (0..n).map(|d| vars.key(dense[d]).from == Node(0)).collect();

    let mut violated = residual.iter().filter(|r| r.abs() > 1e-9).count() as i64;
    let mut bits = vec![0u8; n];
    let mut vehicles = 0usize;
    let mut best: Option<usize> = None;
    for step in 0u64..(1u64 << n) {
        if step > 0 {
            let b = step.trailing_zeros() as usize;
            let delta = if bits[b] == 0 { 1.0 } else { -1.0 };
            bits[b] ^= 1;
            for &(ci, a) in &touches[b] {
                let was = residual[ci].abs() > 1e-9;
                residual[ci] += a * delta;
                violated += i64::from(residual[ci].abs() > 1e-9) - i64::from(was);
            }
            if is_depot[b] {
                vehicles = if bits[b] == 1 { vehicles + 1 } else { vehicles - 1 };
            }
        }
        if violated == 0 {
            best = Some(best.map_or(vehicles, |b: usize| b.min(vehicles)));
        }
    }
    best
}

/// Exact minimum fleet size for a discretized instance, computed from a
/// fresh enumeration. The optimal assignment is decoded into routes and
/// validated; small models are re-solved exhaustively as a second opinion.
pub fn optimum(sub: &SubInstance, grid: &TimeGrid) -> Result<OracleResult, OracleError> {
    let vars = enumerate_variables(sub, grid)?;
    let cons = build_constraints(&vars, sub);
    let outcome = ExactSolver::with_limit(EXACT_LIMIT).solve(&vars, &cons)?;
    let optimum = outcome.objective.round() as usize;

    let dense: Vec<usize> = vars.active_indices().collect();
    let routes = decode_routes(&vars, &dense, &outcome.bits, sub, grid)
        .ok_or(OracleError::UndecodableOptimum)?;
    let report = validate_routes(&routes, optimum, sub);
    if !report.is_feasible() {
        return Err(OracleError::InvalidOptimum(report.violations));
    }

    let mut cross_checked = false;
    if dense.len() <= EXHAUSTIVE_LIMIT {
        match exhaustive_optimum(&vars, &cons, &dense) {
            Some(ex) if ex == optimum => cross_checked = true,
            Some(ex) => {
                return Err(OracleError::CrossCheckMismatch { exact: optimum, exhaustive: ex })
            }
            None => {
                return Err(OracleError::Sampler(SamplerError::Infeasible {
                    constraint: "exhaustive enumeration found no feasible assignment".into(),
                }))
            }
        }
    }

    Ok(OracleResult {
        optimum,
        routes,
        nodes: outcome.nodes,
        cross_checked,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterOutcome {
    pub feasible: bool,
    pub objective: Option<usize>,
    pub routes: Vec<Vec<(usize, f64)>>,
    /// Reads drawn.
    pub reads: usize,
    /// Reads inspected, in ascending-energy order, before success (or all).
    pub checked: usize,
    pub seed: u64,
}

/// The one-shot baseline: draw `m` annealing reads of the full model, then
/// scan them from lowest energy up and keep the first assignment that
/// decodes into a feasible route set.
pub fn filtering_baseline(
    sub: &SubInstance,
    grid: &TimeGrid,
    m: usize,
    sweeps: usize,
    seed: u64,
) -> Result<FilterOutcome, OracleError> {
    let vars = enumerate_variables(sub, grid)?;
    let cons = build_constraints(&vars, sub);
    let (qubo, dense) = compile_qubo(&cons, &vars, Penalties::for_fleet_bound(sub.n))?;
    let problem = Subproblem { qubo: &qubo, vars: &vars, cons: &cons, dense: &dense };
    let set = SimulatedAnnealing::with_sweeps(sweeps).sample(&problem, m, seed)?;

    let mut order: Vec<usize> = (0..set.reads()).collect();
    order.sort_by(|&a, &b| set.energies[a].total_cmp(&set.energies[b]).then(a.cmp(&b)));
    for (scanned, &r) in order.iter().enumerate() {
        let Some(routes) = decode_routes(&vars, &dense, &set.assignments[r], sub, grid) else {
            continue;
        };
        if validate_routes(&routes, routes.len(), sub).is_feasible() {
            return Ok(FilterOutcome {
                feasible: true,
                objective: Some(routes.len()),
                routes,
                reads: m,
                checked: scanned + 1,
                seed,
            });
        }
    }
    Ok(FilterOutcome {
        feasible: false,
        objective: None,
        routes: Vec::new(),
        reads: m,
        checked: set.reads(),
        seed,
    })
}

/// Disk cache of oracle results, keyed by the instance's canonical JSON
/// and the grid, so repeated benchmark runs skip re-solving.
#[derive(Debug, Clone)]
pub struct OracleCache {
    dir: PathBuf,
}

impl OracleCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        OracleCache { dir: dir.into() }
    }

    fn key(sub: &SubInstance, grid: &TimeGrid) -> String {
        let mut hasher = Sha256::new();
        hasher.update(sub.canonical_json().as_bytes());
        hasher.update(b"\n");
        hasher.update(serde_json::to_string(grid).expect("grid serializes").as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Cached [`optimum`]: reads a stored result when present, otherwise
    /// computes and stores one. Unreadable cache entries are recomputed.
    pub fn optimum(&self, sub: &SubInstance, grid: &TimeGrid) -> Result<OracleResult, OracleError> {
        let path = self.dir.join(format!("{}.json", Self::key(sub, grid)));
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(cached) = serde_json::from_str::<OracleResult>(&text) {
                return Ok(cached);
            }
        }
        let result = optimum(sub, grid)?;
        let io = |source| OracleError::Cache { path: path.display().to_string(), source };
        std::fs::create_dir_all(&self.dir).map_err(io)?;
        std::fs::write(&path, serde_json::to_string_pretty(&result).expect("serializes"))
            .map_err(io)?;
        Ok(result)
    }
}
