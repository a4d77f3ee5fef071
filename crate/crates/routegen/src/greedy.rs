//! The outer solve loop: sample the penalty model, select confident
//! variables, extract customer-disjoint paths, and prune the system until
//! no variable remains. Committed paths become the fleet's routes.

use crate::dagpath::{build_dag, extract_disjoint_paths, DagError, ExtractionStrategy, Path, Tuple};
use crate::grid::TimeGrid;
use crate::instance::{Node, SubInstance};
use crate::model::{
    build_constraints, compile_qubo, ConstraintSet, FixReason, ModelError, Penalties, VariableSet,
    VarStatus,
};
use crate::samplers::{ExactSolver, Sampler, SamplerError, SimulatedAnnealing, Subproblem};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum Selection {
    /// Keep the top `ceil(theta * n)` variables by expectation, ties
    /// broken lexicographically on the variable key.
    Fraction(f64),
    /// Keep every variable whose expectation reaches `theta`.
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Sa,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub backend: Backend,
    pub selection: Selection,
    /// Reads per sampler call.
    pub reads: usize,
    /// Annealing sweeps per read; ignored by the exact backend.
    pub sweeps: usize,
    /// Penalty weights; `None` derives them from the fleet bound.
    pub penalties: Option<Penalties>,
    pub extraction: ExtractionStrategy,
    pub max_iterations: usize,
    /// Iterations without any pruning before corrective action.
    pub patience: usize,
    /// Largest residual system the stall fallback hands to the exact solver.
    pub fallback_limit: usize,
    /// Hard cap for the exact backend itself.
    pub exact_limit: usize,
}

impl GreedyConfig {
    /// Exact backend: one read per iteration, support selection.
    pub fn exact() -> Self {
        Self {
            backend: Backend::Exact,
            selection: Selection::Threshold(0.9),
            reads: 1,
            sweeps: 0,
            penalties: None,
            extraction: ExtractionStrategy::MultiplePaths,
            max_iterations: 1000,
            patience: 10,
            fallback_limit: 40,
            exact_limit: 600,
        }
    }

    /// Annealing backend with the default budget.
    pub fn sa() -> Self {
        Self {
            backend: Backend::Sa,
            selection: Selection::Fraction(0.5),
            reads: 1000,
            sweeps: 1000,
            penalties: None,
            extraction: ExtractionStrategy::MultiplePaths,
            max_iterations: 1000,
            patience: 10,
            fallback_limit: 40,
            exact_limit: 600,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub l: usize,
    pub active_count: usize,
    pub selected_count: usize,
    pub paths_found: usize,
    pub best_energy: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    /// Stops as `(node, departure time)`, depot first, sink last.
    pub routes: Vec<Vec<(usize, f64)>>,
    /// Fleet size: the number of routes.
    pub objective: usize,
    pub feasible: bool,
    pub seed: u64,
    pub config: GreedyConfig,
    pub version: &'static str,
    #[serde(skip)]
    pub trace: Vec<IterationRecord>,
}

impl Solution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    /// One JSON object per iteration, newline separated.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.trace {
            writeln!(out, "{}", serde_json::to_string(rec).expect("record serializes")).unwrap();
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum GreedyError {
    #[error("configuration invalid: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error("pruning would overwrite variable {index} with a conflicting value")]
    ConflictingFix { index: usize },
    #[error("path join invariant broken: {0}")]
    BrokenJoin(String),
    #[error("stalled: {reason} ({active} variables active)")]
    Stall {
        reason: String,
        active: usize,
        trace: Vec<IterationRecord>,
    },
}

/// One fix applied during pruning, in application order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PruneEvent {
    pub index: usize,
    pub value: bool,
    pub reason: FixReason,
}

pub type PruneTrace = Vec<PruneEvent>;

/// Dense indices selected from an expectation vector.
pub fn select_variables(exps: &[f64], selection: Selection) -> Result<Vec<usize>, GreedyError> {
    match selection {
        Selection::Fraction(theta) => {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(GreedyError::BadConfig(format!(
                    "selection fraction must lie in (0, 1), got {theta}"
                )));
            }
            let count = (theta * exps.len() as f64).ceil() as usize;
            let mut order: Vec<usize> = (0..exps.len()).collect();
            order.sort_by(|&a, &b| exps[b].total_cmp(&exps[a]).then(a.cmp(&b)));
            let mut keep: Vec<usize> = order.into_iter().take(count).collect();
            keep.sort_unstable();
            Ok(keep)
        }
        Selection::Threshold(theta) => {
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(GreedyError::BadConfig(format!(
                    "selection threshold must lie in (0, 1], got {theta}"
                )));
            }
            Ok((0..exps.len()).filter(|&i| exps[i] >= theta).collect())
        }
    }
}

fn fix(
    vars: &mut VariableSet,
    trace: &mut PruneTrace,
    index: usize,
    value: bool,
    reason: FixReason,
) -> Result<(), GreedyError> {
    match (vars.status(index), value) {
        (VarStatus::Active, true) => vars.fix1(index, reason).map_err(|_| GreedyError::ConflictingFix { index })?,
        (VarStatus::Active, false) => vars.fix0(index, reason).map_err(|_| GreedyError::ConflictingFix { index })?,
        (VarStatus::Fixed1(_), true) | (VarStatus::Fixed0(_), false) => return Ok(()),
        _ => return Err(GreedyError::ConflictingFix { index }),
    }
    trace.push(PruneEvent { index, value, reason });
    Ok(())
}

/// Folds a new path into the committed set. A path whose first customer
/// continues a committed path is appended to it; one whose last customer
/// starts a committed path is prepended; both at once bridges two paths.
/// Junction node-time tuples must agree exactly, and the junction's flow
/// (and, when the junction was a committed path's start, its coverage)
/// leaves the constraint system because the junction is now interior.
pub fn concat(
    paths: &mut Vec<Path>,
    p: Path,
    cons: &mut ConstraintSet,
    sub: &SubInstance,
) -> Result<(), GreedyError> {
    let sink = sub.sink();
    let is_customer = |t: Tuple| t.node != Node(0) && t.node != sink;
    let first = p.first();
    let last = p.last();
    let start_join = is_customer(first)
        .then(|| paths.iter().position(|q| q.last().node == first.node))
        .flatten();
    let end_join = is_customer(last)
        .then(|| paths.iter().position(|q| q.first().node == last.node))
        .flatten();

    if let (Some(a), Some(b)) = (start_join, end_join) {
        if a == b {
            return Err(GreedyError::BrokenJoin(format!(
                "path through nodes {:?} would close a cycle",
                p.tuples.iter().map(|t| t.node.0).collect::<Vec<_>>()
            )));
        }
    }
    if let Some(a) = start_join {
        let junction = paths[a].last();
        if junction != first {
            return Err(GreedyError::BrokenJoin(format!(
                "join tuples disagree: committed path ends at ({}, s{}), new path starts at ({}, s{})",
                junction.node.0, junction.dep, first.node.0, first.dep
            )));
        }
        cons.remove_flow(first.node, first.dep);
    }
    if let Some(b) = end_join {
        let junction = paths[b].first();
        if junction != last {
            return Err(GreedyError::BrokenJoin(format!(
                "join tuples disagree: committed path starts at ({}, s{}), new path ends at ({}, s{})",
                junction.node.0, junction.dep, last.node.0, last.dep
            )));
        }
        cons.remove_flow(last.node, last.dep);
        cons.remove_coverage(last.node);
    }

    match (start_join, end_join) {
        (None, None) => paths.push(p),
        (Some(a), None) => {
            paths[a].tuples.extend_from_slice(&p.tuples[1..]);
            paths[a].arcs.extend_from_slice(&p.arcs);
        }
        (None, Some(b)) => {
            let mut merged = p;
            merged.tuples.extend_from_slice(&paths[b].tuples[1..]);
            merged.arcs.extend_from_slice(&paths[b].arcs);
            paths[b] = merged;
        }
        (Some(a), Some(b)) => {
            let mut merged = paths[a].clone();
            merged.tuples.extend_from_slice(&p.tuples[1..]);
            merged.arcs.extend_from_slice(&p.arcs);
            merged.tuples.extend_from_slice(&paths[b].tuples[1..]);
            merged.arcs.extend_from_slice(&paths[b].arcs);
            paths[a] = merged;
            paths.remove(b);
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    DepotStart,
    ExposedStart,
    Interior,
    ExposedEnd,
    SinkEnd,
}

/// Commits the paths of `q`: each is first concatenated onto the committed
/// set, then its arcs are fixed to one, and the variables its node-time
/// tuples rule out are fixed to zero. Along each path the events run tuple
/// by tuple: the departing arc, then incoming exclusions in lexicographic
/// order, then outgoing exclusions in lexicographic order. Satisfied
/// coverage rows and interior flow rows leave the constraint system.
pub fn prune(
    paths: &mut Vec<Path>,
    vars: &mut VariableSet,
    q: &[Path],
    cons: &mut ConstraintSet,
    sub: &SubInstance,
) -> Result<PruneTrace, GreedyError> {
    let sink = sub.sink();
    let mut incoming_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut outgoing_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..vars.len() {
        let k = vars.key(i);
        incoming_of.entry(k.to.0).or_default().push(i);
        outgoing_of.entry(k.from.0).or_default().push(i);
    }
    let empty: Vec<usize> = Vec::new();

    let mut trace = PruneTrace::new();
    for p in q {
        concat(paths, p.clone(), cons, sub)?;

        let lastk = p.tuples.len() - 1;
        for (k, &tuple) in p.tuples.iter().enumerate() {
            let role = match (k, tuple.node) {
                (0, n) if n == Node(0) => Role::DepotStart,
                (0, _) => Role::ExposedStart,
                (k, n) if k == lastk && n == sink => Role::SinkEnd,
                (k, _) if k == lastk => Role::ExposedEnd,
                _ => Role::Interior,
            };

            if k < lastk {
                fix(vars, &mut trace, p.arcs[k], true, FixReason::AlongPath)?;
            }
            if role == Role::DepotStart || role == Role::SinkEnd {
                continue;
            }

            let full_incoming = role != Role::ExposedStart;
            let full_outgoing = role != Role::ExposedEnd;

            for &i in incoming_of.get(&tuple.node.0).unwrap_or(&empty) {
                let key = vars.key(i);
                if key.dep_to != tuple.dep {
                    fix(vars, &mut trace, i, false, FixReason::IncomingOtherTime)?;
                } else if full_incoming {
                    let pred = p.tuples[k - 1];
                    if (key.from, key.dep_from) != (pred.node, pred.dep) {
                        fix(vars, &mut trace, i, false, FixReason::IncomingWrongPredecessor)?;
                    }
                }
            }
            for &i in outgoing_of.get(&tuple.node.0).unwrap_or(&empty) {
                let key = vars.key(i);
                if key.dep_from != tuple.dep {
                    fix(vars, &mut trace, i, false, FixReason::OutgoingOtherTime)?;
                } else if full_outgoing {
                    let succ = p.tuples[k + 1];
                    if (key.to, key.dep_to) != (succ.node, succ.dep) {
                        fix(vars, &mut trace, i, false, FixReason::OutgoingWrongSuccessor)?;
                    }
                }
            }

            if role == Role::Interior {
                cons.remove_flow(tuple.node, tuple.dep);
            }
            if k != 0 && tuple.node != sink {
                cons.remove_coverage(tuple.node);
            }
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub violations: Vec<String>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a set of routes against the instance: every customer appears
/// exactly once, every route runs depot to sink with service start inside
/// each window under earliest-arrival propagation, the vehicle returns by
/// the depot's closing time, and the objective equals the route count.
pub fn validate_routes(
    routes: &[Vec<(usize, f64)>],
    objective: usize,
    sub: &SubInstance,
) -> FeasibilityReport {
    const EPS: f64 = 1e-9;
    let sink = sub.sink().0;
    let mut violations = Vec::new();
    let mut visits: BTreeMap<usize, usize> = BTreeMap::new();

    for (r, route) in routes.iter().enumerate() {
        if route.len() < 2 {
            violations.push(format!("route {r} has fewer than two stops"));
            continue;
        }
        if route[0] != (0, 0.0) {
            violations.push(format!("route {r} does not start at the depot at time 0"));
        }
        if route.last().unwrap().0 != sink {
            violations.push(format!("route {r} does not end at the sink"));
        }
        let mut depart = route[0].1;
        let mut prev = Node(route[0].0);
        for &(node, declared) in &route[1..] {
            let v = Node(node);
            if node == sink {
                let arrival = depart + sub.dist(prev, v);
                if arrival > sub.depot.due + EPS {
                    violations.push(format!(
                        "route {r} returns at {arrival}, after the depot closes at {}",
                        sub.depot.due
                    ));
                }
                break;
            }
            *visits.entry(node).or_insert(0) += 1;
            let (ready, due) = sub.window(v);
            let start = (depart + sub.dist(prev, v)).max(ready);
            if start > due + EPS {
                violations.push(format!(
                    "route {r}: customer {node} service starts at {start}, window closes at {due}"
                ));
            }
            let earliest_departure = start + sub.service(v);
            if declared + EPS < earliest_departure {
                violations.push(format!(
                    "route {r}: customer {node} departs at {declared}, before service ends at {earliest_departure}"
                ));
            }
            depart = declared;
            prev = v;
        }
    }

    for c in sub.customer_nodes() {
        match visits.get(&c.0).copied().unwrap_or(0) {
            0 => violations.push(format!("customer {} is not visited", c.0)),
            1 => {}
            k => violations.push(format!("customer {} is visited {k} times", c.0)),
        }
    }
    if objective != routes.len() {
        violations.push(format!(
            "objective {objective} does not equal the route count {}",
            routes.len()
        ));
    }
    FeasibilityReport { violations }
}

pub fn validate_solution(sol: &Solution, sub: &SubInstance) -> FeasibilityReport {
    validate_routes(&sol.routes, sol.objective, sub)
}

fn check_config(config: &GreedyConfig) -> Result<(), GreedyError> {
    match config.selection {
        Selection::Fraction(t) if !(t > 0.0 && t < 1.0) => {
            return Err(GreedyError::BadConfig(format!("fraction {t} outside (0, 1)")))
        }
        Selection::Threshold(t) if !(t > 0.0 && t <= 1.0) => {
            return Err(GreedyError::BadConfig(format!("threshold {t} outside (0, 1]")))
        }
        _ => {}
    }
    if config.reads == 0 {
        return Err(GreedyError::BadConfig("at least one read is required".into()));
    }
    if config.max_iterations == 0 {
        return Err(GreedyError::BadConfig("at least one iteration is required".into()));
    }
    Ok(())
}

/// Runs the full loop on an enumerated variable universe until every
/// variable is fixed, then assembles and validates the routes.
pub fn run(
    sub: &SubInstance,
    grid: &TimeGrid,
    mut vars: VariableSet,
    config: &GreedyConfig,
    seed: u64,
) -> Result<Solution, GreedyError> {
    check_config(config)?;
    let penalties = config.penalties.unwrap_or_else(|| Penalties::for_fleet_bound(sub.n));
    let mut cons = build_constraints(&vars, sub);
    let mut paths: Vec<Path> = Vec::new();
    let mut trace: Vec<IterationRecord> = Vec::new();

    let mut backend = config.backend;
    let mut selection = config.selection;
    let mut sweeps = config.sweeps;
    let mut budget_raised = false;
    let mut stalled = 0usize;

    for l in 0..config.max_iterations {
        if vars.active_count() == 0 {
            break;
        }
        let started = Instant::now();
        let (qubo, dense) = compile_qubo(&cons, &vars, penalties)?;
        let problem = Subproblem { qubo: &qubo, vars: &vars, cons: &cons, dense: &dense };
        let iter_seed = crate::derive_seed(seed, l as u64);
        let sample_set = match backend {
            Backend::Sa => SimulatedAnnealing::with_sweeps(sweeps).sample(&problem, config.reads, iter_seed)?,
            Backend::Exact => ExactSolver::with_limit(config.exact_limit).sample(&problem, config.reads, iter_seed)?,
        };
        let exps = sample_set.one_body_expectations();
        let picked = select_variables(&exps, selection)?;
        let selected: Vec<usize> = picked.into_iter().map(|d| dense[d]).collect();

        let dag = build_dag(&vars, &selected, sub.sink())?;
        let q = extract_disjoint_paths(&dag, config.extraction);
        let active_before = vars.active_count();
        let events = prune(&mut paths, &mut vars, &q, &mut cons, sub)?;

        trace.push(IterationRecord {
            l,
            active_count: active_before,
            selected_count: selected.len(),
            paths_found: q.len(),
            best_energy: sample_set.energies[sample_set.best()],
            wall_ms: started.elapsed().as_millis() as u64,
        });

        if events.is_empty() {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if stalled >= config.patience {
            if backend != Backend::Exact && vars.active_count() <= config.fallback_limit {
                backend = Backend::Exact;
                selection = Selection::Threshold(0.9);
                stalled = 0;
            } else if backend == Backend::Sa && !budget_raised {
                sweeps *= 4;
                budget_raised = true;
                stalled = 0;
            } else {
                return Err(GreedyError::Stall {
                    reason: format!("no pruning progress in {} iterations", config.patience),
                    active: vars.active_count(),
                    trace,
                });
            }
        }
    }

    if vars.active_count() > 0 {
        return Err(GreedyError::Stall {
            reason: format!("iteration budget {} exhausted", config.max_iterations),
            active: vars.active_count(),
            trace,
        });
    }
    for p in &paths {
        if p.first() != (Tuple { node: Node(0), dep: 0 }) || p.last().node != sub.sink() {
            return Err(GreedyError::Stall {
                reason: format!(
                    "committed fragment {:?} is not anchored depot to sink",
                    p.tuples.iter().map(|t| (t.node.0, t.dep)).collect::<Vec<_>>()
                ),
                active: 0,
                trace,
            });
        }
    }

    let routes: Vec<Vec<(usize, f64)>> = paths
        .iter()
        .map(|p| p.tuples.iter().map(|t| (t.node.0, grid.time(t.dep))).collect())
        .collect();
    let objective = routes.len();
    let feasible = validate_routes(&routes, objective, sub).is_feasible();
    Ok(Solution {
        routes,
        objective,
        feasible,
        seed,
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION"),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::VarKey;

    fn key(from: usize, s: usize, to: usize, t: usize) -> VarKey {
        VarKey { from: Node(from), dep_from: s, to: Node(to), dep_to: t }
    }

    fn tup(node: usize, dep: usize) -> Tuple {
        Tuple { node: Node(node), dep }
    }

    fn path(vars: &VariableSet, tuples: Vec<Tuple>) -> Path {
        let arcs = tuples
            .windows(2)
            .map(|w| {
                vars.index_of(&VarKey {
                    from: w[0].node,
                    dep_from: w[0].dep,
                    to: w[1].node,
                    dep_to: w[1].dep,
                })
                .expect("arc exists")
            })
            .collect();
        Path { tuples, arcs }
    }

    #[test]
    fn fraction_selection_takes_the_top_share_with_lex_ties() {
        let picked = select_variables(&[0.5; 10], Selection::Fraction(0.5)).unwrap();
        assert_eq!(picked, vec![0, 1, 2, 3, 4]);

        let picked = select_variables(&[1.0, 0.9, 0.1, 0.0], Selection::Fraction(0.5)).unwrap();
        assert_eq!(picked, vec![0, 1]);

        let picked = select_variables(&[0.1, 0.9, 0.1], Selection::Fraction(0.5)).unwrap();
        assert_eq!(picked, vec![0, 1], "ceil(1.5) = 2, tie at 0.1 goes to index 0");
    }

    #[test]
    fn threshold_selection_keeps_confident_variables_only() {
        let picked = select_variables(&[1.0, 0.89, 0.9, 0.0], Selection::Threshold(0.9)).unwrap();
        assert_eq!(picked, vec![0, 2]);
        assert!(select_variables(&[0.5], Selection::Fraction(1.0)).is_err());
        assert!(select_variables(&[0.5], Selection::Threshold(0.0)).is_err());
    }

    #[test]
    fn prune_replays_the_two_path_walkthrough_event_for_event() {
        let (sub, _grid, mut vars) = fixtures::fig1();
        let mut cons = build_constraints(&vars, &sub);
        let mut committed = Vec::new();
        let p1 = path(&vars, vec![tup(1, 1), tup(3, 2)]);
        let p2 = path(&vars, vec![tup(0, 0), tup(2, 3), tup(3, 3)]);

        let lookup = vars.clone();
        let idx = move |f, s, t, d| lookup.index_of(&key(f, s, t, d)).unwrap();
        let want = vec![
            (idx(1, 1, 3, 2), true, FixReason::AlongPath),
            (idx(0, 0, 1, 2), false, FixReason::IncomingOtherTime),
            (idx(0, 0, 1, 3), false, FixReason::IncomingOtherTime),
            (idx(1, 2, 3, 3), false, FixReason::OutgoingOtherTime),
            (idx(1, 3, 3, 3), false, FixReason::OutgoingOtherTime),
            (idx(0, 0, 2, 3), true, FixReason::AlongPath),
            (idx(2, 3, 3, 3), true, FixReason::AlongPath),
            (idx(0, 0, 2, 2), false, FixReason::IncomingOtherTime),
            (idx(2, 2, 3, 3), false, FixReason::OutgoingOtherTime),
        ];

        let events = prune(&mut committed, &mut vars, &[p1, p2], &mut cons, &sub).unwrap();
        let got: Vec<(usize, bool, FixReason)> =
            events.iter().map(|e| (e.index, e.value, e.reason)).collect();
        assert_eq!(got, want);

        let survivors: Vec<usize> = vars.active_indices().collect();
        assert_eq!(survivors, vec![idx(0, 0, 1, 1)], "only the first depot arc stays active");
        assert!(cons.coverage(Node(2)).unwrap().removed);
        assert!(!cons.coverage(Node(1)).unwrap().removed, "exposed start keeps its coverage");
        assert!(cons.flow(Node(2), 3).unwrap().removed, "interior tuple flow is substituted away");
        assert!(!cons.flow(Node(1), 1).unwrap().removed, "exposed start keeps its flow");
    }

    #[test]
    fn recompiled_model_after_the_walkthrough_is_the_frozen_one_variable_system() {
        let (sub, _grid, mut vars) = fixtures::fig1();
        let mut cons = build_constraints(&vars, &sub);
        let mut committed = Vec::new();
        let p1 = path(&vars, vec![tup(1, 1), tup(3, 2)]);
        let p2 = path(&vars, vec![tup(0, 0), tup(2, 3), tup(3, 3)]);
        prune(&mut committed, &mut vars, &[p1, p2], &mut cons, &sub).unwrap();

        let (qubo, dense) = compile_qubo(&cons, &vars, Penalties::for_fleet_bound(sub.n)).unwrap();
        assert_eq!(qubo.n, 1);
        assert_eq!(dense, vec![vars.index_of(&key(0, 0, 1, 1)).unwrap()]);
        assert_eq!(qubo.diag, vec![-9.0]);
        assert!(qubo.pairs.is_empty());
        assert_eq!(qubo.offset, 11.0);
        assert_eq!(qubo.energy(&[1]), 2.0, "taking the arc completes both routes");
        assert_eq!(qubo.energy(&[0]), 11.0, "dropping it strands customer 1");
    }

    #[test]
    fn second_iteration_joins_the_fragment_and_empties_the_system() {
        let (sub, _grid, mut vars) = fixtures::fig1();
        let mut cons = build_constraints(&vars, &sub);
        let mut committed = Vec::new();
        let p1 = path(&vars, vec![tup(1, 1), tup(3, 2)]);
        let p2 = path(&vars, vec![tup(0, 0), tup(2, 3), tup(3, 3)]);
        prune(&mut committed, &mut vars, &[p1, p2], &mut cons, &sub).unwrap();

        let p3 = path(&vars, vec![tup(0, 0), tup(1, 1)]);
        let events = prune(&mut committed, &mut vars, &[p3], &mut cons, &sub).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].value, true);
        assert_eq!(vars.active_count(), 0);
        assert!(cons.coverage(Node(1)).unwrap().removed);
        assert!(cons.flow(Node(1), 1).unwrap().removed);

        assert_eq!(committed.len(), 2);
        assert_eq!(committed[0].tuples, vec![tup(0, 0), tup(1, 1), tup(3, 2)]);
        assert_eq!(committed[1].tuples, vec![tup(0, 0), tup(2, 3), tup(3, 3)]);
    }

    #[test]
    fn empty_q_changes_nothing() {
        let (sub, _grid, mut vars) = fixtures::fig1();
        let mut cons = build_constraints(&vars, &sub);
        let mut committed = Vec::new();
        let before = vars.active_count();
        let events = prune(&mut committed, &mut vars, &[], &mut cons, &sub).unwrap();
        assert!(events.is_empty());
        assert_eq!(vars.active_count(), before);
        assert!(committed.is_empty());
    }

    #[test]
    fn bridging_join_merges_three_fragments_into_one_route() {
        // Three customers in a line, each reachable one step after the
        // previous: 0 -> 1 -> 2 -> 3 -> sink(4).
        let keys = vec![
            key(0, 0, 1, 1),
            key(1, 1, 2, 2),
            key(2, 2, 3, 3),
            key(3, 3, 4, 4),
        ];
        let sub = fixtures::line_instance(3);
        let vars = VariableSet::from_keys(keys);
        let mut cons = build_constraints(&vars, &sub);
        let mut committed = Vec::new();
        let mut work = vars.clone();

        let middle = path(&work, vec![tup(1, 1), tup(2, 2)]);
        prune(&mut committed, &mut work, &[middle], &mut cons, &sub).unwrap();
        assert_eq!(committed.len(), 1);

        let head = path(&work, vec![tup(0, 0), tup(1, 1)]);
        let tail = path(&work, vec![tup(2, 2), tup(3, 3), tup(4, 4)]);
        prune(&mut committed, &mut work, &[head, tail], &mut cons, &sub).unwrap();
        assert_eq!(committed.len(), 1);
        assert_eq!(
            committed[0].tuples,
            vec![tup(0, 0), tup(1, 1), tup(2, 2), tup(3, 3), tup(4, 4)]
        );
        assert_eq!(work.active_count(), 0);
        for c in 1..=3 {
            assert!(cons.coverage(Node(c)).unwrap().removed, "customer {c}");
        }
    }

    #[test]
    fn interior_customers_lose_every_incident_variable() {
        let (sub, _grid, mut vars) = fixtures::fig1();
        let mut cons = build_constraints(&vars, &sub);
        let mut committed = Vec::new();
        let p2 = path(&vars, vec![tup(0, 0), tup(2, 3), tup(3, 3)]);
        prune(&mut committed, &mut vars, &[p2], &mut cons, &sub).unwrap();

        for i in 0..vars.len() {
            let k = vars.key(i);
            if k.from == Node(2) || k.to == Node(2) {
                assert!(!vars.is_active(i), "variable {i} incident to interior customer 2");
            }
        }
    }

    #[test]
    fn run_with_exact_backend_solves_the_bundled_example_in_one_iteration() {
        let (sub, grid, vars) = fixtures::running_example();
        let cfg = GreedyConfig::exact();
        let sol = run(&sub, &grid, vars, &cfg, 0).unwrap();
        assert_eq!(sol.objective, 2);
        assert!(sol.feasible);
        assert_eq!(sol.trace.len(), 1, "the exact backend commits everything at once");
        let mut sequences: Vec<Vec<usize>> = sol
            .routes
            .iter()
            .map(|r| r[1..r.len() - 1].iter().map(|&(n, _)| n).collect())
            .collect();
        sequences.sort();
        assert_eq!(sequences, vec![vec![1], vec![2]]);
    }

    #[test]
    fn run_with_annealing_backend_matches_for_ten_seeds() {
        let (sub, grid, vars) = fixtures::running_example();
        let mut cfg = GreedyConfig::sa();
        cfg.reads = 64;
        cfg.sweeps = 128;
        for seed in 0..10 {
            let sol = run(&sub, &grid, vars.clone(), &cfg, seed).unwrap();
            assert_eq!(sol.objective, 2, "seed {seed}");
            assert!(sol.feasible, "seed {seed}");
        }
    }

    #[test]
    fn active_counts_shrink_monotonically_and_strictly_on_progress() {
        let (sub, grid, vars) = fixtures::running_example();
        let mut cfg = GreedyConfig::sa();
        cfg.reads = 64;
        cfg.sweeps = 128;
        let sol = run(&sub, &grid, vars, &cfg, 3).unwrap();
        for w in sol.trace.windows(2) {
            assert!(w[1].active_count <= w[0].active_count);
            if w[0].paths_found > 0 {
                assert!(w[1].active_count < w[0].active_count);
            }
        }
    }

    #[test]
    fn exhausted_iteration_budget_reports_a_stall_with_its_trace() {
        let (sub, grid, vars) = fixtures::running_example();
        let mut cfg = GreedyConfig::sa();
        cfg.reads = 16;
        cfg.sweeps = 16;
        cfg.max_iterations = 1;
        match run(&sub, &grid, vars, &cfg, 0) {
            Err(GreedyError::Stall { reason, active, trace }) => {
                assert!(reason.contains("budget"), "{reason}");
                assert!(active > 0);
                assert_eq!(trace.len(), 1);
            }
            other => panic!("expected a stall, got {other:?}"),
        }
    }

    #[test]
    fn validation_flags_the_reversed_route() {
        let (sub, _grid, _vars) = fixtures::running_example();
        // Visiting customer 2 first makes customer 1's window unreachable.
        let routes = vec![vec![(0, 0.0), (2, 4.5), (1, 7.5), (3, 7.5)]];
        let report = validate_routes(&routes, 1, &sub);
        assert!(!report.is_feasible());
        assert!(report.violations.iter().any(|v| v.contains("customer 1")), "{report:?}");
    }

    #[test]
    fn validation_flags_missing_customers_and_bad_objective() {
        let (sub, _grid, _vars) = fixtures::running_example();
        let routes = vec![vec![(0, 0.0), (1, 2.0), (3, 7.5)]];
        let report = validate_routes(&routes, 2, &sub);
        assert!(report.violations.iter().any(|v| v.contains("customer 2 is not visited")));
        assert!(report.violations.iter().any(|v| v.contains("objective")));
    }

    #[test]
    fn solution_serialization_shapes() {
        let (sub, grid, vars) = fixtures::running_example();
        let sol = run(&sub, &grid, vars, &GreedyConfig::exact(), 0).unwrap();
        let json = sol.to_json();
        assert!(json.contains("\"routes\""));
        assert!(json.contains("\"objective\": 2"));
        assert!(!json.contains("\"trace\""), "trace is dumped separately");
        let jsonl = sol.trace_jsonl();
        assert_eq!(jsonl.lines().count(), sol.trace.len());
        assert!(jsonl.lines().next().unwrap().contains("\"active_count\""));
    }
}
