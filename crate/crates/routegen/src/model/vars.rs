//! Variable enumeration and pre-processing.

use super::ModelError;
use crate::grid::TimeGrid;
use crate::instance::{Node, SubInstance};
use std::collections::BTreeMap;
use std::fmt;

const EPS: f64 = 1e-9;

/// Identity of one arc variable. Departure times are stored as grid-point
/// indices, so the derived ordering is lexicographic on `(i, s, j, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarKey {
    pub from: Node,
    pub dep_from: usize,
    pub to: Node,
    pub dep_to: usize,
}

/// Why a variable was fixed. The first group fires during enumeration,
/// the second while committing routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixReason {
    EntersOrigin,
    LeavesSink,
    OriginDepartsLate,
    LateArrival,
    EarlyDeparture,
    SelfLoop,
    CustomerDepartsAtZero,
    DepartsAtZero,
    OriginToSink,
    NonAdvancing,
    AlongPath,
    OutgoingOtherTime,
    OutgoingWrongSuccessor,
    IncomingOtherTime,
    IncomingWrongPredecessor,
}

impl fmt::Display for FixReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            FixReason::EntersOrigin => "enters-origin",
            FixReason::LeavesSink => "leaves-sink",
            FixReason::OriginDepartsLate => "origin-departs-late",
            FixReason::LateArrival => "late-arrival",
            FixReason::EarlyDeparture => "early-departure",
            FixReason::SelfLoop => "self-loop",
            FixReason::CustomerDepartsAtZero => "customer-departs-at-zero",
            FixReason::DepartsAtZero => "departs-at-zero",
            FixReason::OriginToSink => "origin-to-sink",
            FixReason::NonAdvancing => "non-advancing",
            FixReason::AlongPath => "along-path",
            FixReason::OutgoingOtherTime => "outgoing-other-time",
            FixReason::OutgoingWrongSuccessor => "outgoing-wrong-successor",
            FixReason::IncomingOtherTime => "incoming-other-time",
            FixReason::IncomingWrongPredecessor => "incoming-wrong-predecessor",
        };
        f.write_str(tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarStatus {
    Active,
    Fixed0(FixReason),
    Fixed1(FixReason),
}

/// The enumerated variable universe with per-variable status, plus
/// incoming/outgoing indexes by node-time tuple.
#[derive(Debug, Clone)]
pub struct VariableSet {
    keys: Vec<VarKey>,
    status: Vec<VarStatus>,
    active: usize,
    outgoing: BTreeMap<(usize, usize), Vec<usize>>,
    incoming: BTreeMap<(usize, usize), Vec<usize>>,
}

impl VariableSet {
    /// Builds a set where every key is active. Keys are sorted; used by
    /// fixtures and tests that construct a model directly.
    pub fn from_keys(mut keys: Vec<VarKey>) -> Self {
        keys.sort();
        keys.dedup();
        Self::with_status(keys.iter().map(|&k| (k, VarStatus::Active)).collect())
    }

    fn with_status(pairs: Vec<(VarKey, VarStatus)>) -> Self {
        let keys: Vec<VarKey> = pairs.iter().map(|&(k, _)| k).collect();
        debug_assert!(keys.windows(2).all(|w| w[0] < w[1]), "keys sorted unique");
        let status: Vec<VarStatus> = pairs.iter().map(|&(_, s)| s).collect();
        let active = status.iter().filter(|s| matches!(s, VarStatus::Active)).count();
        let mut outgoing: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        let mut incoming: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (idx, k) in keys.iter().enumerate() {
            outgoing.entry((k.from.0, k.dep_from)).or_default().push(idx);
            incoming.entry((k.to.0, k.dep_to)).or_default().push(idx);
        }
        VariableSet {
            keys,
            status,
            active,
            outgoing,
            incoming,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, index: usize) -> VarKey {
        self.keys[index]
    }

    pub fn status(&self, index: usize) -> VarStatus {
        self.status[index]
    }

    pub fn is_active(&self, index: usize) -> bool {
        matches!(self.status[index], VarStatus::Active)
    }

    pub fn active_count(&self) -> usize {
        self.active
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.keys.len()).filter(|&i| self.is_active(i))
    }

    pub fn index_of(&self, key: &VarKey) -> Option<usize> {
        self.keys.binary_search(key).ok()
    }

    /// Variables leaving node `v` at grid point `dep`, any status.
    pub fn outgoing(&self, v: Node, dep: usize) -> &[usize] {
        self.outgoing.get(&(v.0, dep)).map_or(&[], Vec::as_slice)
    }

    /// Variables whose second leg leaves node `v` at grid point `dep`.
    pub fn incoming(&self, v: Node, dep: usize) -> &[usize] {
        self.incoming.get(&(v.0, dep)).map_or(&[], Vec::as_slice)
    }

    /// All node-time tuples that appear in any variable, in order.
    pub fn tuples(&self) -> Vec<(usize, usize)> {
        let mut t: Vec<(usize, usize)> = self.outgoing.keys().chain(self.incoming.keys()).copied().collect();
        t.sort();
        t.dedup();
        t
    }

    pub fn fix0(&mut self, index: usize, reason: FixReason) -> Result<(), ModelError> {
        match self.status[index] {
            VarStatus::Active => {
                self.status[index] = VarStatus::Fixed0(reason);
                self.active -= 1;
                Ok(())
            }
            _ => Err(ModelError::FixConflict { index }),
        }
    }

    pub fn fix1(&mut self, index: usize, reason: FixReason) -> Result<(), ModelError> {
        match self.status[index] {
            VarStatus::Active => {
                self.status[index] = VarStatus::Fixed1(reason);
                self.active -= 1;
                Ok(())
            }
            _ => Err(ModelError::FixConflict { index }),
        }
    }
}

/// Earliest time service can start at `j` having left `i` at time `s`;
/// arriving before the window opens means waiting until it does.
pub fn earliest_service_start(sub: &SubInstance, i: Node, s: f64, j: Node) -> f64 {
    sub.window(j).0.max(s + sub.dist(i, j))
}

/// The pre-processing predicate as one total function over raw times.
/// Returns the first rule that excludes `x[i,s,j,t]`, or `None` if the
/// variable belongs in the initial active set. Kept independent of
/// [`enumerate_variables`] so tests can cross-check the two.
pub fn exclusion_rule(sub: &SubInstance, i: Node, s: f64, j: Node, t: f64) -> Option<FixReason> {
    let sink = sub.sink();
    if j.0 == 0 {
        return Some(FixReason::EntersOrigin);
    }
    if i == sink {
        return Some(FixReason::LeavesSink);
    }
    if i.0 == 0 && s != 0.0 {
        return Some(FixReason::OriginDepartsLate);
    }
    let b = earliest_service_start(sub, i, s, j);
    if b > sub.window(j).1 + EPS {
        return Some(FixReason::LateArrival);
    }
    if t + EPS < b + sub.service(j) {
        return Some(FixReason::EarlyDeparture);
    }
    if i == j {
        return Some(FixReason::SelfLoop);
    }
    if i.0 != 0 && s == 0.0 {
        return Some(FixReason::CustomerDepartsAtZero);
    }
    if t == 0.0 {
        return Some(FixReason::DepartsAtZero);
    }
    if i.0 == 0 && j == sink {
        return Some(FixReason::OriginToSink);
    }
    if s >= t - EPS {
        return Some(FixReason::NonAdvancing);
    }
    None
}

/// Enumerates the variable universe over the grid's departure domains and
/// applies the pre-processing rules, recording for each excluded variable
/// the rule that fired. Structurally impossible combinations (self-loops,
/// arcs out of the sink, arcs into the origin, origin straight to sink)
/// are not materialized at all.
///
/// Fails if some customer ends up with no active incoming or no active
/// outgoing variable: no feasible route could visit it.
pub fn enumerate_variables(sub: &SubInstance, grid: &TimeGrid) -> Result<VariableSet, ModelError> {
    let sink = sub.sink();
    let mut pairs: Vec<(VarKey, VarStatus)> = Vec::new();

    let mut froms: Vec<Node> = vec![Node(0)];
    froms.extend(sub.customer_nodes());
    let mut tos: Vec<Node> = sub.customer_nodes().collect();
    tos.push(sink);

    for &i in &froms {
        for &si in grid.departures(i) {
            let s = grid.time(si);
            for &j in &tos {
                if i == j || (i.0 == 0 && j == sink) {
                    continue;
                }
                for &ti in grid.departures(j) {
                    let t = grid.time(ti);
                    let key = VarKey {
                        from: i,
                        dep_from: si,
                        to: j,
                        dep_to: ti,
                    };
                    let status = match first_rule_in_domain(sub, i, s, j, t) {
                        Some(rule) => VarStatus::Fixed0(rule),
                        None => VarStatus::Active,
                    };
                    pairs.push((key, status));
                }
            }
        }
    }

    pairs.sort_by_key(|&(k, _)| k);
    let vars = VariableSet::with_status(pairs);

    for c in sub.customer_nodes() {
        let covered = vars
            .active_indices()
            .any(|idx| vars.key(idx).to == c);
        if !covered {
            return Err(ModelError::DisconnectedCustomer {
                id: sub.original_id(c),
                direction: "incoming",
            });
        }
        let departs = vars
            .active_indices()
            .any(|idx| vars.key(idx).from == c);
        if !departs {
            return Err(ModelError::DisconnectedCustomer {
                id: sub.original_id(c),
                direction: "outgoing",
            });
        }
    }
    Ok(vars)
}

/// Rules that can fire inside the enumerated domain, in canonical order.
fn first_rule_in_domain(sub: &SubInstance, i: Node, s: f64, j: Node, t: f64) -> Option<FixReason> {
    let b = earliest_service_start(sub, i, s, j);
    if b > sub.window(j).1 + EPS {
        return Some(FixReason::LateArrival);
    }
    if t + EPS < b + sub.service(j) {
        return Some(FixReason::EarlyDeparture);
    }
    if i.0 != 0 && s == 0.0 {
        return Some(FixReason::CustomerDepartsAtZero);
    }
    if t == 0.0 {
        return Some(FixReason::DepartsAtZero);
    }
    if s >= t - EPS {
        return Some(FixReason::NonAdvancing);
    }
    None
}

/// Audit export: one CSV row per enumerated variable with node indices,
/// departure times, status, and the rule that fixed it (if any).
pub fn varmap_csv(vars: &VariableSet, grid: &TimeGrid) -> String {
    let mut out = String::from("index,i,s,j,t,status,rule\n");
    for idx in 0..vars.len() {
        let k = vars.key(idx);
        let (status, rule) = match vars.status(idx) {
            VarStatus::Active => ("active", String::new()),
            VarStatus::Fixed0(r) => ("fixed0", r.to_string()),
            VarStatus::Fixed1(r) => ("fixed1", r.to_string()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            idx,
            k.from.0,
            grid.time(k.dep_from),
            k.to.0,
            grid.time(k.dep_to),
            status,
            rule
        ));
    }
    out
}
