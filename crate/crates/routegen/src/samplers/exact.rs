//! Exact branch-and-bound over the constraint system. Solves the fleet
//! minimization directly on coverage and flow equalities rather than the
//! penalty model, so it doubles as an independent cross-check of the QUBO.

use super::{Sampler, SampleSet, SamplerError, Subproblem};
use crate::instance::Node;
use crate::model::{ConstraintKind, ConstraintSet, VariableSet, VarStatus};

const EPS: f64 = 1e-9;

/// Two-phase depth-first search with unit propagation on the equalities.
/// The first phase proves the optimal depot-arc count, branching on the
/// tightest uncovered coverage constraint and cutting any subtree whose
/// bound reaches the incumbent. The second phase re-walks the tree in
/// lexicographic variable order and stops at the first completion that
/// attains the proven optimum, so among equal optima the lexicographically
/// smallest bit vector is always returned.
#[derive(Debug, Clone)]
pub struct ExactSolver {
    /// Refuse models with more active variables than this.
    pub limit: usize,
}

impl Default for ExactSolver {
    fn default() -> Self {
        Self { limit: 40 }
    }
}

/// Result of an exact solve over the active variables, in dense
/// lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactOutcome {
    pub bits: Vec<u8>,
    pub objective: f64,
    /// Branch decisions explored; zero when propagation alone decides.
    pub nodes: u64,
}

struct Row {
    label: String,
    coverage: bool,
    /// (dense index, coefficient) over active variables only.
    terms: Vec<(usize, f64)>,
    /// Right-hand side after folding in variables already fixed to one.
    rhs: f64,
}

struct Search<'a> {
    rows: &'a [Row],
    is_depot_arc: &'a [bool],
    base_objective: f64,
    /// Customer count in the compact indexing used by the bound.
    n_cust: usize,
    /// Active arcs between two customers: (dense index, from, to).
    cust_arcs: Vec<(usize, usize, usize)>,
    /// Committed customer-to-customer links, flattened row-major.
    base_adj: Vec<bool>,
    /// Customers already entered by a committed arc.
    entered_base: Vec<bool>,
    /// Per customer, dense indices of arcs into it from anywhere.
    incoming_dense: Vec<Vec<usize>>,
    /// Per customer, dense indices of arcs into it from other customers.
    incoming_cust_dense: Vec<Vec<usize>>,
    best: Option<(f64, Vec<u8>)>,
    nodes: u64,
    last_conflict: Option<usize>,
    /// Lex-extraction phase: accept only this objective and stop there.
    target: Option<f64>,
    done: bool,
}

impl ExactSolver {
    pub fn with_limit(limit: usize) -> Self {
        Self { limit }
    }

    /// Minimize the depot-arc count subject to all live equalities, over
    /// the currently active variables. Fixed variables enter as constants.
    pub fn solve(&self, vars: &VariableSet, cons: &ConstraintSet) -> Result<ExactOutcome, SamplerError> {
        let dense: Vec<usize> = vars.active_indices().collect();
        if dense.len() > self.limit {
            return Err(SamplerError::TooLarge { active: dense.len(), limit: self.limit });
        }
        let mut dense_of = vec![usize::MAX; vars.len()];
        for (d, &u) in dense.iter().enumerate() {
            dense_of[u] = d;
        }
        let is_depot_arc: Vec<bool> = dense.iter().map(|&u| vars.key(u).from == Node(0)).collect();
        let base_objective = (0..vars.len())
            .filter(|&u| matches!(vars.status(u), VarStatus::Fixed1(_)) && vars.key(u).from == Node(0))
            .count() as f64;

        // Customer graph behind the lower bound. The sink is the largest
        // node id in the universe; every other nonzero node is a customer.
        let node_ids: std::collections::BTreeSet<usize> = (0..vars.len())
            .flat_map(|u| [vars.key(u).from.0, vars.key(u).to.0])
            .collect();
        let sink = node_ids.iter().copied().max().unwrap_or(0);
        let mut cust_of = vec![usize::MAX; sink + 1];
        let mut n_cust = 0usize;
        for &id in node_ids.iter().filter(|&&id| id != 0 && id != sink) {
            cust_of[id] = n_cust;
            n_cust += 1;
        }
        let mut cust_arcs = Vec::new();
        let mut incoming_dense = vec![Vec::new(); n_cust];
        let mut incoming_cust_dense = vec![Vec::new(); n_cust];
        for (d, &u) in dense.iter().enumerate() {
            let k = vars.key(u);
            if k.to.0 != sink {
                let cj = cust_of[k.to.0];
                incoming_dense[cj].push(d);
                if k.from.0 != 0 {
                    incoming_cust_dense[cj].push(d);
                    cust_arcs.push((d, cust_of[k.from.0], cj));
                }
            }
        }
        let mut base_adj = vec![false; n_cust * n_cust];
        let mut entered_base = vec![false; n_cust];
        for u in 0..vars.len() {
            if !matches!(vars.status(u), VarStatus::Fixed1(_)) {
                continue;
            }
            let k = vars.key(u);
            if k.to.0 != sink {
                let cj = cust_of[k.to.0];
                entered_base[cj] = true;
                if k.from.0 != 0 {
                    base_adj[cust_of[k.from.0] * n_cust + cj] = true;
                }
            }
        }

        let mut rows = Vec::new();
        for con in cons.iter().filter(|c| !c.removed) {
            let mut rhs = con.target;
            let mut terms = Vec::new();
            for &(u, a) in &con.members {
                match vars.status(u) {
                    VarStatus::Active => terms.push((dense_of[u], a)),
                    VarStatus::Fixed1(_) => rhs -= a,
                    VarStatus::Fixed0(_) => {}
                }
            }
            rows.push(Row {
                label: con.kind.to_string(),
                coverage: matches!(con.kind, ConstraintKind::Coverage { .. }),
                terms,
                rhs,
            });
        }

        let mut search = Search {
            rows: &rows,
            is_depot_arc: &is_depot_arc,
            base_objective,
            n_cust,
            cust_arcs,
            base_adj,
            entered_base,
            incoming_dense,
            incoming_cust_dense,
            best: None,
            nodes: 0,
            last_conflict: None,
            target: None,
            done: false,
        };
        search.run(vec![-1i8; dense.len()]);
        let Some((optimum, _)) = search.best.take() else {
            let at = search.last_conflict.unwrap_or(0);
            let constraint = rows.get(at).map_or_else(|| "empty system".into(), |r| r.label.clone());
            return Err(SamplerError::Infeasible { constraint });
        };
        search.target = Some(optimum);
        search.run(vec![-1i8; dense.len()]);
        let (objective, bits) = search
            .best
            .expect("a completion at the proven optimum always exists");
        Ok(ExactOutcome { bits, objective, nodes: search.nodes })
    }
}

impl Search<'_> {
    fn objective(&self, value: &[i8]) -> f64 {
        let placed = value
            .iter()
            .zip(self.is_depot_arc)
            .filter(|&(&v, &depot)| v == 1 && depot)
            .count();
        self.base_objective + placed as f64
    }

    /// Admissible bound, the larger of two relaxations.
    ///
    /// Heads: a customer that is not yet entered and has lost every arc
    /// from another customer must open its own route, and two such
    /// customers can never share one, so each adds a distinct future
    /// depot arc on top of the depot arcs already placed.
    ///
    /// Clique: customers that cannot reach one another through surviving
    /// arcs in either direction cannot share a route in any completion,
    /// so any set of pairwise-unreachable customers lower-bounds the
    /// total route count.
    fn lower_bound(&self, value: &[i8]) -> f64 {
        let mut heads = 0usize;
        for c in 0..self.n_cust {
            if self.entered_base[c] || self.incoming_dense[c].iter().any(|&d| value[d] == 1) {
                continue;
            }
            if self.incoming_cust_dense[c].iter().all(|&d| value[d] == 0) {
                heads += 1;
            }
        }
        let lb = self.objective(value) + heads as f64;

        let n = self.n_cust;
        if n == 0 {
            return lb;
        }
        let mut reach = self.base_adj.clone();
        for &(d, ci, cj) in &self.cust_arcs {
            if value[d] != 0 {
                reach[ci * n + cj] = true;
            }
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i * n + k] {
                    for j in 0..n {
                        if reach[k * n + j] {
                            reach[i * n + j] = true;
                        }
                    }
                }
            }
        }
        let compat = |i: usize, j: usize| reach[i * n + j] || reach[j * n + i];
        let degree: Vec<usize> = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && !compat(i, j)).count())
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| degree[b].cmp(&degree[a]).then(a.cmp(&b)));
        let mut clique: Vec<usize> = Vec::new();
        for &c in &order {
            if clique.iter().all(|&m| !compat(c, m)) {
                clique.push(c);
            }
        }
        lb.max(clique.len() as f64)
    }

    fn propagate(&mut self, value: &mut [i8]) -> Result<(), ()> {
        loop {
            let mut changed = false;
            for (ci, row) in self.rows.iter().enumerate() {
                let mut sum_fixed = 0.0;
                let mut max_rem = 0.0;
                let mut min_rem = 0.0;
                let mut undecided = 0usize;
                for &(d, a) in &row.terms {
                    match value[d] {
                        -1 => {
                            undecided += 1;
                            if a > 0.0 {
                                max_rem += a;
                            } else {
                                min_rem += a;
                            }
                        }
                        v => sum_fixed += a * f64::from(v),
                    }
                }
                let need = row.rhs - sum_fixed;
                if need > max_rem + EPS || need < min_rem - EPS {
                    self.last_conflict = Some(ci);
                    return Err(());
                }
                if undecided == 0 {
                    continue;
                }
                if (need - max_rem).abs() < EPS {
                    for &(d, a) in &row.terms {
                        if value[d] == -1 {
                            value[d] = i8::from(a > 0.0);
                        }
                    }
                    changed = true;
                } else if (need - min_rem).abs() < EPS {
                    for &(d, a) in &row.terms {
                        if value[d] == -1 {
                            value[d] = i8::from(a < 0.0);
                        }
                    }
                    changed = true;
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }

    /// Branch variable and whether to try one first. The proof phase
    /// prefers the smallest member of the uncovered coverage row with
    /// fewest open candidates; the extraction phase walks variables in
    /// lexicographic order, zero first, so completions are visited in
    /// increasing bit-vector order.
    fn pick(&self, value: &[i8]) -> Option<(usize, bool)> {
        if self.target.is_some() {
            return value.iter().position(|&v| v == -1).map(|d| (d, false));
        }
        let mut tightest: Option<(usize, usize)> = None;
        for row in self.rows.iter().filter(|r| r.coverage) {
            let mut sum_fixed = 0.0;
            let mut undecided = 0usize;
            let mut min_var = usize::MAX;
            for &(d, a) in &row.terms {
                match value[d] {
                    -1 => {
                        undecided += 1;
                        min_var = min_var.min(d);
                    }
                    v => sum_fixed += a * f64::from(v),
                }
            }
            if undecided > 0 && row.rhs - sum_fixed > 0.5 {
                match tightest {
                    Some((u, _)) if u <= undecided => {}
                    _ => tightest = Some((undecided, min_var)),
                }
            }
        }
        if let Some((_, d)) = tightest {
            return Some((d, true));
        }
        value.iter().position(|&v| v == -1).map(|d| (d, false))
    }

    fn run(&mut self, mut value: Vec<i8>) {
        if self.done || self.propagate(&mut value).is_err() {
            return;
        }
        let bound = self.lower_bound(&value);
        match self.target {
            // Extraction: only completions at the proven optimum matter.
            Some(t) if bound > t + EPS => return,
            // Proof: a bound that merely ties the incumbent cannot improve it.
            None => {
                if let Some((best_obj, _)) = &self.best {
                    if bound > best_obj - EPS {
                        return;
                    }
                }
            }
            _ => {}
        }
        match self.pick(&value) {
            None => {
                let objective = self.objective(&value);
                match self.target {
                    Some(t) => {
                        if (objective - t).abs() < EPS {
                            let bits: Vec<u8> = value.iter().map(|&v| v as u8).collect();
                            self.best = Some((objective, bits));
                            self.done = true;
                        }
                    }
                    None => {
                        if self.best.as_ref().is_none_or(|(b, _)| objective < b - EPS) {
                            let bits: Vec<u8> = value.iter().map(|&v| v as u8).collect();
                            self.best = Some((objective, bits));
                        }
                    }
                }
            }
            Some((d, one_first)) => {
                let order: [i8; 2] = if one_first { [1, 0] } else { [0, 1] };
                for v in order {
                    if self.done {
                        break;
                    }
                    self.nodes += 1;
                    let mut child = value.clone();
                    child[d] = v;
                    self.run(child);
                }
            }
        }
    }
}

impl Sampler for ExactSolver {
    /// Returns a single read holding the optimum; `m` is ignored because
    /// repeating a deterministic solve adds no information.
    fn sample(&self, problem: &Subproblem<'_>, _m: usize, seed: u64) -> Result<SampleSet, SamplerError> {
        if problem.qubo.n == 0 {
            return Err(SamplerError::EmptyModel);
        }
        let out = self.solve(problem.vars, problem.cons)?;
        let energy = problem.qubo.energy(&out.bits);
        Ok(SampleSet { assignments: vec![out.bits], energies: vec![energy], sweeps: 0, seed })
    }

    fn name(&self) -> &'static str {
        "exact"
    }
}
