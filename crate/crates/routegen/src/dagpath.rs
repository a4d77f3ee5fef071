//! Paths through the selected variables: DAG construction, longest-path
//! dynamic programming, and customer-disjoint path extraction.

use crate::instance::Node;
use crate::model::VariableSet;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use thiserror::Error;

/// A node-time pair `(i, s)`: node `i` departs at grid index `s`.
/// Ordering is lexicographic on `(node, departure)`, the order used to
/// break ties between equally long paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tuple {
    pub node: Node,
    pub dep: usize,
}

/// A directed walk over tuples; `arcs[k]` is the universe variable index
/// joining `tuples[k]` to `tuples[k + 1]`. Customers along a path are
/// distinct; only depot and sink tuples may repeat across paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub tuples: Vec<Tuple>,
    pub arcs: Vec<usize>,
}

impl Path {
    pub fn first(&self) -> Tuple {
        self.tuples[0]
    }

    pub fn last(&self) -> Tuple {
        *self.tuples.last().expect("paths hold at least one tuple")
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }
}

#[derive(Debug, Error)]
pub enum DagError {
    #[error("cycle through node {node} at departure {dep}; the variable set is corrupt")]
    Cycle { node: usize, dep: usize },
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    from: usize,
    to: usize,
    var: usize,
}

/// Immutable DAG over the unique endpoint tuples of a variable subset.
/// Acyclicity is established at construction by a topological sort, whose
/// order the longest-path dynamic program reuses.
#[derive(Debug, Clone)]
pub struct Dag {
    tuples: Vec<Tuple>,
    arcs: Vec<Arc>,
    incoming: Vec<Vec<usize>>,
    /// Node indices in topological order, ties by (departure, node).
    order: Vec<usize>,
    sink: Node,
}

impl Dag {
    pub fn node_count(&self) -> usize {
        self.tuples.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    /// DOT dump with the given paths' arcs highlighted, for debugging.
    pub fn to_dot(&self, highlight: &[Path]) -> String {
        let marked: BTreeSet<usize> = highlight.iter().flat_map(|p| p.arcs.iter().copied()).collect();
        let mut out = String::from("digraph dag {\n  rankdir=LR;\n");
        for t in &self.tuples {
            writeln!(out, "  \"{}_{}\" [label=\"({}, s{})\"];", t.node.0, t.dep, t.node.0, t.dep).unwrap();
        }
        for a in &self.arcs {
            let (f, t) = (self.tuples[a.from], self.tuples[a.to]);
            let style = if marked.contains(&a.var) { " [penwidth=2, color=red]" } else { "" };
            writeln!(out, "  \"{}_{}\" -> \"{}_{}\"{};", f.node.0, f.dep, t.node.0, t.dep, style).unwrap();
        }
        out.push_str("}\n");
        out
    }
}

/// Builds the DAG of a selection: one node per unique endpoint tuple, one
/// arc per variable. `subset` holds universe indices of active variables.
pub fn build_dag(vars: &VariableSet, subset: &[usize], sink: Node) -> Result<Dag, DagError> {
    let mut tuples = BTreeSet::new();
    for &v in subset {
        debug_assert!(vars.is_active(v), "selections may only contain active variables");
        let k = vars.key(v);
        tuples.insert(Tuple { node: k.from, dep: k.dep_from });
        tuples.insert(Tuple { node: k.to, dep: k.dep_to });
    }
    let mut tuples: Vec<Tuple> = tuples.into_iter().collect();
    tuples.sort_by_key(|t| (t.dep, t.node));
    let index_of = |t: Tuple| tuples.binary_search_by_key(&(t.dep, t.node), |u| (u.dep, u.node)).unwrap();
    let mut arcs: Vec<Arc> = subset
        .iter()
        .map(|&v| {
            let k = vars.key(v);
            Arc {
                from: index_of(Tuple { node: k.from, dep: k.dep_from }),
                to: index_of(Tuple { node: k.to, dep: k.dep_to }),
                var: v,
            }
        })
        .collect();
    arcs.sort_by_key(|a| a.var);
    let mut incoming = vec![Vec::new(); tuples.len()];
    let mut indegree = vec![0usize; tuples.len()];
    for (i, a) in arcs.iter().enumerate() {
        incoming[a.to].push(i);
        indegree[a.to] += 1;
    }

    let mut ready: BTreeSet<(usize, Node, usize)> = (0..tuples.len())
        .filter(|&v| indegree[v] == 0)
        .map(|v| (tuples[v].dep, tuples[v].node, v))
        .collect();
    let mut order = Vec::with_capacity(tuples.len());
    while let Some(&entry) = ready.iter().next() {
        ready.remove(&entry);
        let v = entry.2;
        order.push(v);
        for a in arcs.iter().filter(|a| a.from == v) {
            indegree[a.to] -= 1;
            if indegree[a.to] == 0 {
                ready.insert((tuples[a.to].dep, tuples[a.to].node, a.to));
            }
        }
    }
    if order.len() < tuples.len() {
        let stuck = (0..tuples.len()).find(|&v| indegree[v] > 0).unwrap();
        return Err(DagError::Cycle { node: tuples[stuck].node.0, dep: tuples[stuck].dep });
    }

    Ok(Dag { tuples, arcs, incoming, order, sink })
}

#[derive(Clone)]
struct Candidate {
    tuples: Vec<Tuple>,
    arcs: Vec<usize>,
}

/// More arcs wins; then the earlier start; then the lexicographically
/// smaller tuple sequence.
fn better(a: &Candidate, b: &Candidate) -> bool {
    a.arcs
        .len()
        .cmp(&b.arcs.len())
        .then_with(|| b.tuples[0].dep.cmp(&a.tuples[0].dep))
        .then_with(|| b.tuples.cmp(&a.tuples))
        .is_gt()
}

fn longest_masked(dag: &Dag, node_alive: &[bool], arc_alive: &[bool]) -> Option<Candidate> {
    let mut best: Vec<Option<Candidate>> = vec![None; dag.tuples.len()];
    let mut overall: Option<Candidate> = None;
    for &v in &dag.order {
        if !node_alive[v] {
            continue;
        }
        let mut cand = Candidate { tuples: vec![dag.tuples[v]], arcs: Vec::new() };
        for &ai in &dag.incoming[v] {
            let arc = dag.arcs[ai];
            if !arc_alive[ai] || !node_alive[arc.from] {
                continue;
            }
            if let Some(prefix) = &best[arc.from] {
                let mut ext = prefix.clone();
                ext.tuples.push(dag.tuples[v]);
                ext.arcs.push(arc.var);
                if better(&ext, &cand) {
                    cand = ext;
                }
            }
        }
        if overall.as_ref().is_none_or(|o| better(&cand, o)) {
            overall = Some(cand.clone());
        }
        best[v] = Some(cand);
    }
    overall
}

/// Longest prefix visiting each customer at most once. Arc-count dynamic
/// programming can revisit a customer at a later departure when windows
/// are wide; the prefix keeps the path invariant without a combinatorial
/// search.
fn distinct_prefix(cand: Candidate, sink: Node) -> Path {
    let mut seen = BTreeSet::new();
    let mut keep = cand.tuples.len();
    for (i, t) in cand.tuples.iter().enumerate() {
        if t.node == Node(0) || t.node == sink {
            continue;
        }
        if !seen.insert(t.node) {
            keep = i;
            break;
        }
    }
    let mut tuples = cand.tuples;
    let mut arcs = cand.arcs;
    tuples.truncate(keep);
    arcs.truncate(keep - 1);
    Path { tuples, arcs }
}

/// A path maximizing arc count; `None` on an empty DAG.
pub fn longest_path(dag: &Dag) -> Option<Path> {
    let node_alive = vec![true; dag.tuples.len()];
    let arc_alive = vec![true; dag.arcs.len()];
    longest_masked(dag, &node_alive, &arc_alive).map(|c| distinct_prefix(c, dag.sink))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionStrategy {
    /// Keep extracting until no arc-bearing path remains.
    #[default]
    MultiplePaths,
    /// Conservative variant: one path per call.
    SingleLongestPath,
}

/// Iterated extraction: take the longest path, delete every tuple of the
/// customers it visits (depot and sink tuples stay, since later paths may
/// share them), delete the path's arcs, and repeat. Returned paths never
/// share a customer.
pub fn extract_disjoint_paths(dag: &Dag, strategy: ExtractionStrategy) -> Vec<Path> {
    let mut node_alive = vec![true; dag.tuples.len()];
    let mut arc_alive = vec![true; dag.arcs.len()];
    let mut out = Vec::new();
    while let Some(cand) = longest_masked(dag, &node_alive, &arc_alive) {
        let path = distinct_prefix(cand, dag.sink);
        if path.arcs.is_empty() {
            break;
        }
        let customers: BTreeSet<Node> = path
            .tuples
            .iter()
            .map(|t| t.node)
            .filter(|&n| n != Node(0) && n != dag.sink)
            .collect();
        for (v, t) in dag.tuples.iter().enumerate() {
            if customers.contains(&t.node) {
                node_alive[v] = false;
            }
        }
        for (ai, arc) in dag.arcs.iter().enumerate() {
            if !node_alive[arc.from] || !node_alive[arc.to] || path.arcs.contains(&arc.var) {
                arc_alive[ai] = false;
            }
        }
        out.push(path);
        if strategy == ExtractionStrategy::SingleLongestPath {
            break;
        }
    }
    out
}
