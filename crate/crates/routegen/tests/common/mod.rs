//! Helpers shared by the integration test targets.

use routegen::dagpath::Tuple;
use routegen::instance::Node;
use routegen::model::VariableSet;
use std::collections::BTreeSet;

/// Exhaustive walk enumeration with the extraction preference: more arcs,
/// then the earlier start, then the lexicographically smaller sequence,
/// cut to the longest prefix visiting each customer at most once. An
/// independent mirror of the longest-path dynamic program's contract.
pub fn brute_longest(
    vars: &VariableSet,
    subset: &[usize],
    sink: Node,
) -> Option<(Vec<Tuple>, Vec<usize>)> {
    let tuples: BTreeSet<Tuple> = subset
        .iter()
        .flat_map(|&v| {
            let k = vars.key(v);
            [
                Tuple { node: k.from, dep: k.dep_from },
                Tuple { node: k.to, dep: k.dep_to },
            ]
        })
        .collect();

    type Walk = (Vec<Tuple>, Vec<usize>);
    fn prefer(a: &Walk, b: &Walk) -> bool {
        a.1.len()
            .cmp(&b.1.len())
            .then_with(|| b.0[0].dep.cmp(&a.0[0].dep))
            .then_with(|| b.0.cmp(&a.0))
            .is_gt()
    }
    fn grow(vars: &VariableSet, subset: &[usize], walk: &mut Walk, best: &mut Option<Walk>) {
        if best.as_ref().map_or(true, |b| prefer(walk, b)) {
            *best = Some(walk.clone());
        }
        let here = *walk.0.last().unwrap();
        for &v in subset {
            let k = vars.key(v);
            if (k.from, k.dep_from) == (here.node, here.dep) {
                walk.0.push(Tuple { node: k.to, dep: k.dep_to });
                walk.1.push(v);
                grow(vars, subset, walk, best);
                walk.0.pop();
                walk.1.pop();
            }
        }
    }

    let mut best: Option<Walk> = None;
    for &t in &tuples {
        let mut walk: Walk = (vec![t], Vec::new());
        grow(vars, subset, &mut walk, &mut best);
    }

    best.map(|(mut tuples, mut arcs)| {
        let mut seen = BTreeSet::new();
        let mut keep = tuples.len();
        for (i, t) in tuples.iter().enumerate() {
            if t.node != Node(0) && t.node != sink && !seen.insert(t.node) {
                keep = i;
                break;
            }
        }
        tuples.truncate(keep);
        arcs.truncate(keep - 1);
        (tuples, arcs)
    })
}
