//! Structural properties checked over generated instances and variable
//! subsets: DAG acyclicity, extraction disjointness, monotone shrinkage
//! of the active set, the interior-pruning predicate, and the longest
//! path dynamic program against exhaustive enumeration.

mod common;

use common::brute_longest;
use proptest::prelude::*;
use routegen::dagpath::{
    build_dag, extract_disjoint_paths, longest_path, ExtractionStrategy, Path,
};
use routegen::fixtures::{synthetic_solomon, WindowShape};
use routegen::greedy::{self, Backend, GreedyConfig, Selection};
use routegen::grid::{build_time_grid, GridConfig, TimeGrid};
use routegen::instance::{parse_solomon, sample_customers, Node, SubInstance};
use routegen::model::{build_constraints, enumerate_variables, VarKey, VarStatus, VariableSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

/// A generated sub-instance with its grid and enumerated universe.
fn universe(shape: WindowShape, n: usize, gen_seed: u64) -> (SubInstance, TimeGrid, VariableSet) {
    let text = synthetic_solomon(shape, n, gen_seed);
    let inst = parse_solomon(&text).expect("generated text parses");
    let sub = sample_customers(&inst, n, gen_seed).expect("n customers exist");
    let grid = build_time_grid(&sub, &GridConfig::default()).expect("grid builds");
    let vars = enumerate_variables(&sub, &grid).expect("every customer stays connected");
    (sub, grid, vars)
}

/// Pseudo-random subset of the active variables.
fn random_subset(vars: &VariableSet, subset_seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(subset_seed);
    vars.active_indices().filter(|_| rng.gen_bool(0.5)).collect()
}

fn shape_of(wide: bool) -> WindowShape {
    if wide {
        WindowShape::Wide
    } else {
        WindowShape::Narrow
    }
}

/// Walks every arc of the subset as a tuple graph and fails on any
/// directed cycle, independently of the constructor's topological sort.
fn assert_acyclic(vars: &VariableSet, subset: &[usize]) {
    let tuples: BTreeSet<(usize, usize)> = subset
        .iter()
        .flat_map(|&v| {
            let k = vars.key(v);
            [(k.from.0, k.dep_from), (k.to.0, k.dep_to)]
        })
        .collect();
    let tuples: Vec<(usize, usize)> = tuples.into_iter().collect();
    let index = |t: (usize, usize)| tuples.binary_search(&t).unwrap();
    let mut succ = vec![Vec::new(); tuples.len()];
    for &v in subset {
        let k = vars.key(v);
        succ[index((k.from.0, k.dep_from))].push(index((k.to.0, k.dep_to)));
    }
    // Iterative DFS with colors: 1 = on stack, 2 = done.
    let mut color = vec![0u8; tuples.len()];
    for start in 0..tuples.len() {
        if color[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        color[start] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < succ[v].len() {
                let w = succ[v][*next];
                *next += 1;
                match color[w] {
                    0 => {
                        color[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => panic!("cycle through tuple {:?}", tuples[w]),
                    _ => {}
                }
            } else {
                color[v] = 2;
                stack.pop();
            }
        }
    }
}

fn is_customer(sub: &SubInstance, node: Node) -> bool {
    node != Node(0) && node != sub.sink()
}

/// Disjointness and arc fidelity of one extraction result.
fn assert_disjoint(sub: &SubInstance, vars: &VariableSet, subset: &[usize], paths: &[Path]) {
    let subset: BTreeSet<usize> = subset.iter().copied().collect();
    let mut seen = BTreeSet::new();
    for p in paths {
        assert!(!p.arcs.is_empty(), "extracted paths carry at least one arc");
        assert_eq!(p.arcs.len() + 1, p.tuples.len());
        for t in &p.tuples {
            if is_customer(sub, t.node) {
                assert!(seen.insert(t.node), "customer {:?} in two paths", t.node);
            }
        }
        for (w, &a) in p.tuples.windows(2).zip(&p.arcs) {
            assert!(subset.contains(&a), "arc {a} outside the sampled subset");
            let k = vars.key(a);
            assert_eq!((k.from, k.dep_from), (w[0].node, w[0].dep));
            assert_eq!((k.to, k.dep_to), (w[1].node, w[1].dep));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every active variable advances the departure index, and any subset
    /// of the universe forms a DAG, checked by independent DFS as well as
    /// by the constructor.
    #[test]
    fn universe_subsets_form_dags(
        wide in any::<bool>(),
        n in 2usize..8,
        gen_seed in 0u64..1000,
        subset_seed in any::<u64>(),
    ) {
        let (sub, _grid, vars) = universe(shape_of(wide), n, gen_seed);
        for v in vars.active_indices() {
            let k = vars.key(v);
            prop_assert!(k.dep_from < k.dep_to, "variable {v} does not advance time");
        }
        let subset = random_subset(&vars, subset_seed);
        assert_acyclic(&vars, &subset);
        let dag = build_dag(&vars, &subset, sub.sink()).expect("subset is acyclic");
        prop_assert_eq!(dag.arc_count(), subset.len());
    }

    /// Extraction never repeats a customer, only uses arcs of the input
    /// subset, and chains tuples exactly as the variables dictate.
    #[test]
    fn extraction_is_customer_disjoint(
        wide in any::<bool>(),
        n in 2usize..8,
        gen_seed in 0u64..1000,
        subset_seed in any::<u64>(),
        single in any::<bool>(),
    ) {
        let (sub, _grid, vars) = universe(shape_of(wide), n, gen_seed);
        let subset = random_subset(&vars, subset_seed);
        let dag = build_dag(&vars, &subset, sub.sink()).expect("subset is acyclic");
        let strategy = if single {
            ExtractionStrategy::SingleLongestPath
        } else {
            ExtractionStrategy::MultiplePaths
        };
        let paths = extract_disjoint_paths(&dag, strategy);
        assert_disjoint(&sub, &vars, &subset, &paths);
        if single {
            prop_assert!(paths.len() <= 1);
        }
    }

    /// After pruning extracted paths into a fresh system, the committed
    /// arcs are fixed to one and every tuple's guaranteed exclusion scope
    /// is fixed to zero: interior tuples are fully decided, an exposed
    /// start keeps only same-departure incoming candidates, an exposed
    /// end only same-departure outgoing candidates.
    #[test]
    fn pruning_decides_the_guaranteed_scopes(
        wide in any::<bool>(),
        n in 2usize..8,
        gen_seed in 0u64..1000,
        subset_seed in any::<u64>(),
    ) {
        let (sub, _grid, vars) = universe(shape_of(wide), n, gen_seed);
        let subset = random_subset(&vars, subset_seed);
        let dag = build_dag(&vars, &subset, sub.sink()).expect("subset is acyclic");
        let q = extract_disjoint_paths(&dag, ExtractionStrategy::MultiplePaths);

        let mut pruned = vars.clone();
        let mut cons = build_constraints(&pruned, &sub);
        let mut committed: Vec<Path> = Vec::new();
        let events = greedy::prune(&mut committed, &mut pruned, &q, &mut cons, &sub)
            .expect("disjoint paths prune cleanly");
        let decided_zero = |i: usize| matches!(pruned.status(i), VarStatus::Fixed0(_));

        for p in &q {
            let last = p.tuples.len() - 1;
            for (k, t) in p.tuples.iter().enumerate() {
                if k < last {
                    prop_assert!(
                        matches!(pruned.status(p.arcs[k]), VarStatus::Fixed1(_)),
                        "path arc {} not committed", p.arcs[k]
                    );
                }
                if !is_customer(&sub, t.node) {
                    continue;
                }
                let exposed_start = k == 0;
                let exposed_end = k == last;
                for i in 0..pruned.len() {
                    let key = pruned.key(i);
                    if key.to == t.node && key.dep_to != t.dep {
                        prop_assert!(decided_zero(i), "incoming {i} at a foreign time survives");
                    }
                    if key.from == t.node && key.dep_from != t.dep {
                        prop_assert!(decided_zero(i), "outgoing {i} at a foreign time survives");
                    }
                    if !exposed_start && key.to == t.node && key.dep_to == t.dep && i != p.arcs[k - 1] {
                        prop_assert!(decided_zero(i), "wrong predecessor {i} survives");
                    }
                    if !exposed_end && key.from == t.node && key.dep_from == t.dep && i != p.arcs[k] {
                        prop_assert!(decided_zero(i), "wrong successor {i} survives");
                    }
                }
            }
        }
        if q.iter().any(|p| !p.arcs.is_empty()) {
            prop_assert!(!events.is_empty(), "committing arcs must record events");
        }
    }
}

proptest! {
    // Full solver runs are the expensive case, so fewer of them.
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The active set never grows between iterations, whether the run
    /// converges or stalls.
    #[test]
    fn active_set_shrinks_monotonically(
        wide in any::<bool>(),
        n in 2usize..6,
        gen_seed in 0u64..1000,
        run_seed in 0u64..64,
        exact in any::<bool>(),
    ) {
        let (sub, grid, vars) = universe(shape_of(wide), n, gen_seed);
        let config = if exact {
            GreedyConfig::exact()
        } else {
            GreedyConfig {
                backend: Backend::Sa,
                selection: Selection::Fraction(0.5),
                reads: 24,
                sweeps: 32,
                ..GreedyConfig::sa()
            }
        };
        let trace = match greedy::run(&sub, &grid, vars, &config, run_seed) {
            Ok(sol) => sol.trace,
            Err(greedy::GreedyError::Stall { trace, .. }) => trace,
            Err(other) => return Err(TestCaseError::fail(format!("invariant violation: {other}"))),
        };
        for w in trace.windows(2) {
            prop_assert!(
                w[1].active_count <= w[0].active_count,
                "active set grew from {} to {}", w[0].active_count, w[1].active_count
            );
            prop_assert!(w[1].l == w[0].l + 1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// The longest-path dynamic program agrees with exhaustive walk
    /// enumeration on every generated DAG of at most twelve nodes.
    #[test]
    fn dp_matches_exhaustive_enumeration(
        raw in prop::collection::vec((0usize..7, 0usize..4, 1usize..8, 1usize..5), 1..14),
    ) {
        let sink = Node(7);
        let keys: BTreeSet<VarKey> = raw
            .into_iter()
            .filter_map(|(from, dep_from, to, extra)| {
                let dep_to = dep_from + extra;
                (from != to && dep_to < 8).then_some(VarKey {
                    from: Node(from),
                    dep_from,
                    to: Node(to),
                    dep_to,
                })
            })
            .collect();
        prop_assume!(!keys.is_empty());
        let vars = VariableSet::from_keys(keys.into_iter().collect());
        let subset: Vec<usize> = vars.active_indices().collect();
        let dag = build_dag(&vars, &subset, sink).expect("departure indices advance");
        prop_assume!(dag.node_count() <= 12);

        let got = longest_path(&dag);
        let want = brute_longest(&vars, &subset, sink);
        match (got, want) {
            (None, None) => {}
            (Some(g), Some(w)) => {
                prop_assert_eq!(g.tuples, w.0);
                prop_assert_eq!(g.arcs, w.1);
            }
            (g, w) => return Err(TestCaseError::fail(format!("{g:?} vs {w:?}"))),
        }
    }
}
