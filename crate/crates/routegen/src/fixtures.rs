//! Bundled instances and hand-built models used by tests, docs, and the
//! benchmark defaults.

use crate::grid::{build_time_grid, GridConfig, TimeGrid};
use crate::instance::{parse_solomon, sample_customers, Instance, Node, SubInstance};
use crate::model::{enumerate_variables, VarKey, VariableSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// Two customers on a line with tight windows; the smallest instance on
/// which every stage of the solver does nontrivial work. Its two-vehicle
/// optimum is `0 -> 1 -> sink` and `0 -> 2 -> sink`.
pub const RUNNING_EXAMPLE: &str = include_str!("../data/running_example.txt");

/// 100 customers with tight windows on a short horizon.
pub const NARROW100: &str = include_str!("../data/narrow100.txt");

/// 100 customers with wide windows on a long horizon.
pub const WIDE100: &str = include_str!("../data/wide100.txt");

pub fn running_example_instance() -> Instance {
    parse_solomon(RUNNING_EXAMPLE).expect("bundled instance parses")
}

/// The running example, discretized and enumerated: a 5-variable model
/// whose optimum uses two vehicles.
pub fn running_example() -> (SubInstance, TimeGrid, VariableSet) {
    let inst = running_example_instance();
    let sub = sample_customers(&inst, 2, 0).expect("two customers available");
    let grid = build_time_grid(&sub, &GridConfig::default()).expect("grid");
    let vars = enumerate_variables(&sub, &grid).expect("feasible model");
    (sub, grid, vars)
}

/// A hand-built ten-variable walkthrough model over grid points
/// `{0, 1, 2, 3}`: two customers, five depot departures, five sink
/// arrivals. Constructed directly (not by enumeration) so pruning,
/// concatenation, path extraction, and both samplers can be exercised
/// against worked-by-hand expectations.
///
/// Arcs: `0 -> 1` at labels 1, 2, 3; `0 -> 2` at labels 2, 3;
/// `1 -> sink` from each label; `2 -> sink` from each label.
pub fn fig1() -> (SubInstance, TimeGrid, VariableSet) {
    let depot = crate::instance::Customer {
        id: 0,
        x: 0.0,
        y: 0.0,
        demand: 0.0,
        ready: 0.0,
        due: 10.0,
        service: 0.0,
    };
    let c1 = crate::instance::Customer {
        id: 1,
        x: 1.0,
        y: 0.0,
        demand: 0.0,
        ready: 1.0,
        due: 1.9,
        service: 0.0,
    };
    let c2 = crate::instance::Customer {
        id: 2,
        x: 0.0,
        y: 1.0,
        demand: 0.0,
        ready: 2.0,
        due: 2.9,
        service: 0.0,
    };
    let pts = [&depot, &c1, &c2, &depot];
    let dist: Vec<Vec<f64>> = pts
        .iter()
        .map(|a| {
            pts.iter()
                .map(|b| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt())
                .collect()
        })
        .collect();
    let sub = SubInstance {
        name: "walkthrough".into(),
        n: 2,
        seed: 0,
        depot,
        customers: vec![c1, c2],
        dist,
    };

    let grid = TimeGrid::from_parts(
        vec![0.0, 1.0, 2.0, 3.0],
        vec![vec![0], vec![1, 2, 3], vec![2, 3], vec![1, 2, 3]],
    );

    let key = |from: usize, s: usize, to: usize, t: usize| VarKey {
        from: Node(from),
        dep_from: s,
        to: Node(to),
        dep_to: t,
    };
    let vars = VariableSet::from_keys(vec![
        key(0, 0, 1, 1),
        key(0, 0, 1, 2),
        key(0, 0, 1, 3),
        key(0, 0, 2, 2),
        key(0, 0, 2, 3),
        key(1, 1, 3, 2),
        key(1, 2, 3, 3),
        key(1, 3, 3, 3),
        key(2, 2, 3, 3),
        key(2, 3, 3, 3),
    ]);
    (sub, grid, vars)
}

/// `count` customers evenly spaced on a line with wide windows, so one
/// vehicle can serve them all in index order. Used by tests that build
/// variable sets by hand and need a plausible carrier instance.
pub fn line_instance(count: usize) -> SubInstance {
    let point = |id: usize, x: f64| crate::instance::Customer {
        id,
        x,
        y: 0.0,
        demand: 0.0,
        ready: 0.0,
        due: if id == 0 { 1000.0 } else { 900.0 },
        service: 0.0,
    };
    let depot = point(0, 0.0);
    let customers: Vec<_> = (1..=count).map(|i| point(i, i as f64)).collect();
    let mut nodes = vec![&depot];
    nodes.extend(customers.iter());
    nodes.push(&depot);
    let dist: Vec<Vec<f64>> = nodes
        .iter()
        .map(|a| nodes.iter().map(|b| (a.x - b.x).abs()).collect())
        .collect();
    SubInstance {
        name: "line".into(),
        n: count,
        seed: 0,
        depot,
        customers,
        dist,
    }
}

/// Window shape for [`synthetic_solomon`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowShape {
    /// Width-10 windows on a 230 horizon.
    Narrow,
    /// Width-200 windows on a 1000 horizon.
    Wide,
}

/// Deterministically generates a Solomon-format instance: integer
/// coordinates uniform on a 100 x 100 square around a central depot, with
/// every window reachable from the depot and returnable before the
/// horizon. The bundled `NARROW100`/`WIDE100` files are exactly
/// `synthetic_solomon(shape, 100, 7)`; a test keeps them in sync.
pub fn synthetic_solomon(shape: WindowShape, customers: usize, seed: u64) -> String {
    let (name, horizon, width, service) = match shape {
        WindowShape::Narrow => ("NARROW100", 230u64, 10u64, 10u64),
        WindowShape::Wide => ("WIDE100", 1000u64, 200u64, 10u64),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    writeln!(out, "{name}\n").unwrap();
    writeln!(out, "VEHICLE\nNUMBER     CAPACITY\n  25         200\n").unwrap();
    writeln!(out, "CUSTOMER").unwrap();
    writeln!(
        out,
        "CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE TIME\n"
    )
    .unwrap();
    writeln!(out, "{:>5} {:>8} {:>10} {:>10} {:>12} {:>10} {:>13}", 0, 50, 50, 0, 0, horizon, 0).unwrap();
    for id in 1..=customers {
        let x: i64 = rng.gen_range(0..=100);
        let y: i64 = rng.gen_range(0..=100);
        let d = (((x - 50).pow(2) + (y - 50).pow(2)) as f64).sqrt().ceil() as u64;
        let lo = d;
        let hi = horizon - service - d;
        let ready = lo + rng.gen_range(0..=(hi - lo));
        let due = (ready + width).min(horizon - service - d);
        let demand = rng.gen_range(1..=40);
        writeln!(
            out,
            "{:>5} {:>8} {:>10} {:>10} {:>12} {:>10} {:>13}",
            id, x, y, demand, ready, due, service
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        build_constraints, compile_qubo, reference_energy, Penalties, VarStatus,
    };

    #[test]
    fn running_example_has_the_expected_model() {
        let (sub, grid, vars) = running_example();
        assert_eq!(sub.n, 2);
        assert_eq!(grid.points, vec![0.0, 2.0, 4.5, 7.5]);
        assert_eq!(vars.active_count(), 5);
    }

    #[test]
    fn walkthrough_fixture_shape() {
        let (sub, grid, vars) = fig1();
        assert_eq!(sub.n, 2);
        assert_eq!(grid.points.len(), 4);
        assert_eq!(vars.len(), 10);
        assert_eq!(vars.active_count(), 10);
        assert!(vars.active_indices().all(|i| matches!(vars.status(i), VarStatus::Active)));
    }

    #[test]
    fn walkthrough_energies_match_hand_computation() {
        let (sub, grid, vars) = fig1();
        let cons = build_constraints(&vars, &sub);
        let p = Penalties::for_fleet_bound(sub.n);
        let (qubo, dense) = compile_qubo(&cons, &vars, p).unwrap();
        assert_eq!(qubo.n, 10);

        // the two-route assignment: 0->1 at 1 -> sink at 2, 0->2 at 3 -> sink at 3
        let chosen = [(0usize, 0usize, 1usize, 1usize), (1, 1, 3, 2), (0, 0, 2, 3), (2, 3, 3, 3)];
        let mut bits = vec![0u8; qubo.n];
        for (f, s, t, d) in chosen {
            let key = VarKey {
                from: Node(f),
                dep_from: s,
                to: Node(t),
                dep_to: d,
            };
            let u = vars.index_of(&key).unwrap();
            bits[dense.iter().position(|&x| x == u).unwrap()] = 1;
        }
        assert_eq!(qubo.energy(&bits), 2.0);
        assert_eq!(qubo.energy(&vec![0u8; 10]), 10.0);
        assert_eq!(reference_energy(&vars, &cons, &dense, &bits, p), 2.0);
        let _ = grid;
    }

    #[test]
    fn synthetic_instances_parse_and_are_depot_feasible() {
        for shape in [WindowShape::Narrow, WindowShape::Wide] {
            let text = synthetic_solomon(shape, 100, 7);
            let inst = crate::instance::parse_solomon(&text).unwrap();
            assert_eq!(inst.customers.len(), 100);
            for c in &inst.customers {
                let d = ((c.x - 50.0).powi(2) + (c.y - 50.0).powi(2)).sqrt();
                assert!(c.ready >= d - 1e-9, "customer {} reachable", c.id);
                assert!(
                    c.ready + c.service + d <= inst.depot.due + 1e-9,
                    "customer {} returnable",
                    c.id
                );
                assert!(c.ready <= c.due);
            }
        }
    }

    #[test]
    fn bundled_synthetic_files_match_generator() {
        assert_eq!(NARROW100, synthetic_solomon(WindowShape::Narrow, 100, 7));
        assert_eq!(WIDE100, synthetic_solomon(WindowShape::Wide, 100, 7));
    }
}
