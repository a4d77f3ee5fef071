//! Time discretization: one departure point per window where possible.
//!
//! A departure time for customer `j` is the instant service has finished
//! and the vehicle may leave. Any route reaching `j` does so no earlier
//! than `d(0, j)`, so usable departure points live in
//! `[max(ready_j, d(0,j)) + service_j, due_j + service_j]`, further capped
//! so the vehicle can still return to the depot before its horizon.

use crate::instance::{Node, SubInstance};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct GridConfig {
    /// Extra evenly spaced points inside each customer's departure
    /// interval, on top of the single constructed point. Default 0.
    pub extra_points_per_window: usize,
}

/// The global time grid plus, per node, which grid points are usable as
/// departure times from that node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    /// Strictly increasing, starts at 0.
    pub points: Vec<f64>,
    /// Indexed by node (origin, customers, sink); values index `points`.
    departures: Vec<Vec<usize>>,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error(
        "customer {id}: window [{ready}, {due}] admits no departure point \
         (earliest feasible {earliest}, latest returnable {latest})"
    )]
    NoDeparturePoint {
        id: usize,
        ready: f64,
        due: f64,
        earliest: f64,
        latest: f64,
    },
}

impl TimeGrid {
    /// Assembles a grid from explicit parts; used by fixtures and tests.
    pub fn from_parts(points: Vec<f64>, departures: Vec<Vec<usize>>) -> Self {
        assert!(!points.is_empty() && points[0] == 0.0, "grid starts at 0");
        assert!(
            points.windows(2).all(|w| w[0] < w[1]),
            "grid points strictly increasing"
        );
        for d in &departures {
            assert!(d.iter().all(|&i| i < points.len()), "departure index in range");
        }
        TimeGrid { points, departures }
    }

    pub fn time(&self, index: usize) -> f64 {
        self.points[index]
    }

    /// Grid-point indices usable as departure times from `v`.
    pub fn departures(&self, v: Node) -> &[usize] {
        &self.departures[v.0]
    }

    /// Index of an exact grid value, if present.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points.iter().position(|&p| (p - t).abs() <= EPS)
    }
}

/// Departure interval for customer `v`: earliest feasible point and the
/// latest point that still allows returning to the depot in time.
fn departure_interval(sub: &SubInstance, v: Node) -> (f64, f64) {
    let (ready, due) = sub.window(v);
    let q = sub.service(v);
    let lo = ready.max(sub.dist(Node(0), v)) + q;
    let hi = (due + q).min(sub.depot.due - sub.dist(v, sub.sink()));
    (lo, hi)
}

fn insert_point(points: &mut Vec<f64>, t: f64) {
    if points.iter().any(|&p| (p - t).abs() <= EPS) {
        return;
    }
    let pos = points.partition_point(|&p| p < t);
    points.insert(pos, t);
}

/// Builds the grid: `{0}`, one point per customer window (reusing an
/// existing point whenever one already falls inside the window's departure
/// interval), then a single sink arrival point late enough that every
/// usable customer departure, including departures from the sink point
/// itself, can still reach the depot on the grid. Customers are processed
/// in ascending `(due + service, ready + service, id)` order so reuse is
/// deterministic and two identical windows share one point.
pub fn build_time_grid(sub: &SubInstance, config: &GridConfig) -> Result<TimeGrid, GridError> {
    let mut order: Vec<Node> = sub.customer_nodes().collect();
    order.sort_by(|&a, &b| {
        let ka = (sub.window(a).1 + sub.service(a), sub.window(a).0 + sub.service(a));
        let kb = (sub.window(b).1 + sub.service(b), sub.window(b).0 + sub.service(b));
        ka.partial_cmp(&kb)
            .unwrap()
            .then(sub.original_id(a).cmp(&sub.original_id(b)))
    });

    let mut points = vec![0.0];
    for &v in &order {
        let (lo, hi) = departure_interval(sub, v);
        if lo > hi + EPS {
            let c = sub.customer(v);
            return Err(GridError::NoDeparturePoint {
                id: c.id,
                ready: c.ready,
                due: c.due,
                earliest: lo,
                latest: hi,
            });
        }
        let reusable = points.iter().any(|&p| p >= lo - EPS && p <= hi + EPS);
        if !reusable {
            insert_point(&mut points, lo);
        }
        for k in 1..=config.extra_points_per_window {
            let extra = lo + (hi - lo) * k as f64 / (config.extra_points_per_window + 1) as f64;
            if extra > lo + EPS && extra < hi - EPS {
                insert_point(&mut points, extra);
            }
        }
    }

    // The sink point must cover the latest possible arrival. Inserting it
    // can itself land inside a customer's departure interval and enable an
    // even later arrival, so grow it to a fixpoint; otherwise a tuple could
    // be enterable yet have no representable return to the depot.
    let mut sink_point = 0.0f64;
    loop {
        let mut latest = 0.0f64;
        for v in sub.customer_nodes() {
            let (lo, hi) = departure_interval(sub, v);
            let d = sub.dist(v, sub.sink());
            for &p in points.iter().chain(std::iter::once(&sink_point)) {
                if p >= lo - EPS && p <= hi + EPS {
                    latest = latest.max(p + d);
                }
            }
        }
        let candidate = latest.min(sub.depot.due);
        if candidate <= sink_point + EPS {
            break;
        }
        sink_point = candidate;
    }
    if sink_point <= 0.0 {
        sink_point = 1.0;
    }
    insert_point(&mut points, sink_point);

    let mut departures = vec![Vec::new(); sub.n + 2];
    departures[0] = vec![0];
    for v in sub.customer_nodes() {
        let (lo, hi) = departure_interval(sub, v);
        departures[v.0] = points
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p >= lo - EPS && p <= hi + EPS)
            .map(|(i, _)| i)
            .collect();
    }
    departures[sub.n + 1] = points
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p > 0.0 && p <= sub.depot.due + EPS)
        .map(|(i, _)| i)
        .collect();

    Ok(TimeGrid::from_parts(points, departures))
}
