//! Solomon-format instances and seeded sub-instance sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One row of a Solomon file. `demand` is parsed but plays no role in
/// fleet sizing; it is kept for round-trips and reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub demand: f64,
    pub ready: f64,
    pub due: f64,
    pub service: f64,
}

/// A parsed instance file: depot first, then customers in file order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub depot: Customer,
    pub customers: Vec<Customer>,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: expected {expected} numeric fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse number {token:?}")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: customer {id} has ready {ready} > due {due}")]
    WindowOrder {
        line: usize,
        id: usize,
        ready: f64,
        due: f64,
    },
    #[error("line {line}: customer {id} has negative service time {service}")]
    NegativeService { line: usize, id: usize, service: f64 },
    #[error("no CUSTOMER section found")]
    MissingCustomerSection,
    #[error("no depot row (id 0) found")]
    MissingDepot,
    #[error("empty file")]
    Empty,
}

/// Parses the classic Solomon VRPTW layout: a name line, a VEHICLE block,
/// then a CUSTOMER table with columns
/// `id x y demand ready due service`. Column headers and blank lines are
/// skipped; errors carry 1-based line numbers.
pub fn parse_solomon(text: &str) -> Result<Instance, ParseError> {
    let mut name = None;
    let mut in_table = false;
    let mut rows: Vec<Customer> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() {
            continue;
        }
        if name.is_none() {
            name = Some(line.to_string());
            continue;
        }
        let upper = line.to_ascii_uppercase();
        if upper.starts_with("CUSTOMER") {
            in_table = true;
            continue;
        }
        if !in_table || upper.contains("CUST NO") || upper.starts_with("XCOORD") {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 7 {
            return Err(ParseError::FieldCount {
                line: lineno,
                expected: 7,
                found: tokens.len(),
            });
        }
        let mut nums = [0f64; 7];
        for (k, tok) in tokens.iter().enumerate() {
            nums[k] = tok.parse().map_err(|_| ParseError::BadNumber {
                line: lineno,
                token: tok.to_string(),
            })?;
        }
        let c = Customer {
            id: nums[0] as usize,
            x: nums[1],
            y: nums[2],
            demand: nums[3],
            ready: nums[4],
            due: nums[5],
            service: nums[6],
        };
        if c.ready > c.due {
            return Err(ParseError::WindowOrder {
                line: lineno,
                id: c.id,
                ready: c.ready,
                due: c.due,
            });
        }
        if c.service < 0.0 {
            return Err(ParseError::NegativeService {
                line: lineno,
                id: c.id,
                service: c.service,
            });
        }
        rows.push(c);
    }

    if name.is_none() {
        return Err(ParseError::Empty);
    }
    if !in_table {
        return Err(ParseError::MissingCustomerSection);
    }
    let depot_pos = rows
        .iter()
        .position(|c| c.id == 0)
        .ok_or(ParseError::MissingDepot)?;
    let depot = rows.remove(depot_pos);
    Ok(Instance {
        name: name.unwrap(),
        depot,
        customers: rows,
    })
}

/// How travel distances are derived from coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DistanceRounding {
    /// Full-precision Euclidean distances.
    #[default]
    Exact,
    /// Truncate to one decimal, a convention some published results use.
    /// Truncation can break the triangle inequality by up to 0.2, which
    /// the grid's reachability clamp assumes; use for sensitivity runs.
    OneDecimalTruncate,
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("requested {n} customers but instance {name} has {available}")]
    NotEnoughCustomers {
        n: usize,
        name: String,
        available: usize,
    },
    #[error("requested 0 customers")]
    Zero,
}

/// A seeded sub-instance over model node indices: `0` is the origin depot,
/// `1..=n` are the sampled customers (ascending original id), `n + 1` is
/// the sink copy of the depot.
#[derive(Debug, Clone, Serialize)]
pub struct SubInstance {
    pub name: String,
    pub n: usize,
    pub seed: u64,
    pub depot: Customer,
    /// Sampled customers, ascending original id; model node `k + 1`.
    pub customers: Vec<Customer>,
    /// `(n + 2) x (n + 2)` row-major distances over model node indices.
    pub dist: Vec<Vec<f64>>,
}

/// Node index into a [`SubInstance`]: `0` = origin depot, `1..=n` =
/// customers, `n + 1` = sink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Node(pub usize);

impl SubInstance {
    pub fn sink(&self) -> Node {
        Node(self.n + 1)
    }

    pub fn is_depot(&self, v: Node) -> bool {
        v.0 == 0 || v.0 == self.n + 1
    }

    /// Customer nodes `1..=n`.
    pub fn customer_nodes(&self) -> impl Iterator<Item = Node> {
        (1..=self.n).map(Node)
    }

    pub fn customer(&self, v: Node) -> &Customer {
        &self.customers[v.0 - 1]
    }

    /// `(ready, due)` window; both depot copies carry the depot window.
    pub fn window(&self, v: Node) -> (f64, f64) {
        if self.is_depot(v) {
            (self.depot.ready, self.depot.due)
        } else {
            let c = self.customer(v);
            (c.ready, c.due)
        }
    }

    pub fn service(&self, v: Node) -> f64 {
        if self.is_depot(v) {
            0.0
        } else {
            self.customer(v).service
        }
    }

    pub fn dist(&self, a: Node, b: Node) -> f64 {
        self.dist[a.0][b.0]
    }

    /// Original Solomon id for reporting; both depot copies print as 0.
    pub fn original_id(&self, v: Node) -> usize {
        if self.is_depot(v) {
            0
        } else {
            self.customer(v).id
        }
    }

    /// Canonical JSON used for golden tests and oracle cache keys.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

fn euclid(a: &Customer, b: &Customer, rounding: DistanceRounding) -> f64 {
    let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
    match rounding {
        DistanceRounding::Exact => d,
        DistanceRounding::OneDecimalTruncate => (d * 10.0).floor() / 10.0,
    }
}

/// Draws `n` distinct customers with a ChaCha stream seeded by `seed` and
/// builds the sub-instance. The draw is a Fisher-Yates prefix over customer
/// positions, so a given `(instance, n, seed)` always yields the same
/// sub-instance, byte-for-byte in its canonical JSON.
pub fn sample_customers(
    instance: &Instance,
    n: usize,
    seed: u64,
) -> Result<SubInstance, SampleError> {
    sample_customers_with(instance, n, seed, DistanceRounding::Exact)
}

pub fn sample_customers_with(
    instance: &Instance,
    n: usize,
    seed: u64,
    rounding: DistanceRounding,
) -> Result<SubInstance, SampleError> {
    if n == 0 {
        return Err(SampleError::Zero);
    }
    if n > instance.customers.len() {
        return Err(SampleError::NotEnoughCustomers {
            n,
            name: instance.name.clone(),
            available: instance.customers.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions: Vec<usize> = (0..instance.customers.len()).collect();
    for k in 0..n {
        let r = k + (rand::Rng::gen_range(&mut rng, 0..(positions.len() - k) as u64) as usize);
        positions.swap(k, r);
    }
    let mut chosen: Vec<Customer> = positions[..n]
        .iter()
        .map(|&p| instance.customers[p].clone())
        .collect();
    chosen.sort_by_key(|c| c.id);

    let mut nodes: Vec<&Customer> = Vec::with_capacity(n + 2);
    nodes.push(&instance.depot);
    nodes.extend(chosen.iter());
    nodes.push(&instance.depot);
    let dist: Vec<Vec<f64>> = nodes
        .iter()
        .map(|a| nodes.iter().map(|b| euclid(a, b, rounding)).collect())
        .collect();

    Ok(SubInstance {
        name: instance.name.clone(),
        n,
        seed,
        depot: instance.depot.clone(),
        customers: chosen,
        dist,
    })
}
