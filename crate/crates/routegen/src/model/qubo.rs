//! Penalty compilation of the constrained model, Ising conversion, and a
//! plain-text exchange format.

use super::constraints::ConstraintSet;
use super::vars::{VariableSet, VarStatus};
use super::ModelError;
use std::collections::BTreeMap;

/// Penalty weights for squared coverage and flow residuals.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Penalties {
    pub coverage: f64,
    pub flow: f64,
}

impl Penalties {
    /// Weights that make any single constraint violation cost more than
    /// the largest possible objective swing: one vehicle per customer.
    pub fn for_fleet_bound(customers: usize) -> Self {
        let p = (2 * customers + 1) as f64;
        Penalties {
            coverage: p,
            flow: p,
        }
    }
}

/// Upper-triangular quadratic form over the active variables, with the
/// constant `offset` tracked so energies stay absolute when variables are
/// fixed out of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Qubo {
    pub n: usize,
    pub diag: Vec<f64>,
    /// Strictly upper-triangular entries `(a, b, coeff)`, `a < b`, sorted.
    pub pairs: Vec<(u32, u32, f64)>,
    pub offset: f64,
    pub penalties: Option<Penalties>,
}

impl Qubo {
    /// Energy of one 0/1 assignment.
    pub fn energy(&self, bits: &[u8]) -> f64 {
        debug_assert_eq!(bits.len(), self.n);
        let mut e = self.offset;
        for (i, &d) in self.diag.iter().enumerate() {
            if bits[i] == 1 {
                e += d;
            }
        }
        for &(a, b, q) in &self.pairs {
            if bits[a as usize] == 1 && bits[b as usize] == 1 {
                e += q;
            }
        }
        e
    }
}

/// Spin form of a [`Qubo`] under `x = (z + 1) / 2`, `z` in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub h: Vec<f64>,
    pub couplings: Vec<(u32, u32, f64)>,
    pub constant: f64,
}

impl IsingModel {
    pub fn energy(&self, spins: &[i8]) -> f64 {
        debug_assert_eq!(spins.len(), self.h.len());
        let mut e = self.constant;
        for (i, &h) in self.h.iter().enumerate() {
            e += h * spins[i] as f64;
        }
        for &(a, b, j) in &self.couplings {
            e += j * (spins[a as usize] as f64) * (spins[b as usize] as f64);
        }
        e
    }
}

/// Compiles the live constraints plus the fleet-size objective into a
/// QUBO over the currently active variables, returning the QUBO and the
/// map from dense index to universe variable index (lexicographic order).
///
/// Each live equality with residual `sum(a_k x_k) + c` contributes
/// `P * (sum(a_k x_k) + c)^2`, expanded with `x^2 = x` so linear terms
/// land on the diagonal; `c` collects members already fixed to 1 minus
/// the target. Objective terms add 1 per active depot-departure variable,
/// and depot departures already fixed to 1 are carried in the offset.
pub fn compile_qubo(
    cons: &ConstraintSet,
    vars: &VariableSet,
    penalties: Penalties,
) -> Result<(Qubo, Vec<usize>), ModelError> {
    if penalties.coverage <= 0.0 || penalties.flow <= 0.0 {
        return Err(ModelError::BadPenalty {
            coverage: penalties.coverage,
            flow: penalties.flow,
        });
    }

    let dense: Vec<usize> = vars.active_indices().collect();
    let mut dense_of = vec![usize::MAX; vars.len()];
    for (d, &u) in dense.iter().enumerate() {
        dense_of[u] = d;
    }

    let n = dense.len();
    let mut diag = vec![0.0; n];
    let mut offset = 0.0;
    let mut pair_acc: BTreeMap<(u32, u32), f64> = BTreeMap::new();

    for (u, &d) in dense_of.iter().enumerate() {
        if vars.key(u).from.0 == 0 {
            if d != usize::MAX {
                diag[d] += 1.0;
            } else if matches!(vars.status(u), VarStatus::Fixed1(_)) {
                offset += 1.0;
            }
        }
    }

    for con in cons.iter() {
        if con.removed {
            continue;
        }
        let p = match con.kind {
            super::ConstraintKind::Coverage { .. } => penalties.coverage,
            super::ConstraintKind::Flow { .. } => penalties.flow,
        };
        let mut c = -con.target;
        let mut live: Vec<(usize, f64)> = Vec::new();
        for &(u, a) in &con.members {
            match vars.status(u) {
                VarStatus::Active => live.push((dense_of[u], a)),
                VarStatus::Fixed1(_) => c += a,
                VarStatus::Fixed0(_) => {}
            }
        }
        offset += p * c * c;
        for &(k, a) in &live {
            diag[k] += p * a * (a + 2.0 * c);
        }
        for (x, &(k1, a1)) in live.iter().enumerate() {
            for &(k2, a2) in live.iter().skip(x + 1) {
                let (lo, hi) = if k1 < k2 { (k1, k2) } else { (k2, k1) };
                *pair_acc.entry((lo as u32, hi as u32)).or_insert(0.0) += 2.0 * p * a1 * a2;
            }
        }
    }

    let pairs: Vec<(u32, u32, f64)> = pair_acc
        .into_iter()
        .filter(|&(_, q)| q != 0.0)
        .map(|((a, b), q)| (a, b, q))
        .collect();

    Ok((
        Qubo {
            n,
            diag,
            pairs,
            offset,
            penalties: Some(penalties),
        },
        dense,
    ))
}

/// Independent evaluator used to cross-check compiled energies: walks the
/// live constraints directly, summing penalty-weighted squared residuals
/// plus the count of depot departures, without any quadratic expansion.
pub fn reference_energy(
    vars: &VariableSet,
    cons: &ConstraintSet,
    dense: &[usize],
    bits: &[u8],
    penalties: Penalties,
) -> f64 {
    let mut value = vec![0.0f64; vars.len()];
    for u in 0..vars.len() {
        if matches!(vars.status(u), VarStatus::Fixed1(_)) {
            value[u] = 1.0;
        }
    }
    for (d, &u) in dense.iter().enumerate() {
        if bits[d] == 1 {
            value[u] = 1.0;
        }
    }

    let mut e = (0..vars.len())
        .filter(|&u| vars.key(u).from.0 == 0)
        .map(|u| value[u])
        .sum::<f64>();

    for con in cons.iter() {
        if con.removed {
            continue;
        }
        let p = match con.kind {
            super::ConstraintKind::Coverage { .. } => penalties.coverage,
            super::ConstraintKind::Flow { .. } => penalties.flow,
        };
        let r = con.residual(|u| value[u]);
        e += p * r * r;
    }
    e
}

/// Spin conversion: diagonal `d*x` becomes `d/2 * z + d/2`; a pair
/// `q*x_a*x_b` becomes `q/4 * (z_a z_b + z_a + z_b + 1)`.
pub fn to_ising(q: &Qubo) -> IsingModel {
    let mut h = vec![0.0; q.n];
    let mut constant = q.offset;
    for (i, &d) in q.diag.iter().enumerate() {
        h[i] += d / 2.0;
        constant += d / 2.0;
    }
    let mut couplings = Vec::with_capacity(q.pairs.len());
    for &(a, b, c) in &q.pairs {
        couplings.push((a, b, c / 4.0));
        h[a as usize] += c / 4.0;
        h[b as usize] += c / 4.0;
        constant += c / 4.0;
    }
    IsingModel {
        h,
        couplings,
        constant,
    }
}

/// Text form: a `n m offset` header, then `m` lines `a b coeff` with
/// `a <= b` (diagonal when equal), sorted, deterministic byte-for-byte.
pub fn export_qubo_text(q: &Qubo) -> String {
    let mut entries: Vec<(u32, u32, f64)> = Vec::new();
    for (i, &d) in q.diag.iter().enumerate() {
        if d != 0.0 {
            entries.push((i as u32, i as u32, d));
        }
    }
    entries.extend(q.pairs.iter().copied());
    entries.sort_by_key(|&(a, b, _)| (a, b));

    let mut out = format!("{} {} {}\n", q.n, entries.len(), q.offset);
    for (a, b, c) in entries {
        out.push_str(&format!("{a} {b} {c}\n"));
    }
    out
}

pub fn parse_qubo_text(text: &str) -> Result<Qubo, ModelError> {
    let bad = |line: usize, message: &str| ModelError::BadQuboText {
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty input"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 3 {
        return Err(bad(1, "header must be `n m offset`"));
    }
    let n: usize = head[0].parse().map_err(|_| bad(1, "bad variable count"))?;
    let m: usize = head[1].parse().map_err(|_| bad(1, "bad entry count"))?;
    let offset: f64 = head[2].parse().map_err(|_| bad(1, "bad offset"))?;

    let mut diag = vec![0.0; n];
    let mut pairs = Vec::new();
    let mut seen = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad(lineno, "entry must be `a b coeff`"));
        }
        let a: u32 = f[0].parse().map_err(|_| bad(lineno, "bad index"))?;
        let b: u32 = f[1].parse().map_err(|_| bad(lineno, "bad index"))?;
        let c: f64 = f[2].parse().map_err(|_| bad(lineno, "bad coefficient"))?;
        if a as usize >= n || b as usize >= n || a > b {
            return Err(bad(lineno, "index out of range or unordered"));
        }
        if a == b {
            diag[a as usize] = c;
        } else {
            pairs.push((a, b, c));
        }
        seen += 1;
    }
    if seen != m {
        return Err(bad(1, "entry count does not match header"));
    }
    pairs.sort_by_key(|&(a, b, _)| (a, b));
    Ok(Qubo {
        n,
        diag,
        pairs,
        offset,
        penalties: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_time_grid, GridConfig};
    use crate::instance::{Customer, Node, SubInstance};
    use crate::model::{build_constraints, enumerate_variables, VarKey};

    fn customer(id: usize, ready: f64, due: f64, service: f64) -> Customer {
        Customer {
            id,
            x: 0.0,
            y: 0.0,
            demand: 0.0,
            ready,
            due,
            service,
        }
    }

    fn line_pair() -> SubInstance {
        SubInstance {
            name: "test".into(),
            n: 2,
            seed: 0,
            depot: customer(0, 0.0, 7.5, 0.0),
            customers: vec![customer(1, 1.0, 1.15, 1.0), customer(2, 3.5, 3.75, 1.0)],
            dist: vec![
                vec![0.0, 1.0, 3.0, 0.0],
                vec![1.0, 0.0, 2.0, 1.0],
                vec![3.0, 2.0, 0.0, 3.0],
                vec![0.0, 1.0, 3.0, 0.0],
            ],
        }
    }

    struct Compiled {
        vars: crate::model::VariableSet,
        cons: ConstraintSet,
        qubo: Qubo,
        dense: Vec<usize>,
        grid: crate::grid::TimeGrid,
    }

    fn compiled_line_pair() -> Compiled {
        let sub = line_pair();
        let grid = build_time_grid(&sub, &GridConfig::default()).unwrap();
        let vars = enumerate_variables(&sub, &grid).unwrap();
        let cons = build_constraints(&vars, &sub);
        let (qubo, dense) = compile_qubo(&cons, &vars, Penalties::for_fleet_bound(sub.n)).unwrap();
        Compiled {
            vars,
            cons,
            qubo,
            dense,
            grid,
        }
    }

    fn bits_for(c: &Compiled, chosen: &[(usize, f64, usize, f64)]) -> Vec<u8> {
        let mut bits = vec![0u8; c.qubo.n];
        for &(i, s, j, t) in chosen {
            let key = VarKey {
                from: Node(i),
                dep_from: c.grid.index_of(s).unwrap(),
                to: Node(j),
                dep_to: c.grid.index_of(t).unwrap(),
            };
            let u = c.vars.index_of(&key).unwrap();
            let d = c.dense.iter().position(|&x| x == u).unwrap();
            bits[d] = 1;
        }
        bits
    }

    #[test]
    fn default_penalty_exceeds_objective_range() {
        let p = Penalties::for_fleet_bound(2);
        assert_eq!((p.coverage, p.flow), (5.0, 5.0));
    }

    #[test]
    fn zero_penalty_is_an_error() {
        let sub = line_pair();
        let grid = build_time_grid(&sub, &GridConfig::default()).unwrap();
        let vars = enumerate_variables(&sub, &grid).unwrap();
        let cons = build_constraints(&vars, &sub);
        let p = Penalties {
            coverage: 0.0,
            flow: 5.0,
        };
        assert!(matches!(
            compile_qubo(&cons, &vars, p),
            Err(ModelError::BadPenalty { .. })
        ));
    }

    #[test]
    fn feasible_assignments_cost_their_fleet_size() {
        let c = compiled_line_pair();
        let two_routes = bits_for(
            &c,
            &[
                (0, 0.0, 1, 2.0),
                (0, 0.0, 2, 4.5),
                (1, 2.0, 3, 7.5),
                (2, 4.5, 3, 7.5),
            ],
        );
        assert_eq!(c.qubo.energy(&two_routes), 2.0);
        // alternative sink time for customer 1, same fleet size
        let variant = bits_for(
            &c,
            &[
                (0, 0.0, 1, 2.0),
                (0, 0.0, 2, 4.5),
                (1, 2.0, 3, 4.5),
                (2, 4.5, 3, 7.5),
            ],
        );
        assert_eq!(c.qubo.energy(&variant), 2.0);
        // empty assignment pays one coverage penalty per customer
        assert_eq!(c.qubo.energy(&vec![0u8; c.qubo.n]), 10.0);
    }

    #[test]
    fn single_flips_from_feasible_cost_at_least_one_penalty() {
        let c = compiled_line_pair();
        let feasible = bits_for(
            &c,
            &[
                (0, 0.0, 1, 2.0),
                (0, 0.0, 2, 4.5),
                (1, 2.0, 3, 7.5),
                (2, 4.5, 3, 7.5),
            ],
        );
        let base = c.qubo.energy(&feasible);
        let p = c.qubo.penalties.unwrap();
        for k in 0..c.qubo.n {
            let mut flipped = feasible.clone();
            flipped[k] ^= 1;
            assert!(
                c.qubo.energy(&flipped) >= base + p.coverage.min(p.flow) - 1e-9,
                "flip {k} too cheap"
            );
        }
    }

    #[test]
    fn qubo_reference_and_ising_agree_exhaustively() {
        let c = compiled_line_pair();
        let ising = to_ising(&c.qubo);
        let p = c.qubo.penalties.unwrap();
        for mask in 0u32..(1 << c.qubo.n) {
            let bits: Vec<u8> = (0..c.qubo.n).map(|i| ((mask >> i) & 1) as u8).collect();
            let spins: Vec<i8> = bits.iter().map(|&b| if b == 1 { 1 } else { -1 }).collect();
            let e = c.qubo.energy(&bits);
            let r = reference_energy(&c.vars, &c.cons, &c.dense, &bits, p);
            let i = ising.energy(&spins);
            assert!((e - r).abs() <= 1e-9, "qubo {e} vs reference {r} at {mask:b}");
            assert!((e - i).abs() <= 1e-9, "qubo {e} vs ising {i} at {mask:b}");
        }
    }

    #[test]
    fn ising_algebra_on_tiny_models() {
        let one = Qubo {
            n: 1,
            diag: vec![3.0],
            pairs: vec![],
            offset: 0.0,
            penalties: None,
        };
        let i1 = to_ising(&one);
        assert_eq!(i1.h, vec![1.5]);
        assert_eq!(i1.constant, 1.5);

        let two = Qubo {
            n: 2,
            diag: vec![0.0, 0.0],
            pairs: vec![(0, 1, 1.0)],
            offset: 0.0,
            penalties: None,
        };
        let i2 = to_ising(&two);
        assert_eq!(i2.couplings, vec![(0, 1, 0.25)]);
        assert_eq!(i2.h, vec![0.25, 0.25]);
        assert_eq!(i2.constant, 0.25);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let c = compiled_line_pair();
        let text = export_qubo_text(&c.qubo);
        assert!(text.starts_with("5 "), "five active variables: {text}");
        let parsed = parse_qubo_text(&text).unwrap();
        assert_eq!(parsed.n, c.qubo.n);
        assert_eq!(parsed.diag, c.qubo.diag);
        assert_eq!(parsed.pairs, c.qubo.pairs);
        assert_eq!(parsed.offset, c.qubo.offset);
        assert_eq!(text, export_qubo_text(&parsed));
    }

    #[test]
    fn malformed_text_names_line() {
        assert!(matches!(
            parse_qubo_text("2 1 0\n0 1\n"),
            Err(ModelError::BadQuboText { line: 2, .. })
        ));
        assert!(matches!(
            parse_qubo_text("2 5 0\n0 1 1.0\n"),
            Err(ModelError::BadQuboText { line: 1, .. })
        ));
    }
}
