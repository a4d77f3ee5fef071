//! Coverage and flow equalities over the variable universe.

use super::vars::{VariableSet, VarStatus};
use crate::instance::{Node, SubInstance};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Customer `customer` is visited exactly once.
    Coverage { customer: Node },
    /// At node-time tuple `(node, dep)`, arrivals equal departures.
    Flow { node: Node, dep: usize },
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintKind::Coverage { customer } => write!(f, "coverage(customer {})", customer.0),
            ConstraintKind::Flow { node, dep } => write!(f, "flow(node {}, departure {})", node.0, dep),
        }
    }
}

/// One equality `sum(coeff * x) = target` over universe variable indices.
/// Membership is recorded once at build time; variables fixed later are
/// accounted for by status when the constraint is evaluated or compiled.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub members: Vec<(usize, f64)>,
    pub target: f64,
    pub removed: bool,
}

impl Constraint {
    /// Residual under the given lookup of variable values (0.0 or 1.0).
    pub fn residual(&self, value: impl Fn(usize) -> f64) -> f64 {
        self.members.iter().map(|&(v, a)| a * value(v)).sum::<f64>() - self.target
    }
}

#[derive(Debug, Clone)]
pub struct ConstraintSet {
    items: Vec<Constraint>,
    coverage_of: BTreeMap<usize, usize>,
    flow_of: BTreeMap<(usize, usize), usize>,
}

impl ConstraintSet {
    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn coverage(&self, customer: Node) -> Option<&Constraint> {
        self.coverage_of.get(&customer.0).map(|&i| &self.items[i])
    }

    pub fn flow(&self, node: Node, dep: usize) -> Option<&Constraint> {
        self.flow_of.get(&(node.0, dep)).map(|&i| &self.items[i])
    }

    /// Marks the customer's coverage equality removed. Returns whether a
    /// live constraint was present.
    pub fn remove_coverage(&mut self, customer: Node) -> bool {
        match self.coverage_of.get(&customer.0) {
            Some(&i) if !self.items[i].removed => {
                self.items[i].removed = true;
                true
            }
            _ => false,
        }
    }

    /// Marks the tuple's flow equality removed. Returns whether a live
    /// constraint was present.
    pub fn remove_flow(&mut self, node: Node, dep: usize) -> bool {
        match self.flow_of.get(&(node.0, dep)) {
            Some(&i) if !self.items[i].removed => {
                self.items[i].removed = true;
                true
            }
            _ => false,
        }
    }
}

/// One coverage equality per customer and one flow equality per customer
/// node-time tuple that carries at least one active variable. Incoming
/// variables enter flow with +1, outgoing with -1, so the equality reads
/// `arrivals - departures = 0`.
pub fn build_constraints(vars: &VariableSet, sub: &SubInstance) -> ConstraintSet {
    let mut items = Vec::new();
    let mut coverage_of = BTreeMap::new();
    let mut flow_of = BTreeMap::new();

    for c in sub.customer_nodes() {
        let members: Vec<(usize, f64)> = (0..vars.len())
            .filter(|&i| matches!(vars.status(i), VarStatus::Active) && vars.key(i).to == c)
            .map(|i| (i, 1.0))
            .collect();
        coverage_of.insert(c.0, items.len());
        items.push(Constraint {
            kind: ConstraintKind::Coverage { customer: c },
            members,
            target: 1.0,
            removed: false,
        });
    }

    for (node, dep) in vars.tuples() {
        let v = Node(node);
        if sub.is_depot(v) {
            continue;
        }
        let mut members: Vec<(usize, f64)> = Vec::new();
        for &i in vars.incoming(v, dep) {
            if matches!(vars.status(i), VarStatus::Active) {
                members.push((i, 1.0));
            }
        }
        for &i in vars.outgoing(v, dep) {
            if matches!(vars.status(i), VarStatus::Active) {
                members.push((i, -1.0));
            }
        }
        if members.is_empty() {
            continue;
        }
        flow_of.insert((node, dep), items.len());
        items.push(Constraint {
            kind: ConstraintKind::Flow { node: v, dep },
            members,
            target: 0.0,
        removed: false,
        });
    }

    ConstraintSet {
        items,
        coverage_of,
        flow_of,
    }
}
