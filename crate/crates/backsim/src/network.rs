//! Data model for discrete Bayesian networks.
//!
//! A [`Network`] is a directed acyclic graph of discrete variables. Each
//! variable carries an ordered list of state labels, an ordered list of
//! parent nodes, and a conditional probability table with one row per
//! parent configuration.
//!
//! CPT rows are addressed by a mixed-radix encoding of the parent
//! configuration in which the *first listed parent is most significant*.
//! For a node with parents `[P, Q]` where `P` has 2 states and `Q` has 3,
//! row `i` corresponds to `P = i / 3`, `Q = i % 3`. This convention is
//! part of the file format and is relied on throughout the crate.
//!
//! All types here are immutable after construction and safe to share
//! across threads; every operation is a pure function of its inputs.
//! Structural invariants are not enforced by constructors; they are
//! checked by [`validate_network`], which reports violations as data.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Index of a node within its network. Indices are dense and 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Conditional probability table: one row per parent configuration, one
/// entry per state of the owning variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Cpt { rows }
    }
}

/// One discrete variable: name, ordered state labels, ordered parents,
/// and the conditional probability table.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
    pub parents: Vec<NodeId>,
    pub cpt: Cpt,
}

/// A discrete Bayesian network. The edge set is implied by the per-node
/// parent lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    variables: Vec<Variable>,
}

/// Observed evidence: a map from node to observed state index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evidence {
    assignments: BTreeMap<NodeId, usize>,
}

impl Evidence {
    pub fn empty() -> Self {
        Evidence::default()
    }

    pub fn set(&mut self, node: NodeId, state: usize) {
        self.assignments.insert(node, state);
    }

    pub fn get(&self, node: NodeId) -> Option<usize> {
        self.assignments.get(&node).copied()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.assignments.contains_key(&node)
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    /// Iterate assignments in ascending node order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, usize)> + '_ {
        self.assignments.iter().map(|(&n, &s)| (n, s))
    }
}

impl FromIterator<(NodeId, usize)> for Evidence {
    fn from_iter<T: IntoIterator<Item = (NodeId, usize)>>(iter: T) -> Self {
        Evidence {
            assignments: iter.into_iter().collect(),
        }
    }
}

/// A partial or full assignment of states to nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Instantiation {
    values: Vec<Option<usize>>,
}

impl Instantiation {
    /// An instantiation over `len` nodes with nothing assigned.
    pub fn empty(len: usize) -> Self {
        Instantiation {
            values: vec![None; len],
        }
    }

    /// Start from the evidence: every observed node is assigned its
    /// observed state, everything else is unassigned.
    pub fn from_evidence(len: usize, evidence: &Evidence) -> Self {
        let mut inst = Instantiation::empty(len);
        for (node, state) in evidence.iter() {
            inst.set(node, state);
        }
        inst
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, node: NodeId) -> Option<usize> {
        self.values[node.0]
    }

    pub fn is_set(&self, node: NodeId) -> bool {
        self.values[node.0].is_some()
    }

    pub fn set(&mut self, node: NodeId, state: usize) {
        self.values[node.0] = Some(state);
    }

    /// True when every node has exactly one assigned state.
    pub fn is_full(&self) -> bool {
        self.values.iter().all(|v| v.is_some())
    }
}

/// Evaluation failure: an operation needed a state that was not assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("node {0} has no assigned state")]
    Unassigned(NodeId),
}

impl Network {
    pub fn new(variables: Vec<Variable>) -> Self {
        Network { variables }
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, node: NodeId) -> &Variable {
        &self.variables[node.0]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.variables.len()).map(NodeId)
    }

    pub fn name(&self, node: NodeId) -> &str {
        &self.variables[node.0].name
    }

    pub fn state_count(&self, node: NodeId) -> usize {
        self.variables[node.0].states.len()
    }

    /// Look a node up by name. Linear scan; networks here are small.
    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .map(NodeId)
    }

    pub fn state_index(&self, node: NodeId, label: &str) -> Option<usize> {
        self.variables[node.0]
            .states
            .iter()
            .position(|s| s == label)
    }

    /// Child lists derived from the parent lists, each sorted by index.
    pub fn children(&self) -> Vec<Vec<NodeId>> {
        let mut children = vec![Vec::new(); self.variables.len()];
        for (i, var) in self.variables.iter().enumerate() {
            for &p in &var.parents {
                if p.0 < children.len() {
                    children[p.0].push(NodeId(i));
                }
            }
        }
        children
    }

    /// Total number of joint states, saturating at `u128::MAX`.
    pub fn joint_state_count(&self) -> u128 {
        self.variables
            .iter()
            .fold(1u128, |acc, v| acc.saturating_mul(v.states.len() as u128))
    }

    /// Canonical topological order: Kahn's algorithm, always emitting the
    /// smallest-index ready node. `Err` carries one cycle as a node
    /// sequence in arc direction.
    pub fn topological_order(&self) -> Result<Vec<NodeId>, Vec<NodeId>> {
        let n = self.variables.len();
        // In-degree of a node is its in-range parent count.
        let mut indegree: Vec<usize> = self
            .variables
            .iter()
            .map(|var| var.parents.iter().filter(|p| p.0 < n).count())
            .collect();
        let children = self.children();
        let mut ready: std::collections::BTreeSet<usize> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| i)
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            order.push(NodeId(i));
            for &c in &children[i] {
                indegree[c.0] -= 1;
                if indegree[c.0] == 0 {
                    ready.insert(c.0);
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err(self.extract_cycle(&indegree))
        }
    }

    /// Walk parent links inside the leftover set until a node repeats.
    fn extract_cycle(&self, indegree: &[usize]) -> Vec<NodeId> {
        let n = self.variables.len();
        let leftover: Vec<bool> = indegree.iter().map(|&d| d > 0).collect();
        let start = (0..n).find(|&i| leftover[i]).expect("cycle exists");
        let mut path: Vec<usize> = vec![start];
        loop {
            let cur = *path.last().unwrap();
            let next = self.variables[cur]
                .parents
                .iter()
                .map(|p| p.0)
                .filter(|&p| p < n && leftover[p])
                .min()
                .expect("leftover node has a leftover parent");
            if let Some(pos) = path.iter().position(|&x| x == next) {
                // path[pos..] followed parent links; reverse to arc direction.
                let mut cycle: Vec<usize> = path[pos..].to_vec();
                cycle.reverse();
                // Rotate so the smallest index leads, for determinism.
                let lead = cycle
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, &x)| x)
                    .map(|(i, _)| i)
                    .unwrap();
                cycle.rotate_left(lead);
                return cycle.into_iter().map(NodeId).collect();
            }
            path.push(next);
        }
    }

    /// All ancestors (transitive parents) of the given seed nodes.
    pub fn ancestors_of(&self, seeds: impl IntoIterator<Item = NodeId>) -> Vec<bool> {
        let n = self.variables.len();
        let mut marked = vec![false; n];
        let mut stack: Vec<usize> = seeds.into_iter().map(|n| n.0).collect();
        while let Some(i) = stack.pop() {
            for &p in &self.variables[i].parents {
                if p.0 < n && !marked[p.0] {
                    marked[p.0] = true;
                    stack.push(p.0);
                }
            }
        }
        marked
    }

    /// Row index for `node` under the mixed-radix convention, taking
    /// parent values from `assignment`.
    pub fn row_index(&self, node: NodeId, assignment: &Instantiation) -> Result<usize, EvalError> {
        let var = &self.variables[node.0];
        let mut idx = 0usize;
        for &p in &var.parents {
            let v = assignment.get(p).ok_or(EvalError::Unassigned(p))?;
            idx = idx * self.variables[p.0].states.len() + v;
        }
        Ok(idx)
    }

    /// The CPT row selected by the parent values in `assignment`.
    /// Returns a borrow; rows are never copied or renormalized.
    pub fn cpt_row(&self, node: NodeId, assignment: &Instantiation) -> Result<&[f64], EvalError> {
        let idx = self.row_index(node, assignment)?;
        Ok(&self.variables[node.0].cpt.rows[idx])
    }

    /// Joint probability of a full instantiation: the product over all
    /// nodes of the node's CPT entry given its parents. Zero is a legal
    /// result.
    pub fn joint_probability(&self, x: &Instantiation) -> Result<f64, EvalError> {
        let mut product = 1.0;
        for (i, _) in self.variables.iter().enumerate() {
            let node = NodeId(i);
            let state = x.get(node).ok_or(EvalError::Unassigned(node))?;
            let row = self.cpt_row(node, x)?;
            product *= row[state];
        }
        Ok(product)
    }
}

/// Tolerance for CPT row sums on input. Rows are *not* renormalized.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// A structural invariant violation. Violations are report data, not
/// failures; [`validate_network`] returns all of them at once.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyName {
        node: NodeId,
    },
    DuplicateName {
        name: String,
    },
    TooFewStates {
        node: String,
        count: usize,
    },
    DuplicateState {
        node: String,
        label: String,
    },
    SelfParent {
        node: String,
    },
    DuplicateParent {
        node: String,
        parent: String,
    },
    UnknownParent {
        node: String,
        index: usize,
    },
    RowCount {
        node: String,
        expected: u128,
        actual: usize,
    },
    RowLength {
        node: String,
        row: usize,
        expected: usize,
        actual: usize,
    },
    NotAProbability {
        node: String,
        row: usize,
        index: usize,
        value: f64,
    },
    RowSum {
        node: String,
        row: usize,
        sum: f64,
    },
    Cycle {
        nodes: Vec<String>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyName { node } => write!(f, "node {node} has an empty name"),
            Violation::DuplicateName { name } => write!(f, "duplicate node name {name:?}"),
            Violation::TooFewStates { node, count } => {
                write!(f, "node {node:?} has {count} state(s); at least 2 required")
            }
            Violation::DuplicateState { node, label } => {
                write!(f, "node {node:?} has duplicate state label {label:?}")
            }
            Violation::SelfParent { node } => write!(f, "node {node:?} lists itself as a parent"),
            Violation::DuplicateParent { node, parent } => {
                write!(f, "node {node:?} lists parent {parent:?} more than once")
            }
            Violation::UnknownParent { node, index } => {
                write!(f, "node {node:?} references nonexistent parent index {index}")
            }
            Violation::RowCount { node, expected, actual } => write!(
                f,
                "node {node:?}: CPT has {actual} row(s), expected {expected} (product of parent state counts)"
            ),
            Violation::RowLength { node, row, expected, actual } => write!(
                f,
                "node {node:?}: CPT row {row} has {actual} entries, expected {expected}"
            ),
            Violation::NotAProbability { node, row, index, value } => write!(
                f,
                "node {node:?}: CPT row {row} entry {index} is {value}, outside [0, 1]"
            ),
            Violation::RowSum { node, row, sum } => {
                write!(f, "node {node:?}: CPT row {row} sums to {sum}, not 1 (row sum != 1)")
            }
            Violation::Cycle { nodes } => {
                write!(f, "cycle: {} -> {}", nodes.join(" -> "), nodes[0])
            }
        }
    }
}

/// Check every structural invariant of a network and report all
/// violations. An empty report means the network is valid.
pub fn validate_network(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = net.len();

    let mut seen = std::collections::HashSet::new();
    for (i, var) in net.variables().iter().enumerate() {
        if var.name.is_empty() {
            out.push(Violation::EmptyName { node: NodeId(i) });
        }
        if !seen.insert(var.name.clone()) {
            out.push(Violation::DuplicateName {
                name: var.name.clone(),
            });
        }
    }

    for (i, var) in net.variables().iter().enumerate() {
        if var.states.len() < 2 {
            out.push(Violation::TooFewStates {
                node: var.name.clone(),
                count: var.states.len(),
            });
        }
        let mut labels = std::collections::HashSet::new();
        for label in &var.states {
            if !labels.insert(label) {
                out.push(Violation::DuplicateState {
                    node: var.name.clone(),
                    label: label.clone(),
                });
            }
        }

        let mut parent_ok = true;
        let mut parents_seen = std::collections::HashSet::new();
        for &p in &var.parents {
            if p.0 >= n {
                out.push(Violation::UnknownParent {
                    node: var.name.clone(),
                    index: p.0,
                });
                parent_ok = false;
                continue;
            }
            if p.0 == i {
                out.push(Violation::SelfParent {
                    node: var.name.clone(),
                });
            }
            if !parents_seen.insert(p.0) {
                out.push(Violation::DuplicateParent {
                    node: var.name.clone(),
                    parent: net.name(p).to_string(),
                });
            }
        }

        if parent_ok {
            let expected_rows: u128 = var.parents.iter().fold(1u128, |acc, p| {
                acc.saturating_mul(net.state_count(*p) as u128)
            });
            if var.cpt.rows.len() as u128 != expected_rows {
                out.push(Violation::RowCount {
                    node: var.name.clone(),
                    expected: expected_rows,
                    actual: var.cpt.rows.len(),
                });
            }
        }

        for (r, row) in var.cpt.rows.iter().enumerate() {
            if row.len() != var.states.len() {
                out.push(Violation::RowLength {
                    node: var.name.clone(),
                    row: r,
                    expected: var.states.len(),
                    actual: row.len(),
                });
                continue;
            }
            let mut sum = 0.0;
            let mut entries_ok = true;
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) || v.is_nan() {
                    out.push(Violation::NotAProbability {
                        node: var.name.clone(),
                        row: r,
                        index: j,
                        value: v,
                    });
                    entries_ok = false;
                }
                sum += v;
            }
            if entries_ok && (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                out.push(Violation::RowSum {
                    node: var.name.clone(),
                    row: r,
                    sum,
                });
            }
        }
    }

    if let Err(cycle) = net.topological_order() {
        out.push(Violation::Cycle {
            nodes: cycle.iter().map(|&n| net.name(n).to_string()).collect(),
        });
    }

    out
}

/// Step a mixed-radix counter: `digits[k]` counts in base `radix(k)`,
/// with the *last* digit least significant. Returns false on wraparound.
pub(crate) fn advance_mixed_radix(digits: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for k in (0..digits.len()).rev() {
        digits[k] += 1;
        if digits[k] < radix(k) {
            return true;
        }
        digits[k] = 0;
    }
    false
}
