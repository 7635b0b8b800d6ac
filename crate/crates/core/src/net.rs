//! Discrete Bayesian-network representation: nodes, CPTs, evidence,
//! validation, topological ordering, and exact joint evaluation of full
//! assignments.
//!
//! A [`Network`] is plain data. Construction only resolves parent references
//! to indices; everything else an invalid model can exhibit (cycles, bad row
//! sums, wrong table shapes, duplicate identifiers) is representable and
//! reported by [`Network::validate`], so that a validator front-end can show
//! all problems instead of failing on the first.

use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

use crate::numeric::compensated_total;

/// Absolute tolerance on CPT row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("node {node}: unknown parent {parent:?}")]
    UnknownParent { node: String, parent: String },
    #[error("unknown node {id:?}")]
    UnknownNode { id: String },
    #[error("node {node}: unknown state {state:?}")]
    UnknownState { node: String, state: String },
    #[error("node {node}: state index {index} out of range (has {count} states)")]
    StateOutOfRange {
        node: String,
        index: usize,
        count: usize,
    },
    #[error("network contains a directed cycle through {node:?}")]
    Cycle { node: String },
    #[error("assignment covers {got} nodes, network has {expected}")]
    IncompleteAssignment { expected: usize, got: usize },
    #[error("node {node}: CPT is malformed (missing row or entry)")]
    MalformedCpt { node: String },
}

/// Dense conditional probability table. One row per parent configuration,
/// rows indexed with the first declared parent as the most significant
/// digit; a parentless node has exactly one row.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, index: usize) -> Option<&[f64]> {
        self.rows.get(index).map(Vec::as_slice)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    id: String,
    states: Vec<String>,
    parents: Vec<usize>,
    cpt: Cpt,
}

impl Node {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    /// Parent node indices in declared order.
    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn cpt(&self) -> &Cpt {
        &self.cpt
    }
}

/// A complete assignment: one state index per network node, in declaration
/// order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<usize>,
}

impl Assignment {
    pub fn new(values: Vec<usize>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn value(&self, node: usize) -> usize {
        self.values[node]
    }
}

/// Observed states, keyed by node index. Construction validates that every
/// referenced node exists and every state index is in range, so downstream
/// code can index without checking.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Evidence {
    assignments: BTreeMap<usize, usize>,
}

impl Evidence {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(network: &Network, pairs: &[(usize, usize)]) -> Result<Self, NetworkError> {
        let mut assignments = BTreeMap::new();
        for &(node, state) in pairs {
            let n = network
                .nodes
                .get(node)
                .ok_or_else(|| NetworkError::UnknownNode {
                    id: format!("#{node}"),
                })?;
            if state >= n.state_count() {
                return Err(NetworkError::StateOutOfRange {
                    node: n.id.clone(),
                    index: state,
                    count: n.state_count(),
                });
            }
            assignments.insert(node, state);
        }
        Ok(Self { assignments })
    }

    /// Resolve `(node id, state label)` pairs against the network.
    pub fn from_labels(network: &Network, pairs: &[(&str, &str)]) -> Result<Self, NetworkError> {
        let mut resolved = Vec::with_capacity(pairs.len());
        for &(id, label) in pairs {
            let node = network
                .node_index(id)
                .ok_or_else(|| NetworkError::UnknownNode { id: id.to_string() })?;
            let state = network.nodes[node].state_index(label).ok_or_else(|| {
                NetworkError::UnknownState {
                    node: id.to_string(),
                    state: label.to_string(),
                }
            })?;
            resolved.push((node, state));
        }
        Evidence::new(network, &resolved)
    }

    pub fn get(&self, node: usize) -> Option<usize> {
        self.assignments.get(&node).copied()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.assignments.contains_key(&node)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignments.iter().map(|(&n, &s)| (n, s))
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Kind of invariant violation found by [`Network::validate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    DuplicateId,
    BadStateCount,
    ArityMismatch,
    RowSum,
    EntryRange,
    Cycle,
}

impl ViolationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationKind::DuplicateId => "duplicate-id",
            ViolationKind::BadStateCount => "bad-state-count",
            ViolationKind::ArityMismatch => "arity-mismatch",
            ViolationKind::RowSum => "row-sum",
            ViolationKind::EntryRange => "entry-range",
            ViolationKind::Cycle => "cycle",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Violation {
    pub node: Option<String>,
    pub kind: ViolationKind,
    pub message: String,
}

/// Violations are data, not failures: an empty report means the network
/// satisfies every structural invariant.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A named DAG of discrete chance nodes. Immutable after construction; all
/// operations are pure functions, so sharing across threads is free.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    name: String,
    nodes: Vec<Node>,
}

/// Incrementally assembles a network from nodes whose parents are referenced
/// by id. References resolve against all declared nodes (forward references
/// are fine); an id declared twice resolves to its first declaration.
#[derive(Default)]
pub struct NetworkBuilder {
    name: String,
    nodes: Vec<(String, Vec<String>, Vec<String>, Vec<Vec<f64>>)>,
}

impl NetworkBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            nodes: Vec::new(),
        }
    }

    pub fn node(
        mut self,
        id: impl Into<String>,
        states: &[&str],
        parents: &[&str],
        cpt_rows: Vec<Vec<f64>>,
    ) -> Self {
        self.nodes.push((
            id.into(),
            states.iter().map(|s| s.to_string()).collect(),
            parents.iter().map(|p| p.to_string()).collect(),
            cpt_rows,
        ));
        self
    }

    pub fn build(self) -> Result<Network, NetworkError> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, (id, ..)) in self.nodes.iter().enumerate() {
            index.entry(id.as_str()).or_insert(i);
        }
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (id, states, parent_ids, cpt_rows) in &self.nodes {
            let mut parents = Vec::with_capacity(parent_ids.len());
            for p in parent_ids {
                let pi = *index
                    .get(p.as_str())
                    .ok_or_else(|| NetworkError::UnknownParent {
                        node: id.clone(),
                        parent: p.clone(),
                    })?;
                parents.push(pi);
            }
            nodes.push(Node {
                id: id.clone(),
                states: states.clone(),
                parents,
                cpt: Cpt::new(cpt_rows.clone()),
            });
        }
        Ok(Network {
            name: self.name,
            nodes,
        })
    }
}

impl Network {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, index: usize) -> &Node {
        &self.nodes[index]
    }

    /// Index of the first node declared with this id.
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Children of each node, in declaration order of the child.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            for &p in &node.parents {
                children[p].push(i);
            }
        }
        children
    }

    /// Row index into a node's CPT for the parent states reported by
    /// `state_of`. First declared parent is the most significant digit.
    pub fn cpt_row_index(&self, node: usize, state_of: impl Fn(usize) -> usize) -> usize {
        let mut idx = 0usize;
        for &p in &self.nodes[node].parents {
            idx = idx * self.nodes[p].state_count() + state_of(p);
        }
        idx
    }

    /// Number of parent configurations (CPT rows) a node must have.
    pub fn parent_config_count(&self, node: usize) -> usize {
        self.nodes[node]
            .parents
            .iter()
            .map(|&p| self.nodes[p].state_count())
            .product()
    }

    /// Product of all node cardinalities, saturating at `u128::MAX`.
    pub fn joint_assignment_count(&self) -> u128 {
        let mut total: u128 = 1;
        for n in &self.nodes {
            total = total.saturating_mul(n.state_count() as u128);
        }
        total
    }

    /// Check every structural invariant and report each violation with the
    /// offending node and kind.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for node in &self.nodes {
            *seen.entry(node.id.as_str()).or_insert(0) += 1;
        }
        for (id, count) in seen.iter() {
            if *count > 1 {
                report.violations.push(Violation {
                    node: Some(id.to_string()),
                    kind: ViolationKind::DuplicateId,
                    message: format!("id {id:?} declared {count} times"),
                });
            }
        }
        // Deterministic report order regardless of hash iteration.
        report
            .violations
            .sort_by(|a, b| a.node.cmp(&b.node));

        for (i, node) in self.nodes.iter().enumerate() {
            if node.states.is_empty() {
                report.violations.push(Violation {
                    node: Some(node.id.clone()),
                    kind: ViolationKind::BadStateCount,
                    message: format!("node {:?} has no states", node.id),
                });
                continue;
            }
            let expected_rows = self.parent_config_count(i);
            if node.cpt.row_count() != expected_rows {
                report.violations.push(Violation {
                    node: Some(node.id.clone()),
                    kind: ViolationKind::ArityMismatch,
                    message: format!(
                        "node {:?}: expected {} CPT row(s) for its parent configurations, found {}",
                        node.id,
                        expected_rows,
                        node.cpt.row_count()
                    ),
                });
            }
            for (r, row) in node.cpt.rows().iter().enumerate() {
                if row.len() != node.state_count() {
                    report.violations.push(Violation {
                        node: Some(node.id.clone()),
                        kind: ViolationKind::ArityMismatch,
                        message: format!(
                            "node {:?} row {}: {} entries for {} states",
                            node.id,
                            r,
                            row.len(),
                            node.state_count()
                        ),
                    });
                    continue;
                }
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p) || p.is_nan()) {
                    report.violations.push(Violation {
                        node: Some(node.id.clone()),
                        kind: ViolationKind::EntryRange,
                        message: format!("node {:?} row {}: entry outside [0, 1]", node.id, r),
                    });
                    continue;
                }
                let sum = compensated_total(row.iter().copied());
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    report.violations.push(Violation {
                        node: Some(node.id.clone()),
                        kind: ViolationKind::RowSum,
                        message: format!(
                            "node {:?} row {}: probabilities sum to {sum}, not 1",
                            node.id, r
                        ),
                    });
                }
            }
        }

        if let Err(NetworkError::Cycle { node }) = self.topological_order() {
            report.violations.push(Violation {
                node: Some(node.clone()),
                kind: ViolationKind::Cycle,
                message: format!("directed cycle through {node:?}"),
            });
        }
        report
    }

    /// Topological order of node indices. Deterministic: among ready nodes
    /// the one declared first is emitted first.
    pub fn topological_order(&self) -> Result<Vec<usize>, NetworkError> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        for (i, node) in self.nodes.iter().enumerate() {
            indegree[i] = node.parents.len();
        }
        let mut order = Vec::with_capacity(n);
        let mut emitted = vec![false; n];
        let children = self.children();
        for _ in 0..n {
            let next = (0..n).find(|&i| !emitted[i] && indegree[i] == 0);
            match next {
                Some(i) => {
                    emitted[i] = true;
                    order.push(i);
                    for &c in &children[i] {
                        // A node may list the same parent twice; each edge
                        // contributes to the indegree separately.
                        let multiplicity =
                            self.nodes[c].parents.iter().filter(|&&p| p == i).count();
                        indegree[c] = indegree[c].saturating_sub(multiplicity);
                    }
                }
                None => {
                    let on_cycle = self.find_cycle_node(&emitted);
                    return Err(NetworkError::Cycle {
                        node: self.nodes[on_cycle].id.clone(),
                    });
                }
            }
        }
        Ok(order)
    }

    /// Walk parent links among unemitted nodes until one repeats; that node
    /// lies on a directed cycle.
    fn find_cycle_node(&self, emitted: &[bool]) -> usize {
        let start = (0..self.nodes.len())
            .find(|&i| !emitted[i])
            .expect("cycle search requires a stuck node");
        let mut seen = vec![false; self.nodes.len()];
        let mut current = start;
        loop {
            if seen[current] {
                return current;
            }
            seen[current] = true;
            current = *self.nodes[current]
                .parents
                .iter()
                .find(|&&p| !emitted[p])
                .expect("stuck node must have an unemitted parent");
        }
    }

    /// Exact probability of a complete assignment: the product of one CPT
    /// entry per node.
    pub fn joint_probability(&self, assignment: &Assignment) -> Result<f64, NetworkError> {
        if assignment.values.len() != self.nodes.len() {
            return Err(NetworkError::IncompleteAssignment {
                expected: self.nodes.len(),
                got: assignment.values.len(),
            });
        }
        let mut product = 1.0;
        for (i, node) in self.nodes.iter().enumerate() {
            let row = self.cpt_row_index(i, |p| assignment.values[p]);
            let p = node
                .cpt
                .row(row)
                .and_then(|r| r.get(assignment.values[i]))
                .ok_or_else(|| NetworkError::MalformedCpt {
                    node: node.id.clone(),
                })?;
            product *= p;
        }
        Ok(product)
    }

    /// Longest directed root-to-node path length per node.
    pub fn depths(&self) -> Result<Vec<usize>, NetworkError> {
        let order = self.topological_order()?;
        let mut depth = vec![0usize; self.nodes.len()];
        for &i in &order {
            depth[i] = self.nodes[i]
                .parents
                .iter()
                .map(|&p| depth[p] + 1)
                .max()
                .unwrap_or(0);
        }
        Ok(depth)
    }

    /// Depth of the deepest evidence node; 0 for root-only or empty
    /// evidence.
    pub fn deepest_evidence_depth(&self, evidence: &Evidence) -> Result<usize, NetworkError> {
        if evidence.is_empty() {
            return Ok(0);
        }
        let depth = self.depths()?;
        Ok(evidence.iter().map(|(n, _)| depth[n]).max().unwrap_or(0))
    }

    /// True when the undirected skeleton is acyclic.
    pub fn is_polytree(&self) -> bool {
        let mut parent = (0..self.nodes.len()).collect::<Vec<_>>();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (i, node) in self.nodes.iter().enumerate() {
            for &p in &node.parents {
                let (a, b) = (find(&mut parent, i), find(&mut parent, p));
                if a == b {
                    return false;
                }
                parent[a] = b;
            }
        }
        true
    }

    /// Longest shortest path in the undirected skeleton, maximized over
    /// connected components. The message-passing radius on polytrees.
    pub fn undirected_diameter(&self) -> usize {
        let n = self.nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            for &p in &node.parents {
                adjacency[i].push(p);
                adjacency[p].push(i);
            }
        }
        let mut diameter = 0;
        for start in 0..n {
            let mut dist = vec![usize::MAX; n];
            dist[start] = 0;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &adjacency[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            let ecc = dist.iter().filter(|&&d| d != usize::MAX).max().copied();
            diameter = diameter.max(ecc.unwrap_or(0));
        }
        diameter
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{chain3, diamond};

    #[test]
    fn chain3_is_valid() {
        assert!(chain3().validate().is_empty());
    }

    #[test]
    fn row_sum_violation_is_reported() {
        let net = NetworkBuilder::new("bad")
            .node("A", &["0", "1"], &[], vec![vec![0.8, 0.2]])
            .node(
                "B",
                &["0", "1"],
                &["A"],
                vec![vec![0.9, 0.1], vec![0.5, 0.6]],
            )
            .build()
            .unwrap();
        let report = net.validate();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::RowSum);
        assert_eq!(report.violations[0].node.as_deref(), Some("B"));
    }

    #[test]
    fn two_cycle_is_reported() {
        let net = NetworkBuilder::new("loop")
            .node(
                "A",
                &["0", "1"],
                &["B"],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            )
            .node(
                "B",
                &["0", "1"],
                &["A"],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            )
            .build()
            .unwrap();
        let report = net.validate();
        let cycles: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.kind == ViolationKind::Cycle)
            .collect();
        assert_eq!(cycles.len(), 1);
    }

    #[test]
    fn duplicate_id_and_arity_are_reported() {
        let net = NetworkBuilder::new("dup")
            .node("A", &["0", "1"], &[], vec![vec![0.8, 0.2]])
            .node("A", &["0", "1"], &[], vec![vec![0.8, 0.2]])
            .node("B", &["0", "1"], &["A"], vec![vec![0.9, 0.1]])
            .build()
            .unwrap();
        let report = net.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::DuplicateId));
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::ArityMismatch && v.node.as_deref() == Some("B")));
    }

    #[test]
    fn bad_state_count_is_reported() {
        let net = NetworkBuilder::new("empty-states")
            .node("A", &[], &[], vec![])
            .build()
            .unwrap();
        let report = net.validate();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::BadStateCount);
    }

    #[test]
    fn topological_order_chain() {
        let net = chain3();
        let order = net.topological_order().unwrap();
        let ids: Vec<_> = order.iter().map(|&i| net.node(i).id()).collect();
        assert_eq!(ids, ["A", "B", "C"]);
    }

    #[test]
    fn topological_order_diamond_breaks_ties_by_declaration() {
        let net = diamond();
        let order = net.topological_order().unwrap();
        let ids: Vec<_> = order.iter().map(|&i| net.node(i).id()).collect();
        assert_eq!(ids, ["A", "B", "C", "D"]);
    }

    #[test]
    fn topological_order_single_node() {
        let net = NetworkBuilder::new("one")
            .node("X", &["0"], &[], vec![vec![1.0]])
            .build()
            .unwrap();
        assert_eq!(net.topological_order().unwrap(), vec![0]);
    }

    #[test]
    fn topological_order_cycle_names_a_node() {
        let net = NetworkBuilder::new("loop")
            .node(
                "A",
                &["0", "1"],
                &["B"],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            )
            .node(
                "B",
                &["0", "1"],
                &["A"],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            )
            .build()
            .unwrap();
        match net.topological_order() {
            Err(NetworkError::Cycle { node }) => assert!(node == "A" || node == "B"),
            other => panic!("expected cycle error, got {other:?}"),
        }
    }

    #[test]
    fn joint_probability_matches_hand_products() {
        let net = chain3();
        let p111 = net
            .joint_probability(&Assignment::new(vec![1, 1, 1]))
            .unwrap();
        assert!((p111 - 0.2 * 0.8 * 0.9).abs() < 1e-15);
        let p000 = net
            .joint_probability(&Assignment::new(vec![0, 0, 0]))
            .unwrap();
        assert!((p000 - 0.8 * 0.9 * 0.8).abs() < 1e-15);
    }

    #[test]
    fn joint_probability_zero_factor() {
        let net = NetworkBuilder::new("zero")
            .node("A", &["0", "1"], &[], vec![vec![1.0, 0.0]])
            .build()
            .unwrap();
        let p = net.joint_probability(&Assignment::new(vec![1])).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn joint_probability_rejects_incomplete_assignment() {
        let net = chain3();
        assert!(matches!(
            net.joint_probability(&Assignment::new(vec![0, 1])),
            Err(NetworkError::IncompleteAssignment { .. })
        ));
    }

    #[test]
    fn joint_sums_to_one_over_all_assignments() {
        let net = chain3();
        let mut total = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    total += net
                        .joint_probability(&Assignment::new(vec![a, b, c]))
                        .unwrap();
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deepest_evidence_depth_cases() {
        let net = chain3();
        let c = Evidence::from_labels(&net, &[("C", "1")]).unwrap();
        assert_eq!(net.deepest_evidence_depth(&c).unwrap(), 2);
        let a = Evidence::from_labels(&net, &[("A", "1")]).unwrap();
        assert_eq!(net.deepest_evidence_depth(&a).unwrap(), 0);
        assert_eq!(net.deepest_evidence_depth(&Evidence::empty()).unwrap(), 0);
    }

    #[test]
    fn evidence_rejects_unknown_node_and_state() {
        let net = chain3();
        assert!(matches!(
            Evidence::from_labels(&net, &[("Z", "1")]),
            Err(NetworkError::UnknownNode { .. })
        ));
        assert!(matches!(
            Evidence::from_labels(&net, &[("C", "true")]),
            Err(NetworkError::UnknownState { .. })
        ));
    }

    #[test]
    fn polytree_and_diameter() {
        let net = chain3();
        assert!(net.is_polytree());
        assert_eq!(net.undirected_diameter(), 2);
        let d = diamond();
        assert!(!d.is_polytree());
        assert_eq!(d.undirected_diameter(), 2);
    }
}
