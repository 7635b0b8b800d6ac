//! Exact inference oracles for desk-scale networks.
//!
//! Two independent routes to ground truth: brute-force enumeration of the
//! joint (capped by assignment count) and variable elimination in min-degree
//! order (capped by intermediate factor size). They cross-check each other;
//! everything stochastic in this crate is ultimately verified against them.
//!
//! Enumeration visits assignments in mixed-radix declaration order and
//! accumulates with compensated sums — a fixed-order reduction, so results
//! do not depend on any partitioning of the work.

use thiserror::Error;

use crate::net::{Evidence, Network, NetworkError};
use crate::numeric::CompensatedSum;

/// Default limit on the joint assignment count for enumeration.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 22;

/// Limit on the entry count of any intermediate factor during variable
/// elimination.
pub const MAX_FACTOR_ENTRIES: u128 = 1 << 24;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("joint assignment space holds {required} assignments, over the cap of {cap}")]
    CapExceeded { required: u128, cap: u128 },
    #[error("elimination would build a factor of {required} entries, over the cap of {cap}")]
    FactorTooLarge { required: u128, cap: u128 },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Exact posterior marginals for every non-evidence node plus the evidence
/// probability P(E). When P(E) = 0 the marginals are undefined and every
/// slot is `None`.
#[derive(Clone, Debug)]
pub struct MarginalSet {
    evidence_probability: f64,
    marginals: Vec<Option<Vec<f64>>>,
}

impl MarginalSet {
    pub fn new(evidence_probability: f64, marginals: Vec<Option<Vec<f64>>>) -> Self {
        Self {
            evidence_probability,
            marginals,
        }
    }

    pub fn evidence_probability(&self) -> f64 {
        self.evidence_probability
    }

    /// Marginal of a node, `None` for evidence nodes or when P(E) = 0.
    pub fn marginal(&self, node: usize) -> Option<&[f64]> {
        self.marginals.get(node).and_then(|m| m.as_deref())
    }

    pub fn marginals(&self) -> &[Option<Vec<f64>>] {
        &self.marginals
    }

    pub fn is_defined(&self) -> bool {
        self.evidence_probability > 0.0
    }
}

/// Posterior-conditioned table P(X | parents, E), one row per parent
/// configuration. Rows whose parent configuration has zero probability
/// under the evidence are undefined and stored as `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct IcptTable {
    rows: Vec<Option<Vec<f64>>>,
}

impl IcptTable {
    pub fn new(rows: Vec<Option<Vec<f64>>>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[Option<Vec<f64>>] {
        &self.rows
    }

    pub fn row(&self, index: usize) -> Option<&[f64]> {
        self.rows.get(index).and_then(|r| r.as_deref())
    }
}

fn check_cap(network: &Network, cap: u128) -> Result<(), OracleError> {
    let required = network.joint_assignment_count();
    if required > cap {
        return Err(OracleError::CapExceeded { required, cap });
    }
    Ok(())
}

/// Visit every complete assignment consistent with the evidence, in
/// mixed-radix declaration order over the free nodes, passing the assignment
/// and its joint probability.
fn enumerate_consistent(
    network: &Network,
    evidence: &Evidence,
    cap: u128,
    mut visit: impl FnMut(&[usize], f64),
) -> Result<(), OracleError> {
    check_cap(network, cap)?;
    let n = network.node_count();
    let free: Vec<usize> = (0..n).filter(|&i| !evidence.contains(i)).collect();
    let mut values = vec![0usize; n];
    for (node, state) in evidence.iter() {
        values[node] = state;
    }
    loop {
        let mut joint = 1.0;
        for i in 0..n {
            let row = network.cpt_row_index(i, |p| values[p]);
            let entry = network
                .node(i)
                .cpt()
                .row(row)
                .and_then(|r| r.get(values[i]));
            match entry {
                Some(&p) => joint *= p,
                None => {
                    return Err(NetworkError::MalformedCpt {
                        node: network.node(i).id().to_string(),
                    }
                    .into())
                }
            }
        }
        visit(&values, joint);

        // Mixed-radix increment over free nodes, last declared node fastest.
        let mut pos = free.len();
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            let node = free[pos];
            values[node] += 1;
            if values[node] < network.node(node).state_count() {
                break;
            }
            values[node] = 0;
        }
    }
}

/// Exact posteriors by summing the joint over every assignment consistent
/// with the evidence.
pub fn enumerate_posteriors(
    network: &Network,
    evidence: &Evidence,
) -> Result<MarginalSet, OracleError> {
    enumerate_posteriors_with_cap(network, evidence, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_posteriors_with_cap(
    network: &Network,
    evidence: &Evidence,
    cap: u128,
) -> Result<MarginalSet, OracleError> {
    let n = network.node_count();
    let mut pe = CompensatedSum::new();
    let mut acc: Vec<Option<Vec<CompensatedSum>>> = (0..n)
        .map(|i| {
            if evidence.contains(i) {
                None
            } else {
                Some(vec![CompensatedSum::new(); network.node(i).state_count()])
            }
        })
        .collect();
    enumerate_consistent(network, evidence, cap, |values, joint| {
        pe.add(joint);
        for (i, slot) in acc.iter_mut().enumerate() {
            if let Some(sums) = slot {
                sums[values[i]].add(joint);
            }
        }
    })?;
    // P(empty evidence) is 1 by definition, not by quadrature.
    let pe = if evidence.is_empty() { 1.0 } else { pe.value() };
    if !(pe > 0.0) {
        return Ok(MarginalSet::new(0.0, vec![None; n]));
    }
    let marginals = acc
        .into_iter()
        .map(|slot| {
            slot.map(|sums| {
                let total: f64 = sums.iter().map(|s| s.value()).sum();
                sums.iter().map(|s| s.value() / total).collect()
            })
        })
        .collect();
    Ok(MarginalSet::new(pe, marginals))
}

/// Exact ICPT for one node by brute-force conditional sums.
pub fn exact_icpt(
    network: &Network,
    node: usize,
    evidence: &Evidence,
) -> Result<IcptTable, OracleError> {
    Ok(exact_icpts_with_cap(network, evidence, DEFAULT_ENUMERATION_CAP)?.swap_remove(node))
}

/// Exact ICPTs for every node in a single enumeration pass.
pub fn exact_icpts(network: &Network, evidence: &Evidence) -> Result<Vec<IcptTable>, OracleError> {
    exact_icpts_with_cap(network, evidence, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_icpts_with_cap(
    network: &Network,
    evidence: &Evidence,
    cap: u128,
) -> Result<Vec<IcptTable>, OracleError> {
    let n = network.node_count();
    let mut buckets: Vec<Vec<Vec<CompensatedSum>>> = (0..n)
        .map(|i| {
            vec![
                vec![CompensatedSum::new(); network.node(i).state_count()];
                network.parent_config_count(i)
            ]
        })
        .collect();
    enumerate_consistent(network, evidence, cap, |values, joint| {
        for (i, rows) in buckets.iter_mut().enumerate() {
            let row = network.cpt_row_index(i, |p| values[p]);
            rows[row][values[i]].add(joint);
        }
    })?;
    Ok(buckets
        .into_iter()
        .map(|rows| {
            IcptTable::new(
                rows.into_iter()
                    .map(|sums| {
                        let total: f64 = sums.iter().map(|s| s.value()).sum();
                        if total > 0.0 {
                            Some(sums.iter().map(|s| s.value() / total).collect())
                        } else {
                            None
                        }
                    })
                    .collect(),
            )
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Variable elimination

/// Discrete factor over a sorted set of node indices, row-major with the
/// first variable most significant.
#[derive(Clone, Debug)]
struct Factor {
    vars: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn scalar(value: f64) -> Self {
        Factor {
            vars: Vec::new(),
            values: vec![value],
        }
    }

    fn size_of(vars: &[usize], card: &[usize]) -> u128 {
        vars.iter()
            .fold(1u128, |acc, &v| acc.saturating_mul(card[v] as u128))
    }

    fn index_of(&self, assignment: &[usize], card: &[usize]) -> usize {
        let mut idx = 0;
        for &v in &self.vars {
            idx = idx * card[v] + assignment[v];
        }
        idx
    }

    fn multiply(&self, other: &Factor, card: &[usize]) -> Result<Factor, OracleError> {
        let mut vars: Vec<usize> = self.vars.clone();
        for &v in &other.vars {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        vars.sort_unstable();
        let size = Factor::size_of(&vars, card);
        if size > MAX_FACTOR_ENTRIES {
            return Err(OracleError::FactorTooLarge {
                required: size,
                cap: MAX_FACTOR_ENTRIES,
            });
        }
        let size = size as usize;
        let mut values = vec![0.0; size];
        let mut assignment = vec![0usize; card.len()];
        for (flat, value) in values.iter_mut().enumerate() {
            let mut rest = flat;
            for &v in vars.iter().rev() {
                assignment[v] = rest % card[v];
                rest /= card[v];
            }
            *value = self.values[self.index_of(&assignment, card)]
                * other.values[other.index_of(&assignment, card)];
        }
        Ok(Factor { vars, values })
    }

    fn marginalize_out(&self, var: usize, card: &[usize]) -> Factor {
        let vars: Vec<usize> = self.vars.iter().copied().filter(|&v| v != var).collect();
        let size: usize = vars.iter().map(|&v| card[v]).product::<usize>().max(1);
        let mut values = vec![0.0; size];
        let mut assignment = vec![0usize; card.len()];
        for (flat, &value) in self.values.iter().enumerate() {
            let mut rest = flat;
            for &v in self.vars.iter().rev() {
                assignment[v] = rest % card[v];
                rest /= card[v];
            }
            let mut idx = 0;
            for &v in &vars {
                idx = idx * card[v] + assignment[v];
            }
            values[idx] += value;
        }
        Factor { vars, values }
    }
}

fn restrict(factor: &Factor, var: usize, state: usize, card: &[usize]) -> Factor {
    let vars: Vec<usize> = factor.vars.iter().copied().filter(|&v| v != var).collect();
    let size: usize = vars.iter().map(|&v| card[v]).product::<usize>().max(1);
    let mut values = vec![0.0; size];
    let mut assignment = vec![0usize; card.len()];
    assignment[var] = state;
    for (flat, value) in values.iter_mut().enumerate() {
        let mut rest = flat;
        for &v in vars.iter().rev() {
            assignment[v] = rest % card[v];
            rest /= card[v];
        }
        *value = factor.values[factor.index_of(&assignment, card)];
    }
    Factor { vars, values }
}

/// CPT factors restricted by the evidence.
fn restricted_factors(network: &Network, evidence: &Evidence, card: &[usize]) -> Vec<Factor> {
    let n = network.node_count();
    let mut factors = Vec::with_capacity(n);
    for i in 0..n {
        let node = network.node(i);
        let mut vars: Vec<usize> = node.parents().to_vec();
        vars.push(i);
        vars.sort_unstable();
        vars.dedup();
        let size: usize = vars.iter().map(|&v| card[v]).product();
        let mut values = vec![0.0; size];
        let mut assignment = vec![0usize; card.len()];
        for (flat, value) in values.iter_mut().enumerate() {
            let mut rest = flat;
            for &v in vars.iter().rev() {
                assignment[v] = rest % card[v];
                rest /= card[v];
            }
            let row = network.cpt_row_index(i, |p| assignment[p]);
            *value = node
                .cpt()
                .row(row)
                .and_then(|r| r.get(assignment[i]))
                .copied()
                .unwrap_or(0.0);
        }
        let mut factor = Factor { vars, values };
        for (var, state) in evidence.iter() {
            if factor.vars.contains(&var) {
                factor = restrict(&factor, var, state, card);
            }
        }
        factors.push(factor);
    }
    factors
}

/// Min-degree elimination order over `eliminable`, ties broken by lowest
/// node index. The interaction graph connects variables sharing a factor.
fn min_degree_order(factors: &[Factor], eliminable: &[usize], n: usize) -> Vec<usize> {
    let mut adjacency = vec![vec![false; n]; n];
    for f in factors {
        for (k, &a) in f.vars.iter().enumerate() {
            for &b in &f.vars[k + 1..] {
                adjacency[a][b] = true;
                adjacency[b][a] = true;
            }
        }
    }
    let mut remaining: Vec<usize> = eliminable.to_vec();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let &best = remaining
            .iter()
            .min_by_key(|&&v| {
                let degree = remaining
                    .iter()
                    .filter(|&&u| u != v && adjacency[v][u])
                    .count();
                (degree, v)
            })
            .expect("remaining is non-empty");
        let neighbors: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&u| u != best && adjacency[best][u])
            .collect();
        for (k, &a) in neighbors.iter().enumerate() {
            for &b in &neighbors[k + 1..] {
                adjacency[a][b] = true;
                adjacency[b][a] = true;
            }
        }
        order.push(best);
        remaining.retain(|&v| v != best);
    }
    order
}

fn eliminate(
    mut factors: Vec<Factor>,
    order: &[usize],
    card: &[usize],
) -> Result<Vec<Factor>, OracleError> {
    for &var in order {
        let (with, without): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&var));
        factors = without;
        if with.is_empty() {
            continue;
        }
        let mut product = Factor::scalar(1.0);
        for f in &with {
            product = product.multiply(f, card)?;
        }
        factors.push(product.marginalize_out(var, card));
    }
    Ok(factors)
}

fn product_of(factors: &[Factor], card: &[usize]) -> Result<Factor, OracleError> {
    let mut product = Factor::scalar(1.0);
    for f in factors {
        product = product.multiply(f, card)?;
    }
    Ok(product)
}

/// Exact posteriors via variable elimination in min-degree order. Agrees
/// with [`enumerate_posteriors`] wherever both run.
pub fn ve_posteriors(network: &Network, evidence: &Evidence) -> Result<MarginalSet, OracleError> {
    ve_posteriors_impl(network, evidence, None)
}

/// Variable elimination with a caller-supplied elimination preference; query
/// and evidence nodes are skipped as needed.
pub fn ve_posteriors_with_order(
    network: &Network,
    evidence: &Evidence,
    order: &[usize],
) -> Result<MarginalSet, OracleError> {
    ve_posteriors_impl(network, evidence, Some(order))
}

fn ve_posteriors_impl(
    network: &Network,
    evidence: &Evidence,
    preferred: Option<&[usize]>,
) -> Result<MarginalSet, OracleError> {
    let n = network.node_count();
    let card: Vec<usize> = (0..n).map(|i| network.node(i).state_count()).collect();
    let factors = restricted_factors(network, evidence, &card);
    let free: Vec<usize> = (0..n).filter(|&i| !evidence.contains(i)).collect();

    // P(E): eliminate everything that is not observed.
    let full_order: Vec<usize> = match preferred {
        Some(o) => o.iter().copied().filter(|v| free.contains(v)).collect(),
        None => min_degree_order(&factors, &free, n),
    };
    let remaining = eliminate(factors.clone(), &full_order, &card)?;
    let pe = if evidence.is_empty() {
        1.0
    } else {
        product_of(&remaining, &card)?.values[0]
    };
    if !(pe > 0.0) {
        return Ok(MarginalSet::new(0.0, vec![None; n]));
    }

    let mut marginals: Vec<Option<Vec<f64>>> = vec![None; n];
    for &query in &free {
        let order: Vec<usize> = full_order
            .iter()
            .copied()
            .filter(|&v| v != query)
            .collect();
        let remaining = eliminate(factors.clone(), &order, &card)?;
        let product = product_of(&remaining, &card)?;
        debug_assert_eq!(product.vars, vec![query]);
        let total: f64 = product.values.iter().sum();
        if total > 0.0 {
            marginals[query] = Some(product.values.iter().map(|v| v / total).collect());
        }
    }
    Ok(MarginalSet::new(pe, marginals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{chain3, diamond};
    use crate::net::NetworkBuilder;

    fn chain3_c1(net: &Network) -> Evidence {
        Evidence::from_labels(net, &[("C", "1")]).unwrap()
    }

    #[test]
    fn chain3_posteriors_match_hand_sums() {
        let net = chain3();
        let post = enumerate_posteriors(&net, &chain3_c1(&net)).unwrap();
        assert!((post.evidence_probability() - 0.368).abs() < 1e-12);
        let b = post.marginal(1).unwrap();
        assert!((b[1] - 0.216 / 0.368).abs() < 1e-12);
        let a = post.marginal(0).unwrap();
        assert!((a[1] - 0.152 / 0.368).abs() < 1e-12);
        assert!(post.marginal(2).is_none(), "evidence node excluded");
    }

    #[test]
    fn empty_evidence_gives_priors() {
        let net = chain3();
        let post = enumerate_posteriors(&net, &Evidence::empty()).unwrap();
        assert_eq!(post.evidence_probability(), 1.0);
        let b = post.marginal(1).unwrap();
        assert!((b[1] - 0.24).abs() < 1e-12);
    }

    #[test]
    fn impossible_evidence_is_flagged() {
        // P(C=1|B) identically zero makes C=1 impossible.
        let net = NetworkBuilder::new("dead-end")
            .node("A", &["0", "1"], &[], vec![vec![0.8, 0.2]])
            .node(
                "B",
                &["0", "1"],
                &["A"],
                vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            )
            .node(
                "C",
                &["0", "1"],
                &["B"],
                vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            )
            .build()
            .unwrap();
        let e = Evidence::from_labels(&net, &[("C", "1")]).unwrap();
        let post = enumerate_posteriors(&net, &e).unwrap();
        assert_eq!(post.evidence_probability(), 0.0);
        assert!(!post.is_defined());
        assert!(post.marginal(0).is_none());
    }

    #[test]
    fn cap_is_enforced() {
        let net = chain3();
        match enumerate_posteriors_with_cap(&net, &Evidence::empty(), 4) {
            Err(OracleError::CapExceeded { required, cap }) => {
                assert_eq!(required, 8);
                assert_eq!(cap, 4);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn chain3_icpt_matches_hand_computation() {
        let net = chain3();
        let table = exact_icpt(&net, 1, &chain3_c1(&net)).unwrap();
        let row_a1 = table.row(1).unwrap();
        assert!((row_a1[0] - 0.04 / 0.76).abs() < 1e-12);
        assert!((row_a1[1] - 0.72 / 0.76).abs() < 1e-12);
        let row_a0 = table.row(0).unwrap();
        assert!((row_a0[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((row_a0[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn evidence_node_icpt_is_point_mass() {
        let net = chain3();
        let table = exact_icpt(&net, 2, &chain3_c1(&net)).unwrap();
        for row in table.rows() {
            let row = row.as_ref().unwrap();
            assert_eq!(row[0], 0.0);
            assert_eq!(row[1], 1.0);
        }
    }

    #[test]
    fn no_evidence_icpt_equals_cpt() {
        let net = chain3();
        let tables = exact_icpts(&net, &Evidence::empty()).unwrap();
        for (i, table) in tables.iter().enumerate() {
            for (r, row) in table.rows().iter().enumerate() {
                let row = row.as_ref().unwrap();
                let cpt_row = net.node(i).cpt().row(r).unwrap();
                for (a, b) in row.iter().zip(cpt_row) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn undefined_icpt_rows_are_none() {
        // A = 1 has probability 0, so B's row for A=1 is undefined.
        let net = NetworkBuilder::new("degenerate")
            .node("A", &["0", "1"], &[], vec![vec![1.0, 0.0]])
            .node(
                "B",
                &["0", "1"],
                &["A"],
                vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            )
            .build()
            .unwrap();
        let table = exact_icpt(&net, 1, &Evidence::empty()).unwrap();
        assert!(table.row(0).is_some());
        assert!(table.row(1).is_none());
    }

    #[test]
    fn ve_matches_enumeration_on_chain3() {
        let net = chain3();
        let e = chain3_c1(&net);
        let brute = enumerate_posteriors(&net, &e).unwrap();
        let ve = ve_posteriors(&net, &e).unwrap();
        assert!((brute.evidence_probability() - ve.evidence_probability()).abs() < 1e-12);
        for i in 0..net.node_count() {
            match (brute.marginal(i), ve.marginal(i)) {
                (Some(a), Some(b)) => {
                    for (x, y) in a.iter().zip(b) {
                        assert!((x - y).abs() < 1e-12);
                    }
                }
                (None, None) => {}
                other => panic!("marginal presence mismatch at {i}: {other:?}"),
            }
        }
    }

    #[test]
    fn ve_matches_enumeration_on_diamond() {
        let net = diamond();
        let e = Evidence::from_labels(&net, &[("D", "1")]).unwrap();
        let brute = enumerate_posteriors(&net, &e).unwrap();
        let ve = ve_posteriors(&net, &e).unwrap();
        assert!((brute.evidence_probability() - ve.evidence_probability()).abs() < 1e-12);
        for i in 0..3 {
            let a = brute.marginal(i).unwrap();
            let b = ve.marginal(i).unwrap();
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ve_empty_evidence_gives_priors() {
        let net = chain3();
        let ve = ve_posteriors(&net, &Evidence::empty()).unwrap();
        assert!((ve.evidence_probability() - 1.0).abs() < 1e-12);
        assert!((ve.marginal(1).unwrap()[1] - 0.24).abs() < 1e-12);
    }

    #[test]
    fn ve_accepts_explicit_order() {
        let net = chain3();
        let e = chain3_c1(&net);
        let ve = ve_posteriors_with_order(&net, &e, &[1, 0, 2]).unwrap();
        assert!((ve.evidence_probability() - 0.368).abs() < 1e-12);
    }
}
