//! The importance function: ICPTs from pre-propagated lambda vectors, plus
//! the epsilon-cutoff heuristic that thickens its tails.
//!
//! After `d` sweeps of belief propagation, each non-evidence node's ICPT row
//! for parent configuration `pa` is `normalize(P(X|pa) * lambda(X))`. When
//! the lambda vector is exactly constant — no evidence at or below the node,
//! or zero sweeps — the CPT row is copied bit-for-bit, which is what makes
//! the `d = 0` sampler coincide sample-for-sample with likelihood weighting.
//!
//! The cutoff raises every row entry below a per-node threshold epsilon to
//! epsilon and subtracts the added mass from the row's largest original
//! entry. Thresholds follow the outcome-count schedule: 0.006 below 5
//! outcomes, 0.001 for 5 to 8, 0.0005 above.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lbp;
use crate::net::{Evidence, Network};
use crate::numeric::{all_equal, normalized, uniform, CompensatedSum};

#[derive(Debug, Error)]
pub enum CutoffError {
    #[error("epsilon {epsilon} with {len} outcomes cannot sum to 1 after the cutoff")]
    EpsilonTooLarge { epsilon: f64, len: usize },
}

/// Importance conditional probability tables for every non-evidence node.
/// Evidence nodes carry no table: they are never sampled and contribute only
/// through weights.
#[derive(Clone, Debug, PartialEq)]
pub struct IcptSet {
    tables: Vec<Option<Vec<Vec<f64>>>>,
    propagation_length: u32,
    cutoff_applied: bool,
    /// Per node: a row normalized to zero (CPT row orthogonal to lambda) and
    /// was replaced by the uniform row.
    conflict: Vec<bool>,
    /// Per node: the cutoff could not compensate from the largest entry and
    /// fell back to clamp-and-renormalize.
    cutoff_fallback: Vec<bool>,
}

impl IcptSet {
    /// Sampling table of a node; `None` for evidence nodes.
    pub fn table(&self, node: usize) -> Option<&[Vec<f64>]> {
        self.tables.get(node).and_then(|t| t.as_deref())
    }

    pub fn row(&self, node: usize, row: usize) -> Option<&[f64]> {
        self.table(node).and_then(|t| t.get(row)).map(Vec::as_slice)
    }

    pub fn propagation_length(&self) -> u32 {
        self.propagation_length
    }

    pub fn cutoff_applied(&self) -> bool {
        self.cutoff_applied
    }

    pub fn node_conflict(&self, node: usize) -> bool {
        self.conflict.get(node).copied().unwrap_or(false)
    }

    pub fn any_conflict(&self) -> bool {
        self.conflict.iter().any(|&c| c)
    }

    pub fn node_cutoff_fallback(&self, node: usize) -> bool {
        self.cutoff_fallback.get(node).copied().unwrap_or(false)
    }

    /// Debug dump in the same table layout as a CPT, flagged per node.
    pub fn to_document(&self, network: &Network) -> IcptDump {
        IcptDump {
            propagation_length: self.propagation_length,
            cutoff_applied: self.cutoff_applied,
            nodes: (0..network.node_count())
                .map(|i| IcptDumpNode {
                    id: network.node(i).id().to_string(),
                    evidence: self.tables[i].is_none(),
                    conflict: self.conflict[i],
                    cutoff_fallback: self.cutoff_fallback[i],
                    icpt: self.tables[i].clone(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IcptDump {
    pub propagation_length: u32,
    pub cutoff_applied: bool,
    pub nodes: Vec<IcptDumpNode>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IcptDumpNode {
    pub id: String,
    pub evidence: bool,
    pub conflict: bool,
    pub cutoff_fallback: bool,
    pub icpt: Option<Vec<Vec<f64>>>,
}

/// Build ICPTs from `sweeps` iterations of belief propagation.
pub fn compute_icpts(network: &Network, evidence: &Evidence, sweeps: u32) -> IcptSet {
    let state = lbp::run(network, evidence, sweeps);
    compute_icpts_from_state(network, evidence, &state)
}

/// Build ICPTs from an existing message state (lets callers time the
/// propagation and table phases separately).
pub fn compute_icpts_from_state(
    network: &Network,
    evidence: &Evidence,
    state: &lbp::MessageState,
) -> IcptSet {
    let n = network.node_count();
    let mut tables = Vec::with_capacity(n);
    let mut conflict = vec![false; n];
    for i in 0..n {
        if evidence.contains(i) {
            tables.push(None);
            continue;
        }
        let lam = state.lambda_vector(i);
        let cpt = network.node(i).cpt();
        if all_equal(&lam) {
            // No evidence below this node: its ICPT is its CPT, exactly.
            tables.push(Some(cpt.rows().to_vec()));
            continue;
        }
        let mut rows = Vec::with_capacity(cpt.row_count());
        for row in cpt.rows() {
            let weighted: Vec<f64> = row.iter().zip(&lam).map(|(p, l)| p * l).collect();
            match normalized(&weighted) {
                Some(r) => rows.push(r),
                None => {
                    conflict[i] = true;
                    rows.push(uniform(row.len()));
                }
            }
        }
        tables.push(Some(rows));
    }
    IcptSet {
        tables,
        propagation_length: state.iteration(),
        cutoff_applied: false,
        conflict,
        cutoff_fallback: vec![false; n],
    }
}

/// Cutoff threshold for a node by its outcome count.
pub fn epsilon_for(outcome_count: usize) -> f64 {
    if outcome_count < 5 {
        0.006
    } else if outcome_count <= 8 {
        0.001
    } else {
        0.0005
    }
}

/// A cutoff row plus whether the infeasible-compensation fallback fired.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffRow {
    pub values: Vec<f64>,
    pub fallback: bool,
}

/// Raise every entry below `epsilon` to `epsilon`, subtracting the added
/// mass from the largest original entry (ties: lowest state index). If the
/// largest entry cannot absorb the deficit while staying at or above
/// `epsilon`, fall back to clamping all entries and renormalizing, flagged.
pub fn cutoff_row(row: &[f64], epsilon: f64) -> Result<CutoffRow, CutoffError> {
    if epsilon * row.len() as f64 >= 1.0 {
        return Err(CutoffError::EpsilonTooLarge {
            epsilon,
            len: row.len(),
        });
    }
    let mut deficit = CompensatedSum::new();
    for &p in row {
        if p < epsilon {
            deficit.add(epsilon - p);
        }
    }
    let deficit = deficit.value();
    if deficit == 0.0 {
        return Ok(CutoffRow {
            values: row.to_vec(),
            fallback: false,
        });
    }
    let largest = row
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.partial_cmp(b).unwrap().then(j.cmp(i)))
        .map(|(i, _)| i)
        .expect("cutoff_row requires a non-empty row");
    let compensated = row[largest] - deficit;
    if compensated >= epsilon {
        let values = row
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                if i == largest {
                    compensated
                } else if p < epsilon {
                    epsilon
                } else {
                    p
                }
            })
            .collect();
        return Ok(CutoffRow {
            values,
            fallback: false,
        });
    }
    // Degenerate row: too much mass below epsilon for the maximum to absorb.
    let clamped: Vec<f64> = row.iter().map(|&p| p.max(epsilon)).collect();
    let total = CompensatedSum::new();
    let mut total = total;
    for &p in &clamped {
        total.add(p);
    }
    let total = total.value();
    Ok(CutoffRow {
        values: clamped.into_iter().map(|p| p / total).collect(),
        fallback: true,
    })
}

/// Apply [`cutoff_row`] to every row of every table, with each node's
/// epsilon from its outcome count.
pub fn apply_cutoff(set: &IcptSet) -> Result<IcptSet, CutoffError> {
    let mut out = set.clone();
    for (i, table) in out.tables.iter_mut().enumerate() {
        if let Some(rows) = table {
            for row in rows.iter_mut() {
                let cut = cutoff_row(row, epsilon_for(row.len()))?;
                if cut.fallback {
                    out.cutoff_fallback[i] = true;
                }
                *row = cut.values;
            }
        }
    }
    out.cutoff_applied = true;
    Ok(out)
}
