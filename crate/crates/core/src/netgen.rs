//! Seeded random networks and evidence for property tests and benchmark
//! experiments.
//!
//! CPT rows are drawn from a symmetric Dirichlet (concentration 1); an
//! `extreme_fraction` of rows gets one entry pushed down to `extreme_floor`
//! and the rest rescaled, which emulates the unlikely-evidence regime that
//! makes importance sampling interesting. Generation is a pure function of
//! the spec (seed included): the same spec serializes to identical bytes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{enumerate_posteriors, OracleError};
use crate::net::{Evidence, Network, NetworkBuilder, NetworkError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Polytree,
    Dag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenSpec {
    pub nodes: usize,
    #[serde(default = "two")]
    pub max_parents: usize,
    /// Inclusive state-count range per node.
    #[serde(default = "binary")]
    pub states: (usize, usize),
    #[serde(default = "dag")]
    pub topology: Topology,
    /// Forces a directed chain through this many edges, guaranteeing depth.
    #[serde(default)]
    pub depth_target: Option<usize>,
    /// Fraction of CPT rows given one near-floor entry.
    #[serde(default)]
    pub extreme_fraction: f64,
    #[serde(default = "default_floor")]
    pub extreme_floor: f64,
    #[serde(default)]
    pub seed: u64,
}

fn two() -> usize {
    2
}
fn binary() -> (usize, usize) {
    (2, 2)
}
fn dag() -> Topology {
    Topology::Dag
}
fn default_floor() -> f64 {
    1e-4
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("unsatisfiable generator spec: {0}")]
    Unsatisfiable(String),
    #[error("gave up after {attempts} attempts to generate positive-probability evidence")]
    RetryBudgetExhausted { attempts: u32 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

const EVIDENCE_RETRY_BUDGET: u32 = 100;

fn validate_spec(spec: &GenSpec) -> Result<(), GenError> {
    if spec.nodes == 0 {
        return Err(GenError::InvalidSpec("node count must be at least 1".into()));
    }
    let (lo, hi) = spec.states;
    if lo < 1 || lo > hi {
        return Err(GenError::InvalidSpec(format!(
            "state range [{lo}, {hi}] is empty or starts below 1"
        )));
    }
    if !(0.0..=1.0).contains(&spec.extreme_fraction) {
        return Err(GenError::InvalidSpec(
            "extreme fraction must lie in [0, 1]".into(),
        ));
    }
    if !(0.0..0.5).contains(&spec.extreme_floor) {
        return Err(GenError::InvalidSpec(
            "extreme floor must lie in [0, 0.5)".into(),
        ));
    }
    if spec.topology == Topology::Polytree && spec.nodes > 1 && spec.max_parents == 0 {
        return Err(GenError::Unsatisfiable(
            "a connected polytree on more than one node needs max_parents >= 1".into(),
        ));
    }
    Ok(())
}

/// Deterministically generate a valid network from the spec.
pub fn generate_network(spec: &GenSpec) -> Result<Network, GenError> {
    validate_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.nodes;
    let (lo, hi) = spec.states;

    let cards: Vec<usize> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();

    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    let chained = spec
        .depth_target
        .map(|t| t.min(n.saturating_sub(1)))
        .unwrap_or(0);
    for i in 1..=chained {
        parents[i].push(i - 1);
    }
    match spec.topology {
        Topology::Polytree => {
            for i in (chained + 1).max(1)..n {
                let j = rng.random_range(0..i);
                // Random orientation, respecting the parent cap on the head.
                let toward_old = rng.random::<bool>();
                if toward_old && parents[j].len() < spec.max_parents {
                    parents[j].push(i);
                } else {
                    parents[i].push(j);
                }
            }
        }
        Topology::Dag => {
            for i in (chained + 1).max(1)..n {
                let cap = spec.max_parents.min(i);
                let count = rng.random_range(0..=cap);
                let mut candidates: Vec<usize> = (0..i).collect();
                for pick in 0..count {
                    let swap = rng.random_range(pick..candidates.len());
                    candidates.swap(pick, swap);
                }
                parents[i].extend_from_slice(&candidates[..count]);
            }
        }
    }
    for list in parents.iter_mut() {
        list.sort_unstable();
    }

    let mut builder = NetworkBuilder::new(format!("gen-{}", spec.seed));
    for i in 0..n {
        let row_count: usize = parents[i].iter().map(|&p| cards[p]).product();
        let mut rows = Vec::with_capacity(row_count);
        for _ in 0..row_count {
            rows.push(random_row(&mut rng, cards[i], spec));
        }
        let id = format!("n{i}");
        let states: Vec<String> = (0..cards[i]).map(|s| format!("s{s}")).collect();
        let parent_ids: Vec<String> = parents[i].iter().map(|&p| format!("n{p}")).collect();
        builder = builder.node(
            id,
            &states.iter().map(String::as_str).collect::<Vec<_>>(),
            &parent_ids.iter().map(String::as_str).collect::<Vec<_>>(),
            rows,
        );
    }
    let network = builder.build()?;
    debug_assert!(network.validate().is_empty());
    Ok(network)
}

fn random_row(rng: &mut ChaCha8Rng, states: usize, spec: &GenSpec) -> Vec<f64> {
    // Symmetric Dirichlet(1) via normalized unit exponentials.
    let mut row: Vec<f64> = (0..states)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = row.iter().sum();
    for v in row.iter_mut() {
        *v /= total;
    }
    if states >= 2 && rng.random::<f64>() < spec.extreme_fraction {
        let idx = rng.random_range(0..states);
        let rest: f64 = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != idx)
            .map(|(_, &v)| v)
            .sum();
        let scale = (1.0 - spec.extreme_floor) / rest;
        for (j, v) in row.iter_mut().enumerate() {
            *v = if j == idx {
                spec.extreme_floor
            } else {
                *v * scale
            };
        }
    }
    let total: f64 = row.iter().sum();
    for v in row.iter_mut() {
        *v /= total;
    }
    row
}

/// Sample `count` distinct evidence nodes (optionally leaves only) with
/// uniform states. With `require_positive`, candidates whose evidence has
/// zero probability under the enumeration oracle are rejected and redrawn,
/// up to a bounded retry budget.
pub fn generate_evidence(
    network: &Network,
    count: usize,
    seed: u64,
    leaves_only: bool,
    require_positive: bool,
) -> Result<Evidence, GenError> {
    let children = network.children();
    let candidates: Vec<usize> = (0..network.node_count())
        .filter(|&i| !leaves_only || children[i].is_empty())
        .collect();
    if count > candidates.len() {
        return Err(GenError::Unsatisfiable(format!(
            "requested {count} evidence nodes, only {} candidates",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..EVIDENCE_RETRY_BUDGET {
        let mut pool = candidates.clone();
        for pick in 0..count {
            let swap = rng.random_range(pick..pool.len());
            pool.swap(pick, swap);
        }
        let mut pairs: Vec<(usize, usize)> = pool[..count]
            .iter()
            .map(|&node| {
                let state = rng.random_range(0..network.node(node).state_count());
                (node, state)
            })
            .collect();
        pairs.sort_unstable();
        let evidence = Evidence::new(network, &pairs)?;
        if !require_positive {
            return Ok(evidence);
        }
        let oracle = enumerate_posteriors(network, &evidence)?;
        if oracle.is_defined() {
            return Ok(evidence);
        }
    }
    Err(GenError::RetryBudgetExhausted {
        attempts: EVIDENCE_RETRY_BUDGET,
    })
}
