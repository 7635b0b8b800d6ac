//! Loopy belief propagation with a synchronous (Jacobi) schedule.
//!
//! Pearl's polytree message passing applied unchanged to arbitrary DAGs: a
//! fixed number of sweeps recomputes every outgoing message from the previous
//! iteration's incoming messages. Exact on polytrees once the sweep count
//! reaches the network diameter; on loopy networks the lambda vectors are
//! approximate, which is all the importance function needs.
//!
//! Message conventions, for node X with parent U:
//!
//! - pi message U -> X and lambda message X -> U are both vectors over U's
//!   states;
//! - lambda(X) aggregates X's self-evidence vector with the lambda messages
//!   from its children;
//! - pi(X) mixes X's CPT rows by the incoming pi messages;
//! - BEL(X) is the normalized product lambda(X) * pi(X).
//!
//! Every outgoing message is normalized to sum 1 after each sweep; the
//! normalizing constant is absorbed wherever the vectors are used, so this
//! only guards against underflow. A message that normalizes to zero
//! (conflicting deterministic evidence) is replaced by the uniform vector
//! and the sweep records a conflict. When lambda(X) is exactly constant —
//! no evidence at or below X — outgoing lambda messages are emitted as
//! exactly uniform vectors, keeping "lambda is uniform without descendant
//! evidence" an identity rather than an approximation.
//!
//! Functions here expect networks that pass validation; call sites that
//! accept untrusted models must validate first.

use crate::net::{Evidence, Network};
use crate::numeric::{all_equal, normalized, uniform};

/// All pi/lambda messages plus per-node self-evidence vectors after some
/// number of sweeps. Immutable from the outside; [`sweep`] produces a new
/// state.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageState {
    iteration: u32,
    conflict: bool,
    /// Per node: indicator vector for evidence nodes, all-ones otherwise.
    self_vectors: Vec<Vec<f64>>,
    /// `pi_in[x][j]`: message from x's j-th parent, over that parent's states.
    pi_in: Vec<Vec<Vec<f64>>>,
    /// `lambda_in[u][c]`: message from u's c-th child edge, over u's states.
    lambda_in: Vec<Vec<Vec<f64>>>,
    /// Per node u: child edges as (child index, parent slot within child).
    child_edges: Vec<Vec<(usize, usize)>>,
    /// `lambda_dest[x][j]`: index into `lambda_in[parent]` for x's j-th
    /// parent edge.
    lambda_dest: Vec<Vec<usize>>,
}

/// Normalized belief vector per node.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefSet {
    vectors: Vec<Vec<f64>>,
}

impl BeliefSet {
    pub fn vector(&self, node: usize) -> &[f64] {
        &self.vectors[node]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

impl MessageState {
    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    /// True if any message or belief degenerated to all-zeros and was
    /// replaced by the uniform vector (conflicting deterministic evidence).
    pub fn conflict(&self) -> bool {
        self.conflict
    }

    pub fn self_vector(&self, node: usize) -> &[f64] {
        &self.self_vectors[node]
    }

    /// Message from `parent` to `child`, over the parent's states.
    pub fn pi_message(&self, parent: usize, child: usize, network: &Network) -> Option<&[f64]> {
        let slot = network.node(child).parents().iter().position(|&p| p == parent)?;
        Some(&self.pi_in[child][slot])
    }

    /// Message from `child` to `parent`, over the parent's states.
    pub fn lambda_message(&self, child: usize, parent: usize) -> Option<&[f64]> {
        let c = self
            .child_edges[parent]
            .iter()
            .position(|&(x, _)| x == child)?;
        Some(&self.lambda_in[parent][c])
    }

    /// Lambda aggregate of a node: self-evidence vector times all incoming
    /// lambda messages, normalized to sum 1. Exactly uniform when nothing at
    /// or below the node is observed.
    pub fn lambda_vector(&self, node: usize) -> Vec<f64> {
        let raw = self.lambda_aggregate(node);
        if all_equal(&raw) {
            return uniform(raw.len());
        }
        normalized(&raw).unwrap_or_else(|| uniform(raw.len()))
    }

    fn lambda_aggregate(&self, node: usize) -> Vec<f64> {
        let mut agg = self.self_vectors[node].clone();
        for msg in &self.lambda_in[node] {
            for (a, m) in agg.iter_mut().zip(msg) {
                *a *= m;
            }
        }
        agg
    }

    fn pi_aggregate(&self, node: usize, network: &Network) -> Vec<f64> {
        let parents = network.node(node).parents();
        let cpt = network.node(node).cpt();
        let states = network.node(node).state_count();
        let mut agg = vec![0.0; states];
        let mut config = vec![0usize; parents.len()];
        let mut row = 0usize;
        loop {
            let mut weight = 1.0;
            for (j, &pa_state) in config.iter().enumerate() {
                weight *= self.pi_in[node][j][pa_state];
            }
            let cpt_row = cpt.row(row).expect("validated network");
            for (x, a) in agg.iter_mut().enumerate() {
                *a += weight * cpt_row[x];
            }
            row += 1;
            // Mixed-radix increment, last parent fastest: row order matches
            // the CPT's parent-configuration indexing.
            let mut pos = config.len();
            loop {
                if pos == 0 {
                    return agg;
                }
                pos -= 1;
                config[pos] += 1;
                if config[pos] < network.node(parents[pos]).state_count() {
                    break;
                }
                config[pos] = 0;
            }
        }
    }
}

/// Evidence self-vectors become indicators, every inter-node message starts
/// as the all-ones vector, iteration counter zero.
pub fn init_messages(network: &Network, evidence: &Evidence) -> MessageState {
    let n = network.node_count();
    let self_vectors = (0..n)
        .map(|i| {
            let k = network.node(i).state_count();
            match evidence.get(i) {
                Some(s) => {
                    let mut v = vec![0.0; k];
                    v[s] = 1.0;
                    v
                }
                None => vec![1.0; k],
            }
        })
        .collect();

    let mut child_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for x in 0..n {
        for (j, &p) in network.node(x).parents().iter().enumerate() {
            child_edges[p].push((x, j));
        }
    }
    let mut lambda_dest = vec![Vec::new(); n];
    for x in 0..n {
        for (j, &p) in network.node(x).parents().iter().enumerate() {
            let c = child_edges[p]
                .iter()
                .position(|&(y, jy)| y == x && jy == j)
                .expect("edge registered above");
            lambda_dest[x].push(c);
        }
    }

    let pi_in = (0..n)
        .map(|x| {
            network
                .node(x)
                .parents()
                .iter()
                .map(|&p| vec![1.0; network.node(p).state_count()])
                .collect()
        })
        .collect();
    let lambda_in = (0..n)
        .map(|u| vec![vec![1.0; network.node(u).state_count()]; child_edges[u].len()])
        .collect();

    MessageState {
        iteration: 0,
        conflict: false,
        self_vectors,
        pi_in,
        lambda_in,
        child_edges,
        lambda_dest,
    }
}

/// One synchronous sweep: every outgoing message recomputed from the
/// previous iteration's incoming messages.
pub fn sweep(state: &MessageState, network: &Network) -> MessageState {
    let n = network.node_count();
    let mut next = state.clone();
    next.iteration = state.iteration + 1;

    let store = |vec: Vec<f64>, conflict: &mut bool| -> Vec<f64> {
        match normalized(&vec) {
            Some(v) => v,
            None => {
                *conflict = true;
                uniform(vec.len())
            }
        }
    };
    let mut conflict = state.conflict;

    for x in 0..n {
        // Outgoing pi messages: pi aggregate times self-evidence times the
        // lambda messages from all other children.
        let pi_agg = state.pi_aggregate(x, network);
        for (c, &(child, slot)) in state.child_edges[x].iter().enumerate() {
            let mut msg: Vec<f64> = pi_agg
                .iter()
                .zip(&state.self_vectors[x])
                .map(|(p, s)| p * s)
                .collect();
            for (c2, lam) in state.lambda_in[x].iter().enumerate() {
                if c2 != c {
                    for (m, l) in msg.iter_mut().zip(lam) {
                        *m *= l;
                    }
                }
            }
            next.pi_in[child][slot] = store(msg, &mut conflict);
        }

        // Outgoing lambda messages: marginalize the CPT against lambda(X)
        // and the pi messages from the other parents.
        let parents = network.node(x).parents();
        if parents.is_empty() {
            continue;
        }
        let lam = state.lambda_aggregate(x);
        if lam[0] == 0.0 && all_equal(&lam) {
            conflict = true;
        }
        if all_equal(&lam) {
            // Nothing observed at or below x: the message is uniform by
            // construction, emit it exactly.
            for (j, &p) in parents.iter().enumerate() {
                next.lambda_in[p][state.lambda_dest[x][j]] =
                    uniform(network.node(p).state_count());
            }
            continue;
        }
        let cpt = network.node(x).cpt();
        for (j, &target) in parents.iter().enumerate() {
            let mut out = vec![0.0; network.node(target).state_count()];
            let mut config = vec![0usize; parents.len()];
            let mut row = 0usize;
            'rows: loop {
                let mut weight = 1.0;
                for (l, &pa_state) in config.iter().enumerate() {
                    if l != j {
                        weight *= state.pi_in[x][l][pa_state];
                    }
                }
                let cpt_row = cpt.row(row).expect("validated network");
                let mut sum = 0.0;
                for (v, l) in cpt_row.iter().zip(&lam) {
                    sum += v * l;
                }
                out[config[j]] += weight * sum;
                row += 1;
                let mut pos = config.len();
                loop {
                    if pos == 0 {
                        break 'rows;
                    }
                    pos -= 1;
                    config[pos] += 1;
                    if config[pos] < network.node(parents[pos]).state_count() {
                        break;
                    }
                    config[pos] = 0;
                }
            }
            next.lambda_in[target][state.lambda_dest[x][j]] = store(out, &mut conflict);
        }
    }
    next.conflict = conflict;
    next
}

/// Initialize and run a fixed number of sweeps.
pub fn run(network: &Network, evidence: &Evidence, sweeps: u32) -> MessageState {
    let mut state = init_messages(network, evidence);
    for _ in 0..sweeps {
        state = sweep(&state, network);
    }
    state
}

/// Normalized product of each node's lambda and pi aggregates.
pub fn beliefs(state: &MessageState, network: &Network) -> BeliefSet {
    let vectors = (0..network.node_count())
        .map(|x| {
            let lam = state.lambda_aggregate(x);
            let pi = state.pi_aggregate(x, network);
            let prod: Vec<f64> = lam.iter().zip(&pi).map(|(l, p)| l * p).collect();
            normalized(&prod).unwrap_or_else(|| uniform(prod.len()))
        })
        .collect();
    BeliefSet { vectors }
}

/// Propagation length used when the caller does not pick one: the depth of
/// the deepest evidence node, capped at 5 for deep networks.
pub fn default_propagation_length(network: &Network, evidence: &Evidence) -> u32 {
    let depth = network
        .deepest_evidence_depth(evidence)
        .unwrap_or(0)
        .min(5);
    depth as u32
}
