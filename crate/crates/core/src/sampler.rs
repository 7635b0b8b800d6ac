//! Forward stochastic sampling: importance sampling from pre-propagated
//! ICPTs, likelihood weighting, and probabilistic logic sampling.
//!
//! All three engines share one machinery. Nodes are visited in topological
//! order; the importance sampler and likelihood weighting keep evidence
//! nodes clamped, logic sampling draws them and rejects mismatches. Weights
//! are accumulated in log space per sample and exponentiated against a
//! per-block maximum before entering the score tables, so deep networks
//! with many evidence factors cannot underflow the accumulators.
//!
//! Determinism is structural. Sample `i` draws from a ChaCha8 stream derived
//! from `(seed, i)`, so the drawn values do not depend on which worker runs
//! them. Samples are grouped into fixed-size blocks; each block is reduced
//! sequentially with compensated sums, and block partials are merged in
//! block-index order. Workers only pick up whole blocks, which makes the
//! result bit-identical for every shard count.
//!
//! With zero propagation sweeps and no cutoff the ICPTs are bit-for-bit
//! copies of the CPTs, every per-node weight ratio is exactly 1, and the
//! importance sampler's draws and weights coincide with likelihood
//! weighting sample for sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::importance::{apply_cutoff, compute_icpts_from_state, CutoffError, IcptSet};
use crate::lbp;
use crate::net::{Assignment, Evidence, Network, NetworkError};
use crate::numeric::CompensatedSum;

const BLOCK_SIZE: u64 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Epis,
    Lw,
    Pls,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Epis => "epis",
            Algorithm::Lw => "lw",
            Algorithm::Pls => "pls",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epis" => Ok(Algorithm::Epis),
            "lw" => Ok(Algorithm::Lw),
            "pls" => Ok(Algorithm::Pls),
            other => Err(format!("unknown algorithm {other:?} (expected epis, lw, pls)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SamplerConfig {
    pub algorithm: Algorithm,
    /// Number of samples (m).
    pub samples: u64,
    /// Propagation length (d); `None` resolves to the depth of the deepest
    /// evidence node capped at 5.
    #[serde(default)]
    pub propagation_length: Option<u32>,
    /// Apply the epsilon-cutoff to the ICPTs.
    #[serde(default)]
    pub cutoff: bool,
    #[serde(default)]
    pub seed: u64,
    /// Worker count; any value yields bit-identical results.
    #[serde(default = "default_shards")]
    pub shards: u32,
}

fn default_shards() -> u32 {
    1
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "total importance weight is zero after {samples} samples \
         ({rejected} rejected); the evidence may have zero probability"
    )]
    ZeroTotalWeight { samples: u64, rejected: u64 },
    #[error(transparent)]
    Cutoff(#[from] CutoffError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Per-node accumulated importance scores plus weight moments. Values are
/// stored relative to a log-space `scale`: a stored value `v` represents
/// `v * exp(scale)`.
#[derive(Clone, Debug)]
pub struct ScoreTables {
    scale: f64,
    node_acc: Vec<Option<Vec<f64>>>,
    weight_acc: f64,
    weight_sq_acc: f64,
    samples: u64,
    rejected: u64,
    zero_weight: u64,
}

impl ScoreTables {
    /// Total accumulated weight in linear space.
    pub fn total_weight(&self) -> f64 {
        if self.weight_acc == 0.0 {
            0.0
        } else {
            self.scale.exp() * self.weight_acc
        }
    }

    /// Scores of one node in linear space; `None` for evidence nodes.
    pub fn node_scores(&self, node: usize) -> Option<Vec<f64>> {
        self.node_acc.get(node)?.as_ref().map(|acc| {
            acc.iter()
                .map(|&v| if v == 0.0 { 0.0 } else { v * self.scale.exp() })
                .collect()
        })
    }

    /// (Σw)² / Σw²; weight-degeneracy diagnostic.
    pub fn effective_sample_size(&self) -> f64 {
        if self.weight_sq_acc > 0.0 {
            self.weight_acc * self.weight_acc / self.weight_sq_acc
        } else {
            0.0
        }
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn zero_weight(&self) -> u64 {
        self.zero_weight
    }

    fn normalized_marginals(&self) -> Vec<Option<Vec<f64>>> {
        self.node_acc
            .iter()
            .map(|slot| {
                slot.as_ref().map(|acc| {
                    let total: f64 = acc.iter().sum();
                    acc.iter().map(|&v| v / total).collect()
                })
            })
            .collect()
    }
}

/// Estimated total weight over the sample count: the estimator of P(E).
pub fn estimate_evidence_probability(tables: &ScoreTables, samples: u64) -> f64 {
    tables.total_weight() / samples as f64
}

/// Normalized score tables plus diagnostics.
#[derive(Clone, Debug)]
pub struct PosteriorEstimate {
    marginals: Vec<Option<Vec<f64>>>,
    evidence_probability: f64,
    effective_sample_size: f64,
    propagation_length: u32,
    cutoff: bool,
    samples: u64,
    rejected: u64,
    conflict: bool,
}

impl PosteriorEstimate {
    pub fn marginal(&self, node: usize) -> Option<&[f64]> {
        self.marginals.get(node).and_then(|m| m.as_deref())
    }

    pub fn marginals(&self) -> &[Option<Vec<f64>>] {
        &self.marginals
    }

    /// Total weight / m.
    pub fn evidence_probability(&self) -> f64 {
        self.evidence_probability
    }

    pub fn effective_sample_size(&self) -> f64 {
        self.effective_sample_size
    }

    /// Propagation length actually used (after defaulting).
    pub fn propagation_length(&self) -> u32 {
        self.propagation_length
    }

    pub fn cutoff(&self) -> bool {
        self.cutoff
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// Rejected sample count; only logic sampling rejects.
    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    /// True when belief propagation or ICPT construction hit a degenerate
    /// (all-zero) vector and substituted the uniform one.
    pub fn conflict(&self) -> bool {
        self.conflict
    }
}

enum SampleTables {
    Importance(IcptSet),
    Prior,
    PriorRejection,
}

/// Setup-phase output: everything the sampling loop needs, so callers can
/// time setup and sampling separately.
pub struct Prepared {
    order: Vec<usize>,
    tables: SampleTables,
    propagation_length: u32,
    conflict: bool,
}

impl Prepared {
    pub fn propagation_length(&self) -> u32 {
        self.propagation_length
    }

    /// The ICPTs, when the prepared algorithm is the importance sampler.
    pub fn icpts(&self) -> Option<&IcptSet> {
        match &self.tables {
            SampleTables::Importance(set) => Some(set),
            _ => None,
        }
    }
}

fn validate_config(config: &SamplerConfig) -> Result<(), SamplerError> {
    if config.samples == 0 {
        return Err(SamplerError::InvalidConfig(
            "sample count must be at least 1".into(),
        ));
    }
    if config.shards == 0 {
        return Err(SamplerError::InvalidConfig(
            "shard count must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Resolve the propagation length and, for the importance sampler, run
/// belief propagation and build the (optionally cutoff) ICPTs.
pub fn prepare(
    network: &Network,
    evidence: &Evidence,
    config: &SamplerConfig,
) -> Result<Prepared, SamplerError> {
    validate_config(config)?;
    let order = network.topological_order()?;
    let resolved = config
        .propagation_length
        .unwrap_or_else(|| lbp::default_propagation_length(network, evidence));
    let (tables, conflict) = match config.algorithm {
        Algorithm::Epis => {
            let state = lbp::run(network, evidence, resolved);
            let mut set = compute_icpts_from_state(network, evidence, &state);
            if config.cutoff {
                set = apply_cutoff(&set)?;
            }
            let conflict = state.conflict() || set.any_conflict();
            (SampleTables::Importance(set), conflict)
        }
        Algorithm::Lw => (SampleTables::Prior, false),
        Algorithm::Pls => (SampleTables::PriorRejection, false),
    };
    Ok(Prepared {
        order,
        tables,
        propagation_length: resolved,
        conflict,
    })
}

/// Draw the sample blocks and merge them into score tables.
pub fn sample_prepared(
    network: &Network,
    evidence: &Evidence,
    config: &SamplerConfig,
    prepared: &Prepared,
) -> ScoreTables {
    let m = config.samples;
    let blocks = (m + BLOCK_SIZE - 1) / BLOCK_SIZE;
    let mut partials: Vec<Option<BlockPartial>> = (0..blocks).map(|_| None).collect();

    let shard_count = config.shards.max(1) as u64;
    if shard_count == 1 || blocks == 1 {
        for b in 0..blocks {
            partials[b as usize] = Some(process_block(network, evidence, config, prepared, b));
        }
    } else {
        let slots: Vec<(u64, &mut Option<BlockPartial>)> =
            (0..).zip(partials.iter_mut()).collect();
        std::thread::scope(|scope| {
            let mut remaining = slots;
            for shard in 0..shard_count {
                let own: Vec<(u64, &mut Option<BlockPartial>)> = {
                    let (mine, rest): (Vec<_>, Vec<_>) = remaining
                        .into_iter()
                        .partition(|(b, _)| b % shard_count == shard);
                    remaining = rest;
                    mine
                };
                scope.spawn(move || {
                    for (b, slot) in own {
                        *slot = Some(process_block(network, evidence, config, prepared, b));
                    }
                });
            }
        });
    }

    merge_blocks(network, evidence, partials)
}

/// Full pipeline: prepare then sample, dispatching on the configured
/// algorithm.
pub fn run(
    network: &Network,
    evidence: &Evidence,
    config: &SamplerConfig,
) -> Result<PosteriorEstimate, SamplerError> {
    let prepared = prepare(network, evidence, config)?;
    let tables = sample_prepared(network, evidence, config, &prepared);
    finalize(config, &prepared, &tables)
}

/// Importance sampling with the pre-propagated importance function.
pub fn run_epis(
    network: &Network,
    evidence: &Evidence,
    config: &SamplerConfig,
) -> Result<PosteriorEstimate, SamplerError> {
    expect_algorithm(config, Algorithm::Epis)?;
    run(network, evidence, config)
}

/// Likelihood weighting: forward sampling from the CPTs with evidence
/// clamped, weighted by the evidence likelihood.
pub fn run_lw(
    network: &Network,
    evidence: &Evidence,
    config: &SamplerConfig,
) -> Result<PosteriorEstimate, SamplerError> {
    expect_algorithm(config, Algorithm::Lw)?;
    run(network, evidence, config)
}

/// Probabilistic logic sampling: forward sampling of every node with
/// rejection of evidence-inconsistent samples.
pub fn run_pls(
    network: &Network,
    evidence: &Evidence,
    config: &SamplerConfig,
) -> Result<PosteriorEstimate, SamplerError> {
    expect_algorithm(config, Algorithm::Pls)?;
    run(network, evidence, config)
}

fn expect_algorithm(config: &SamplerConfig, expected: Algorithm) -> Result<(), SamplerError> {
    if config.algorithm != expected {
        return Err(SamplerError::InvalidConfig(format!(
            "configured algorithm is {:?}, expected {:?}",
            config.algorithm, expected
        )));
    }
    Ok(())
}

/// Build the final estimate; zero total weight is an error, not a silently
/// uniform answer.
pub fn finalize(
    config: &SamplerConfig,
    prepared: &Prepared,
    tables: &ScoreTables,
) -> Result<PosteriorEstimate, SamplerError> {
    if !(tables.weight_acc > 0.0) {
        return Err(SamplerError::ZeroTotalWeight {
            samples: tables.samples,
            rejected: tables.rejected,
        });
    }
    Ok(PosteriorEstimate {
        marginals: tables.normalized_marginals(),
        evidence_probability: estimate_evidence_probability(tables, config.samples),
        effective_sample_size: tables.effective_sample_size(),
        propagation_length: prepared.propagation_length,
        cutoff: config.cutoff,
        samples: tables.samples,
        rejected: tables.rejected,
        conflict: prepared.conflict,
    })
}

/// One importance-sampler draw: evidence clamped, non-evidence nodes drawn
/// from their ICPT rows in topological order. Returns the assignment and
/// its linear importance weight (joint probability over sampling
/// probability); zero when the joint hits a CPT zero.
pub fn draw_sample(
    network: &Network,
    icpts: &IcptSet,
    evidence: &Evidence,
    rng: &mut impl Rng,
) -> (Assignment, f64) {
    let order = network
        .topological_order()
        .expect("validated network");
    let outcome = simulate(
        network,
        evidence,
        &order,
        &SampleTables::Importance(icpts.clone()),
        rng,
    );
    unpack_outcome(outcome)
}

/// One likelihood-weighting draw: evidence clamped, non-evidence nodes drawn
/// from their CPT rows, weight equal to the evidence likelihood.
pub fn draw_prior_sample(
    network: &Network,
    evidence: &Evidence,
    rng: &mut impl Rng,
) -> (Assignment, f64) {
    let order = network
        .topological_order()
        .expect("validated network");
    let outcome = simulate(network, evidence, &order, &SampleTables::Prior, rng);
    unpack_outcome(outcome)
}

fn unpack_outcome(outcome: SampleOutcome) -> (Assignment, f64) {
    match outcome {
        SampleOutcome::Weighted { values, log_weight } => {
            let weight = if log_weight == f64::NEG_INFINITY {
                0.0
            } else {
                log_weight.exp()
            };
            (Assignment::new(values), weight)
        }
        SampleOutcome::Rejected => unreachable!("clamped sampling never rejects"),
    }
}

enum SampleOutcome {
    Weighted { values: Vec<usize>, log_weight: f64 },
    Rejected,
}

fn draw_categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Row sums can fall a few ulps short of 1; land on the last state that
    // has any mass.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

fn simulate(
    network: &Network,
    evidence: &Evidence,
    order: &[usize],
    tables: &SampleTables,
    rng: &mut impl Rng,
) -> SampleOutcome {
    let n = network.node_count();
    let mut values = vec![0usize; n];
    for (node, state) in evidence.iter() {
        values[node] = state;
    }
    let mut log_weight = 0.0f64;
    for &node in order {
        let row_index = network.cpt_row_index(node, |p| values[p]);
        let cpt_row = network
            .node(node)
            .cpt()
            .row(row_index)
            .expect("validated network");
        match tables {
            SampleTables::Importance(icpts) => {
                if let Some(state) = evidence.get(node) {
                    log_weight += cpt_row[state].ln();
                } else {
                    let g_row = icpts
                        .row(node, row_index)
                        .expect("ICPTs cover all non-evidence nodes");
                    let state = draw_categorical(rng, g_row);
                    values[node] = state;
                    log_weight += (cpt_row[state] / g_row[state]).ln();
                }
            }
            SampleTables::Prior => {
                if let Some(state) = evidence.get(node) {
                    log_weight += cpt_row[state].ln();
                } else {
                    values[node] = draw_categorical(rng, cpt_row);
                }
            }
            SampleTables::PriorRejection => {
                let state = draw_categorical(rng, cpt_row);
                if let Some(observed) = evidence.get(node) {
                    if state != observed {
                        return SampleOutcome::Rejected;
                    }
                }
                values[node] = state;
            }
        }
    }
    SampleOutcome::Weighted { values, log_weight }
}

/// Per-block reduction. `scale` is the block's maximum finite log-weight,
/// `NEG_INFINITY` when every sample was rejected or zero-weight.
struct BlockPartial {
    scale: f64,
    node_acc: Vec<Option<Vec<CompensatedSum>>>,
    weight: CompensatedSum,
    weight_sq: CompensatedSum,
    samples: u64,
    rejected: u64,
    zero_weight: u64,
}

fn process_block(
    network: &Network,
    evidence: &Evidence,
    config: &SamplerConfig,
    prepared: &Prepared,
    block: u64,
) -> BlockPartial {
    let start = block * BLOCK_SIZE;
    let end = (start + BLOCK_SIZE).min(config.samples);
    let base = ChaCha8Rng::seed_from_u64(config.seed);

    let mut outcomes = Vec::with_capacity((end - start) as usize);
    for i in start..end {
        let mut rng = base.clone();
        rng.set_stream(i);
        outcomes.push(simulate(
            network,
            evidence,
            &prepared.order,
            &prepared.tables,
            &mut rng,
        ));
    }

    let scale = outcomes
        .iter()
        .filter_map(|o| match o {
            SampleOutcome::Weighted { log_weight, .. } if log_weight.is_finite() => {
                Some(*log_weight)
            }
            _ => None,
        })
        .fold(f64::NEG_INFINITY, f64::max);

    let n = network.node_count();
    let mut node_acc: Vec<Option<Vec<CompensatedSum>>> = (0..n)
        .map(|i| {
            if evidence.contains(i) {
                None
            } else {
                Some(vec![CompensatedSum::new(); network.node(i).state_count()])
            }
        })
        .collect();
    let mut weight = CompensatedSum::new();
    let mut weight_sq = CompensatedSum::new();
    let mut rejected = 0u64;
    let mut zero_weight = 0u64;

    for outcome in &outcomes {
        match outcome {
            SampleOutcome::Rejected => rejected += 1,
            SampleOutcome::Weighted { values, log_weight } => {
                if *log_weight == f64::NEG_INFINITY {
                    zero_weight += 1;
                    continue;
                }
                let score = (log_weight - scale).exp();
                weight.add(score);
                weight_sq.add((2.0 * (log_weight - scale)).exp());
                for (i, slot) in node_acc.iter_mut().enumerate() {
                    if let Some(acc) = slot {
                        acc[values[i]].add(score);
                    }
                }
            }
        }
    }

    BlockPartial {
        scale,
        node_acc,
        weight,
        weight_sq,
        samples: end - start,
        rejected,
        zero_weight,
    }
}

fn rescale(from: f64, to: f64) -> f64 {
    if from == f64::NEG_INFINITY {
        0.0
    } else {
        (from - to).exp()
    }
}

/// Fold block partials in block-index order, rescaling to the running
/// maximum log-weight.
fn merge_blocks(
    network: &Network,
    evidence: &Evidence,
    partials: Vec<Option<BlockPartial>>,
) -> ScoreTables {
    let n = network.node_count();
    let mut scale = f64::NEG_INFINITY;
    let mut node_acc: Vec<Option<Vec<f64>>> = (0..n)
        .map(|i| {
            if evidence.contains(i) {
                None
            } else {
                Some(vec![0.0; network.node(i).state_count()])
            }
        })
        .collect();
    let mut weight_acc = 0.0f64;
    let mut weight_sq_acc = 0.0f64;
    let mut samples = 0u64;
    let mut rejected = 0u64;
    let mut zero_weight = 0u64;

    for partial in partials.into_iter() {
        let partial = partial.expect("all blocks processed");
        samples += partial.samples;
        rejected += partial.rejected;
        zero_weight += partial.zero_weight;
        if partial.scale == f64::NEG_INFINITY {
            continue;
        }
        let new_scale = scale.max(partial.scale);
        let keep = rescale(scale, new_scale);
        let add = rescale(partial.scale, new_scale);
        weight_acc = weight_acc * keep + partial.weight.value() * add;
        weight_sq_acc = weight_sq_acc * keep * keep + partial.weight_sq.value() * add * add;
        for (slot, partial_slot) in node_acc.iter_mut().zip(&partial.node_acc) {
            if let (Some(acc), Some(block_acc)) = (slot, partial_slot) {
                for (a, b) in acc.iter_mut().zip(block_acc) {
                    *a = *a * keep + b.value() * add;
                }
            }
        }
        scale = new_scale;
    }

    ScoreTables {
        scale,
        node_acc,
        weight_acc,
        weight_sq_acc,
        samples,
        rejected,
        zero_weight,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::enumerate_posteriors;
    use crate::fixtures::chain3;
    use crate::importance::compute_icpts;
    use crate::net::NetworkBuilder;

    fn c1(net: &Network) -> Evidence {
        Evidence::from_labels(net, &[("C", "1")]).unwrap()
    }

    fn config(algorithm: Algorithm, samples: u64, seed: u64) -> SamplerConfig {
        SamplerConfig {
            algorithm,
            samples,
            propagation_length: None,
            cutoff: false,
            seed,
            shards: 1,
        }
    }

    #[test]
    fn optimal_icpts_give_constant_weights() {
        let net = chain3();
        let e = c1(&net);
        let icpts = compute_icpts(&net, &e, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (_, w) = draw_sample(&net, &icpts, &e, &mut rng);
            assert!((w - 0.368).abs() < 1e-12, "weight {w}");
        }
    }

    #[test]
    fn prior_tables_give_likelihood_weights() {
        let net = chain3();
        let e = c1(&net);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (a, w) = draw_prior_sample(&net, &e, &mut rng);
            // Weight telescopes to P(C=1|B).
            let expected = net.node(2).cpt().row(a.value(1)).unwrap()[1];
            assert!((w - expected).abs() < 1e-15);
            assert!((w - 0.2).abs() < 1e-15 || (w - 0.9).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_joint_gives_zero_weight() {
        // Cutoff lets the sampler pick A=1 whose prior is exactly 0.
        let net = NetworkBuilder::new("spiked")
            .node("A", &["0", "1"], &[], vec![vec![1.0, 0.0]])
            .build()
            .unwrap();
        let e = Evidence::empty();
        let state = lbp::run(&net, &e, 0);
        let set = compute_icpts_from_state(&net, &e, &state);
        let set = apply_cutoff(&set).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut saw_zero = false;
        for _ in 0..2000 {
            let (a, w) = draw_sample(&net, &set, &e, &mut rng);
            if a.value(0) == 1 {
                assert_eq!(w, 0.0);
                saw_zero = true;
            }
        }
        assert!(saw_zero, "cutoff should occasionally draw the zero state");
    }

    #[test]
    fn epis_with_exact_icpts_recovers_pe_exactly() {
        let net = chain3();
        let e = c1(&net);
        let mut cfg = config(Algorithm::Epis, 4000, 7);
        cfg.propagation_length = Some(2);
        let est = run_epis(&net, &e, &cfg).unwrap();
        assert!((est.evidence_probability() - 0.368).abs() < 1e-12);
        // Zero-variance weights make the ESS the full sample count.
        assert!((est.effective_sample_size() - 4000.0).abs() < 1e-6);
        let oracle = enumerate_posteriors(&net, &e).unwrap();
        for i in 0..2 {
            for (a, b) in est.marginal(i).unwrap().iter().zip(oracle.marginal(i).unwrap()) {
                // With the optimal importance function the estimate error is
                // pure sampling noise over a constant-weight population.
                assert!((a - b).abs() < 0.05);
            }
        }
    }

    #[test]
    fn empty_evidence_estimates_pe_exactly_one() {
        let net = chain3();
        let cfg = config(Algorithm::Epis, 3000, 5);
        let est = run_epis(&net, &Evidence::empty(), &cfg).unwrap();
        assert_eq!(est.evidence_probability(), 1.0);
        assert_eq!(est.rejected(), 0);
    }

    #[test]
    fn epis_zero_sweeps_matches_lw_bit_for_bit() {
        let net = chain3();
        let e = c1(&net);
        let mut epis_cfg = config(Algorithm::Epis, 5000, 42);
        epis_cfg.propagation_length = Some(0);
        let lw_cfg = config(Algorithm::Lw, 5000, 42);
        let a = run_epis(&net, &e, &epis_cfg).unwrap();
        let b = run_lw(&net, &e, &lw_cfg).unwrap();
        assert_eq!(
            a.evidence_probability().to_bits(),
            b.evidence_probability().to_bits()
        );
        assert_eq!(
            a.effective_sample_size().to_bits(),
            b.effective_sample_size().to_bits()
        );
        for i in 0..net.node_count() {
            match (a.marginal(i), b.marginal(i)) {
                (Some(x), Some(y)) => {
                    for (p, q) in x.iter().zip(y) {
                        assert_eq!(p.to_bits(), q.to_bits());
                    }
                }
                (None, None) => {}
                other => panic!("presence mismatch: {other:?}"),
            }
        }
    }

    #[test]
    fn per_sample_streams_match_between_epis_and_lw() {
        let net = chain3();
        let e = c1(&net);
        let icpts = compute_icpts(&net, &e, 0);
        let base = ChaCha8Rng::seed_from_u64(9);
        for i in 0..100u64 {
            let mut r1 = base.clone();
            r1.set_stream(i);
            let mut r2 = base.clone();
            r2.set_stream(i);
            let (a1, w1) = draw_sample(&net, &icpts, &e, &mut r1);
            let (a2, w2) = draw_prior_sample(&net, &e, &mut r2);
            assert_eq!(a1, a2);
            assert_eq!(w1.to_bits(), w2.to_bits());
        }
    }

    #[test]
    fn lw_mean_weight_approaches_pe() {
        let net = chain3();
        let e = c1(&net);
        let cfg = config(Algorithm::Lw, 200_000, 1);
        let est = run_lw(&net, &e, &cfg).unwrap();
        // Weight variance is 0.0894; four standard errors at 200k samples.
        let se = (0.0894f64 / 200_000.0).sqrt();
        assert!((est.evidence_probability() - 0.368).abs() < 4.0 * se);
    }

    #[test]
    fn pls_acceptance_rate_estimates_pe() {
        let net = chain3();
        let e = c1(&net);
        let cfg = config(Algorithm::Pls, 100_000, 13);
        let est = run_pls(&net, &e, &cfg).unwrap();
        let accepted = est.samples() - est.rejected();
        let rate = accepted as f64 / est.samples() as f64;
        let se = (0.368f64 * 0.632 / 100_000.0).sqrt();
        assert!((rate - 0.368).abs() < 4.0 * se);
        assert!((est.evidence_probability() - rate).abs() < 1e-12);
    }

    #[test]
    fn pls_equals_lw_without_evidence() {
        let net = chain3();
        let e = Evidence::empty();
        let lw = run_lw(&net, &e, &config(Algorithm::Lw, 2000, 21)).unwrap();
        let pls = run_pls(&net, &e, &config(Algorithm::Pls, 2000, 21)).unwrap();
        assert_eq!(lw.evidence_probability(), pls.evidence_probability());
        for i in 0..net.node_count() {
            let (x, y) = (lw.marginal(i).unwrap(), pls.marginal(i).unwrap());
            for (p, q) in x.iter().zip(y) {
                assert_eq!(p.to_bits(), q.to_bits());
            }
        }
    }

    #[test]
    fn impossible_evidence_is_an_error() {
        let net = NetworkBuilder::new("dead-end")
            .node("A", &["0", "1"], &[], vec![vec![1.0, 0.0]])
            .node(
                "B",
                &["0", "1"],
                &["A"],
                vec![vec![1.0, 0.0], vec![0.5, 0.5]],
            )
            .build()
            .unwrap();
        let e = Evidence::from_labels(&net, &[("B", "1")]).unwrap();
        match run_lw(&net, &e, &config(Algorithm::Lw, 500, 2)) {
            Err(SamplerError::ZeroTotalWeight { samples, .. }) => assert_eq!(samples, 500),
            other => panic!("expected zero-weight error, got {other:?}"),
        }
        match run_pls(&net, &e, &config(Algorithm::Pls, 500, 2)) {
            Err(SamplerError::ZeroTotalWeight { rejected, .. }) => assert_eq!(rejected, 500),
            other => panic!("expected zero-weight error, got {other:?}"),
        }
        // The raw tables still answer: P(E) estimate is zero.
        let cfg = config(Algorithm::Lw, 500, 2);
        let prepared = prepare(&net, &e, &cfg).unwrap();
        let tables = sample_prepared(&net, &e, &cfg, &prepared);
        assert_eq!(estimate_evidence_probability(&tables, 500), 0.0);
    }

    #[test]
    fn shard_count_does_not_change_results() {
        let net = chain3();
        let e = c1(&net);
        for algorithm in [Algorithm::Epis, Algorithm::Lw, Algorithm::Pls] {
            let mut one = config(algorithm, 5000, 17);
            let mut four = config(algorithm, 5000, 17);
            one.shards = 1;
            four.shards = 4;
            let a = run(&net, &e, &one).unwrap();
            let b = run(&net, &e, &four).unwrap();
            assert_eq!(
                a.evidence_probability().to_bits(),
                b.evidence_probability().to_bits()
            );
            for i in 0..net.node_count() {
                match (a.marginal(i), b.marginal(i)) {
                    (Some(x), Some(y)) => {
                        for (p, q) in x.iter().zip(y) {
                            assert_eq!(p.to_bits(), q.to_bits());
                        }
                    }
                    (None, None) => {}
                    other => panic!("presence mismatch: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn score_tables_accumulators_sum_to_total_weight() {
        let net = chain3();
        let e = c1(&net);
        let cfg = config(Algorithm::Lw, 10_000, 23);
        let prepared = prepare(&net, &e, &cfg).unwrap();
        let tables = sample_prepared(&net, &e, &cfg, &prepared);
        let total = tables.total_weight();
        assert!(total > 0.0);
        for i in 0..net.node_count() {
            if let Some(scores) = tables.node_scores(i) {
                let sum: f64 = scores.iter().sum();
                assert!((sum - total).abs() / total < 1e-9);
            }
        }
        assert!((estimate_evidence_probability(&tables, cfg.samples)
            - total / cfg.samples as f64)
            .abs()
            < 1e-18);
    }

    #[test]
    fn zero_samples_is_a_usage_error() {
        let net = chain3();
        let cfg = config(Algorithm::Lw, 0, 0);
        assert!(matches!(
            run_lw(&net, &Evidence::empty(), &cfg),
            Err(SamplerError::InvalidConfig(_))
        ));
    }

    #[test]
    fn algorithm_mismatch_is_rejected() {
        let net = chain3();
        let cfg = config(Algorithm::Lw, 10, 0);
        assert!(matches!(
            run_epis(&net, &Evidence::empty(), &cfg),
            Err(SamplerError::InvalidConfig(_))
        ));
    }

    #[test]
    fn observed_collider_makes_weights_vary() {
        // With evidence on a collider, the free parents become dependent
        // (explaining away), so the factorized importance function — even
        // built from exact per-node ICPTs — is no longer the joint
        // posterior and the weights spread. The constant-weight identity
        // holds only when no observed node has several free ancestor
        // branches. The estimator stays unbiased either way.
        let net = NetworkBuilder::new("collider")
            .node("A", &["0", "1"], &[], vec![vec![0.7, 0.3]])
            .node("B", &["0", "1"], &[], vec![vec![0.4, 0.6]])
            .node(
                "C",
                &["0", "1"],
                &["A", "B"],
                vec![
                    vec![0.9, 0.1],
                    vec![0.1, 0.9],
                    vec![0.2, 0.8],
                    vec![0.8, 0.2],
                ],
            )
            .build()
            .unwrap();
        let e = Evidence::from_labels(&net, &[("C", "1")]).unwrap();
        let icpts = compute_icpts(&net, &e, 2);
        // The per-node tables themselves are exact...
        let exact = crate::exact::exact_icpts(&net, &e).unwrap();
        for node in 0..2 {
            let row = icpts.row(node, 0).unwrap();
            let oracle_row = exact[node].row(0).unwrap();
            for (a, b) in row.iter().zip(oracle_row) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // ...but the weights are not constant.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut weights: Vec<f64> = (0..200)
            .map(|_| draw_sample(&net, &icpts, &e, &mut rng).1)
            .collect();
        weights.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(
            weights[199] - weights[0] > 1e-3,
            "expected weight spread, got {} to {}",
            weights[0],
            weights[199]
        );
        // Unbiasedness is unaffected.
        let cfg = SamplerConfig {
            algorithm: Algorithm::Epis,
            samples: 200_000,
            propagation_length: Some(2),
            cutoff: false,
            seed: 3,
            shards: 1,
        };
        let est = run_epis(&net, &e, &cfg).unwrap();
        let pe = enumerate_posteriors(&net, &e).unwrap().evidence_probability();
        assert!((est.evidence_probability() - pe).abs() < 0.01);
    }

    #[test]
    fn unbiased_over_repeated_runs() {
        // Mean of P̂(E) over repeated d=0 runs stays within four standard
        // errors of the truth.
        let net = chain3();
        let e = c1(&net);
        let mut estimates = Vec::new();
        for seed in 0..50u64 {
            let mut cfg = config(Algorithm::Epis, 1000, seed);
            cfg.propagation_length = Some(0);
            estimates.push(run_epis(&net, &e, &cfg).unwrap().evidence_probability());
        }
        let mean: f64 = estimates.iter().sum::<f64>() / estimates.len() as f64;
        let var: f64 = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
            / (estimates.len() - 1) as f64;
        let se = (var / estimates.len() as f64).sqrt();
        assert!(
            (mean - 0.368).abs() < 4.0 * se,
            "mean {mean}, se {se}"
        );
    }
}
