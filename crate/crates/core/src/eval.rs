//! Accuracy metrics, experiment orchestration, and CSV output.
//!
//! Hellinger distance is the square-root-space L2 distance between the
//! exact and estimated posteriors, averaged over all (non-evidence node,
//! state) pairs; MSE is the mean squared probability difference over the
//! same pairs. Evidence nodes are excluded from both sums.
//!
//! An experiment is a cartesian sweep: cases (network + evidence) times
//! arms (sampler settings) times a sample-count schedule times repetitions,
//! each row scored against the enumeration oracle computed once per case.
//! Rows are emitted in that nesting order and every per-run seed is derived
//! from the experiment seed, so a config maps to one byte-exact CSV.
//! Undefined estimates (zero total weight) become rows with NA metric
//! fields rather than failures. Wall-clock columns are zero unless
//! `measureTime` is set, keeping the default output reproducible.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{enumerate_posteriors, MarginalSet, OracleError};
use crate::io::{
    document_to_network, parse_evidence, parse_network, NetworkDocument, ParseError,
};
use crate::net::{Evidence, Network};
use crate::netgen::{generate_evidence, generate_network, GenError, GenSpec};
use crate::numeric::mix_seed;
use crate::sampler::{
    finalize, prepare, sample_prepared, Algorithm, PosteriorEstimate, SamplerConfig, SamplerError,
};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("distributions are not comparable: {0}")]
    Mismatch(String),
}

/// Hellinger distance and MSE between an exact and an estimated posterior,
/// with the node counts that entered the average.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub hellinger: f64,
    pub mse: f64,
    pub nodes_compared: usize,
    pub evidence_excluded: usize,
}

fn paired<'a>(
    exact: &'a [Option<Vec<f64>>],
    estimate: &'a [Option<Vec<f64>>],
    evidence: &Evidence,
) -> Result<Vec<(&'a [f64], &'a [f64])>, MetricError> {
    if exact.len() != estimate.len() {
        return Err(MetricError::Mismatch(format!(
            "node counts differ: {} vs {}",
            exact.len(),
            estimate.len()
        )));
    }
    let mut pairs = Vec::new();
    for (i, (a, b)) in exact.iter().zip(estimate).enumerate() {
        match (a, b, evidence.contains(i)) {
            (Some(x), Some(y), false) => {
                if x.len() != y.len() {
                    return Err(MetricError::Mismatch(format!(
                        "node {i} state counts differ: {} vs {}",
                        x.len(),
                        y.len()
                    )));
                }
                pairs.push((x.as_slice(), y.as_slice()));
            }
            (None, None, true) => {}
            _ => {
                return Err(MetricError::Mismatch(format!(
                    "node {i} defined on one side only"
                )))
            }
        }
    }
    if pairs.is_empty() {
        return Err(MetricError::Mismatch(
            "no non-evidence nodes to compare".into(),
        ));
    }
    Ok(pairs)
}

/// Hellinger distance over per-node marginal vectors. Zero probabilities
/// are fine: the square root of zero needs no smoothing.
pub fn hellinger_vectors(
    exact: &[Option<Vec<f64>>],
    estimate: &[Option<Vec<f64>>],
    evidence: &Evidence,
) -> Result<f64, MetricError> {
    let pairs = paired(exact, estimate, evidence)?;
    let mut numerator = 0.0;
    let mut states = 0usize;
    for (x, y) in pairs {
        states += x.len();
        for (p, q) in x.iter().zip(y) {
            let d = p.sqrt() - q.sqrt();
            numerator += d * d;
        }
    }
    Ok((numerator / states as f64).sqrt())
}

/// Mean squared probability difference over the same pairs as
/// [`hellinger_vectors`].
pub fn mse_vectors(
    exact: &[Option<Vec<f64>>],
    estimate: &[Option<Vec<f64>>],
    evidence: &Evidence,
) -> Result<f64, MetricError> {
    let pairs = paired(exact, estimate, evidence)?;
    let mut numerator = 0.0;
    let mut states = 0usize;
    for (x, y) in pairs {
        states += x.len();
        for (p, q) in x.iter().zip(y) {
            numerator += (p - q) * (p - q);
        }
    }
    Ok(numerator / states as f64)
}

/// Hellinger distance between an oracle result and a sampler estimate.
pub fn hellinger(
    exact: &MarginalSet,
    estimate: &PosteriorEstimate,
    evidence: &Evidence,
) -> Result<f64, MetricError> {
    hellinger_vectors(exact.marginals(), estimate.marginals(), evidence)
}

/// MSE between an oracle result and a sampler estimate.
pub fn mse(
    exact: &MarginalSet,
    estimate: &PosteriorEstimate,
    evidence: &Evidence,
) -> Result<f64, MetricError> {
    mse_vectors(exact.marginals(), estimate.marginals(), evidence)
}

pub fn metric_report(
    exact: &MarginalSet,
    estimate: &PosteriorEstimate,
    evidence: &Evidence,
) -> Result<MetricReport, MetricError> {
    Ok(MetricReport {
        hellinger: hellinger(exact, estimate, evidence)?,
        mse: mse(exact, estimate, evidence)?,
        nodes_compared: exact.marginals().iter().filter(|m| m.is_some()).count(),
        evidence_excluded: evidence.len(),
    })
}

// ---------------------------------------------------------------------------
// Experiment configuration

/// Where the experiment network comes from: a `*.bn.json` path, a generator
/// spec, or an inline document (the only forms the HTTP service accepts are
/// the last two).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSource {
    Path(String),
    Gen { gen: GenSpec },
    Inline { inline: NetworkDocument },
}

pub type EvidenceDocument = std::collections::BTreeMap<String, String>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EvidenceSource {
    Path(String),
    Inline { inline: EvidenceDocument },
    Gen(EvidenceGen),
}

/// Per-case evidence generation: `k` nodes, optionally leaves only,
/// optionally retried until the oracle confirms positive probability.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvidenceGen {
    pub k: usize,
    #[serde(default)]
    pub leaves_only: bool,
    #[serde(default)]
    pub require_positive: bool,
    /// Number of independent evidence cases drawn from this spec.
    #[serde(default = "one_case")]
    pub cases: usize,
}

fn one_case() -> usize {
    1
}

/// One sampler arm of the sweep; `label` names it in the CSV (defaults to
/// the algorithm tag).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ArmConfig {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub propagation_length: Option<u32>,
    #[serde(default)]
    pub cutoff: bool,
    #[serde(default)]
    pub label: Option<String>,
}

impl ArmConfig {
    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.algorithm.as_str().to_string())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub network: NetworkSource,
    pub evidence: EvidenceSource,
    pub arms: Vec<ArmConfig>,
    /// Strictly increasing sample counts.
    pub schedule: Vec<u64>,
    #[serde(default = "one_rep")]
    pub reps: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_shard")]
    pub shards: u32,
    /// Record wall-clock times. Off by default: timed columns are the one
    /// non-deterministic output.
    #[serde(default)]
    pub measure_time: bool,
}

fn one_rep() -> u32 {
    1
}
fn one_shard() -> u32 {
    1
}

impl ExperimentConfig {
    /// True when any source needs local file access (which the HTTP service
    /// refuses; clients inline the documents instead).
    pub fn references_paths(&self) -> bool {
        matches!(self.network, NetworkSource::Path(_))
            || matches!(self.evidence, EvidenceSource::Path(_))
    }
}

/// One CSV row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub seed: u64,
    pub m: u64,
    pub d: u32,
    pub cutoff: bool,
    pub hellinger: Option<f64>,
    pub mse: Option<f64>,
    pub pe_hat: Option<f64>,
    pub ess: Option<f64>,
    pub setup_ms: u64,
    pub sample_ms: u64,
}

pub const CSV_HEADER: &str = "algorithm,seed,m,d,cutoff,hellinger,mse,pe_hat,ess,setup_ms,sample_ms";

fn csv_float(value: Option<f64>) -> String {
    match value {
        // Shortest representation that round-trips the double; at most 17
        // significant digits.
        Some(v) => format!("{v}"),
        None => "NA".to_string(),
    }
}

/// Render records as CSV with the fixed header. Byte-deterministic for a
/// fixed record list.
pub fn to_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.algorithm,
            r.seed,
            r.m,
            r.d,
            if r.cutoff { "on" } else { "off" },
            csv_float(r.hellinger),
            csv_float(r.mse),
            csv_float(r.pe_hat),
            csv_float(r.ess),
            r.setup_ms,
            r.sample_ms,
        ));
    }
    out
}

/// Per-arm summary statistics in the layout of a results table: mean,
/// standard deviation, min, median, max.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArmSummary {
    pub label: String,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

fn stats(label: &str, metric: &str, mut values: Vec<f64>) -> ArmSummary {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    };
    ArmSummary {
        label: label.to_string(),
        metric: metric.to_string(),
        count: n,
        mean,
        std_dev: variance.sqrt(),
        min: values[0],
        median,
        max: values[n - 1],
    }
}

/// Summarize records per arm label. Arms whose records are all NA are
/// omitted and reported in the warning list.
pub fn summarize(records: &[RunRecord]) -> (Vec<ArmSummary>, Vec<String>) {
    let mut labels: Vec<String> = Vec::new();
    for r in records {
        if !labels.contains(&r.algorithm) {
            labels.push(r.algorithm.clone());
        }
    }
    let mut summaries = Vec::new();
    let mut warnings = Vec::new();
    for label in &labels {
        for (metric, pick) in [
            ("hellinger", (|r: &RunRecord| r.hellinger) as fn(&RunRecord) -> Option<f64>),
            ("mse", |r: &RunRecord| r.mse),
        ] {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| &r.algorithm == label)
                .filter_map(pick)
                .collect();
            if values.is_empty() {
                warnings.push(format!("arm {label:?}: no defined {metric} values"));
            } else {
                summaries.push(stats(label, metric, values));
            }
        }
    }
    (summaries, warnings)
}

// ---------------------------------------------------------------------------
// Experiment driver

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Invalid(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

fn validate_experiment(config: &ExperimentConfig) -> Result<(), ExperimentError> {
    if config.arms.is_empty() {
        return Err(ExperimentError::Invalid("no arms configured".into()));
    }
    if config.schedule.is_empty() {
        return Err(ExperimentError::Invalid("empty sample schedule".into()));
    }
    if !config.schedule.windows(2).all(|w| w[0] < w[1]) {
        return Err(ExperimentError::Invalid(
            "sample schedule must be strictly increasing".into(),
        ));
    }
    if config.schedule[0] == 0 {
        return Err(ExperimentError::Invalid(
            "sample counts must be at least 1".into(),
        ));
    }
    if config.reps == 0 {
        return Err(ExperimentError::Invalid(
            "repetitions must be at least 1".into(),
        ));
    }
    Ok(())
}

fn load_text(path: &str) -> Result<String, ExperimentError> {
    std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_string(),
        source,
    })
}

/// Resolve the network source (reads files for the path variant).
pub fn resolve_network(source: &NetworkSource) -> Result<Network, ExperimentError> {
    match source {
        NetworkSource::Path(path) => Ok(parse_network(&load_text(path)?)?),
        NetworkSource::Gen { gen } => Ok(generate_network(gen)?),
        NetworkSource::Inline { inline } => {
            let network = document_to_network(inline)?;
            let report = network.validate();
            if !report.is_empty() {
                return Err(ParseError::Invalid {
                    violations: report.violations,
                }
                .into());
            }
            Ok(network)
        }
    }
}

fn resolve_evidence_cases(
    source: &EvidenceSource,
    network: &Network,
    seed: u64,
) -> Result<Vec<Evidence>, ExperimentError> {
    match source {
        EvidenceSource::Path(path) => Ok(vec![parse_evidence(&load_text(path)?, network)?]),
        EvidenceSource::Inline { inline } => {
            let pairs: Vec<(&str, &str)> = inline
                .iter()
                .map(|(k, v)| (k.as_str(), v.as_str()))
                .collect();
            Ok(vec![Evidence::from_labels(network, &pairs)
                .map_err(GenError::Network)?])
        }
        EvidenceSource::Gen(gen) => {
            let mut cases = Vec::with_capacity(gen.cases);
            for case in 0..gen.cases {
                let case_seed = mix_seed(mix_seed(seed, 0xE), case as u64);
                cases.push(generate_evidence(
                    network,
                    gen.k,
                    case_seed,
                    gen.leaves_only,
                    gen.require_positive,
                )?);
            }
            Ok(cases)
        }
    }
}

/// Run the full sweep. The oracle is computed once per case; each
/// (case, arm, m, rep) run gets a seed derived from the experiment seed and
/// its coordinates, and rows are emitted in exactly that nesting order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>, ExperimentError> {
    validate_experiment(config)?;
    let network = resolve_network(&config.network)?;
    let report = network.validate();
    if !report.is_empty() {
        return Err(ParseError::Invalid {
            violations: report.violations,
        }
        .into());
    }
    let cases = resolve_evidence_cases(&config.evidence, &network, config.seed)?;

    let mut records = Vec::new();
    for (case_idx, evidence) in cases.iter().enumerate() {
        let oracle = enumerate_posteriors(&network, evidence)?;
        for (arm_idx, arm) in config.arms.iter().enumerate() {
            for (m_idx, &m) in config.schedule.iter().enumerate() {
                for rep in 0..config.reps {
                    let mut seed = mix_seed(config.seed, case_idx as u64);
                    seed = mix_seed(seed, arm_idx as u64);
                    seed = mix_seed(seed, m_idx as u64);
                    seed = mix_seed(seed, rep as u64);
                    let sampler_config = SamplerConfig {
                        algorithm: arm.algorithm,
                        samples: m,
                        propagation_length: arm.propagation_length,
                        cutoff: arm.cutoff,
                        seed,
                        shards: config.shards,
                    };
                    records.push(run_one(
                        &network,
                        evidence,
                        &oracle,
                        arm,
                        &sampler_config,
                        config.measure_time,
                    )?);
                }
            }
        }
    }
    Ok(records)
}

fn run_one(
    network: &Network,
    evidence: &Evidence,
    oracle: &MarginalSet,
    arm: &ArmConfig,
    config: &SamplerConfig,
    measure_time: bool,
) -> Result<RunRecord, ExperimentError> {
    let setup_start = Instant::now();
    let prepared = prepare(network, evidence, config)?;
    let setup_ms = if measure_time {
        setup_start.elapsed().as_millis() as u64
    } else {
        0
    };

    let sample_start = Instant::now();
    let tables = sample_prepared(network, evidence, config, &prepared);
    let sample_ms = if measure_time {
        sample_start.elapsed().as_millis() as u64
    } else {
        0
    };

    let mut record = RunRecord {
        algorithm: arm.label(),
        seed: config.seed,
        m: config.samples,
        d: prepared.propagation_length(),
        cutoff: config.cutoff,
        hellinger: None,
        mse: None,
        pe_hat: None,
        ess: None,
        setup_ms,
        sample_ms,
    };
    // Undefined estimates (zero total weight, impossible evidence) stay as
    // NA rows instead of aborting the sweep.
    if let Ok(estimate) = finalize(config, &prepared, &tables) {
        record.pe_hat = Some(estimate.evidence_probability());
        record.ess = Some(estimate.effective_sample_size());
        if oracle.is_defined() {
            record.hellinger = Some(hellinger(oracle, &estimate, evidence)?);
            record.mse = Some(mse(oracle, &estimate, evidence)?);
        }
    }
    Ok(record)
}

/// Convenience wrapper: run and render.
pub fn run_experiment_to_csv(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    Ok(to_csv(&run_experiment(config)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::chain3;
    use crate::io::network_to_document;

    fn some(v: Vec<f64>) -> Option<Vec<f64>> {
        Some(v)
    }

    #[test]
    fn hellinger_identity_and_max() {
        let e = Evidence::empty();
        let a = vec![some(vec![0.3, 0.7])];
        assert_eq!(hellinger_vectors(&a, &a, &e).unwrap(), 0.0);
        let x = vec![some(vec![1.0, 0.0])];
        let y = vec![some(vec![0.0, 1.0])];
        assert!((hellinger_vectors(&x, &y, &e).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hellinger_hand_value() {
        let e = Evidence::empty();
        let x = vec![some(vec![0.64, 0.36])];
        let y = vec![some(vec![0.81, 0.19])];
        let h = hellinger_vectors(&x, &y, &e).unwrap();
        // Direct evaluation of the definition on a calculator.
        assert!((h - 0.13588989435406734).abs() < 1e-9);
    }

    #[test]
    fn hellinger_is_symmetric_and_handles_zeros() {
        let e = Evidence::empty();
        let x = vec![some(vec![0.0, 0.5, 0.5]), some(vec![1.0, 0.0])];
        let y = vec![some(vec![0.2, 0.8, 0.0]), some(vec![0.9, 0.1])];
        let xy = hellinger_vectors(&x, &y, &e).unwrap();
        let yx = hellinger_vectors(&y, &x, &e).unwrap();
        assert_eq!(xy, yx);
        assert!(xy > 0.0 && xy <= 1.0);
    }

    #[test]
    fn mse_hand_values() {
        let e = Evidence::empty();
        let x = vec![some(vec![1.0, 0.0])];
        let y = vec![some(vec![0.0, 1.0])];
        assert_eq!(mse_vectors(&x, &y, &e).unwrap(), 1.0);
        let x = vec![some(vec![0.5, 0.5])];
        let y = vec![some(vec![0.6, 0.4])];
        assert!((mse_vectors(&x, &y, &e).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn metric_mismatch_errors() {
        let e = Evidence::empty();
        let x = vec![some(vec![0.5, 0.5])];
        let y = vec![some(vec![0.5, 0.3, 0.2])];
        assert!(hellinger_vectors(&x, &y, &e).is_err());
        let z = vec![None];
        assert!(hellinger_vectors(&x, &z, &e).is_err());
    }

    #[test]
    fn summary_statistics() {
        let row = |label: &str, h: Option<f64>| RunRecord {
            algorithm: label.to_string(),
            seed: 0,
            m: 100,
            d: 0,
            cutoff: false,
            hellinger: h,
            mse: h,
            pe_hat: None,
            ess: None,
            setup_ms: 0,
            sample_ms: 0,
        };
        let records = vec![
            row("a", Some(0.1)),
            row("a", Some(0.3)),
            row("a", Some(0.2)),
            row("b", Some(0.5)),
            row("c", None),
        ];
        let (summaries, warnings) = summarize(&records);
        let a = summaries
            .iter()
            .find(|s| s.label == "a" && s.metric == "hellinger")
            .unwrap();
        assert!((a.mean - 0.2).abs() < 1e-15);
        assert!((a.median - 0.2).abs() < 1e-15);
        assert_eq!(a.min, 0.1);
        assert_eq!(a.max, 0.3);
        let b = summaries
            .iter()
            .find(|s| s.label == "b" && s.metric == "hellinger")
            .unwrap();
        assert_eq!(b.std_dev, 0.0);
        assert_eq!(b.mean, b.median);
        assert_eq!(warnings.len(), 2, "arm c has no defined metrics");
    }

    fn chain3_config(arms: Vec<ArmConfig>, schedule: Vec<u64>, reps: u32) -> ExperimentConfig {
        let net = chain3();
        let mut ev = EvidenceDocument::new();
        ev.insert("C".into(), "1".into());
        ExperimentConfig {
            network: NetworkSource::Inline {
                inline: network_to_document(&net),
            },
            evidence: EvidenceSource::Inline { inline: ev },
            arms,
            schedule,
            reps,
            seed: 99,
            shards: 1,
            measure_time: false,
        }
    }

    fn arm(algorithm: Algorithm, d: Option<u32>, cutoff: bool, label: &str) -> ArmConfig {
        ArmConfig {
            algorithm,
            propagation_length: d,
            cutoff,
            label: Some(label.to_string()),
        }
    }

    #[test]
    fn experiment_row_count_and_order() {
        let cfg = chain3_config(
            vec![
                arm(Algorithm::Epis, Some(2), false, "epis"),
                arm(Algorithm::Lw, None, false, "lw"),
            ],
            vec![1000, 2000],
            1,
        );
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 4);
        let labels: Vec<(&str, u64)> = records
            .iter()
            .map(|r| (r.algorithm.as_str(), r.m))
            .collect();
        assert_eq!(
            labels,
            vec![("epis", 1000), ("epis", 2000), ("lw", 1000), ("lw", 2000)]
        );
        for r in &records {
            assert!(r.hellinger.is_some());
            assert!(r.pe_hat.is_some());
        }
    }

    #[test]
    fn experiment_csv_is_byte_deterministic() {
        let cfg = chain3_config(
            vec![arm(Algorithm::Epis, Some(2), true, "epis")],
            vec![500, 1000],
            2,
        );
        let a = run_experiment_to_csv(&cfg).unwrap();
        let b = run_experiment_to_csv(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
    }

    #[test]
    fn experiment_is_shard_invariant() {
        let mut cfg = chain3_config(
            vec![
                arm(Algorithm::Epis, Some(2), true, "epis"),
                arm(Algorithm::Pls, None, false, "pls"),
            ],
            vec![3000],
            2,
        );
        let one = run_experiment_to_csv(&cfg).unwrap();
        cfg.shards = 4;
        let four = run_experiment_to_csv(&cfg).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn ablation_arms_are_labeled_rows() {
        let cfg = chain3_config(
            vec![
                arm(Algorithm::Epis, Some(0), false, "E"),
                arm(Algorithm::Epis, Some(0), true, "E+C"),
                arm(Algorithm::Epis, None, false, "E+P"),
                arm(Algorithm::Epis, None, true, "E+PC"),
            ],
            vec![2000],
            1,
        );
        let records = run_experiment(&cfg).unwrap();
        let labels: Vec<&str> = records.iter().map(|r| r.algorithm.as_str()).collect();
        assert_eq!(labels, vec!["E", "E+C", "E+P", "E+PC"]);
        // The "E" arm runs zero sweeps; the propagated arms resolve to the
        // evidence depth.
        assert_eq!(records[0].d, 0);
        assert_eq!(records[2].d, 2);
    }

    #[test]
    fn impossible_evidence_yields_na_rows() {
        use crate::net::NetworkBuilder;
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
        let mut ev = EvidenceDocument::new();
        ev.insert("B".into(), "1".into());
        let cfg = ExperimentConfig {
            network: NetworkSource::Inline {
                inline: network_to_document(&net),
            },
            evidence: EvidenceSource::Inline { inline: ev },
            arms: vec![arm(Algorithm::Lw, None, false, "lw")],
            schedule: vec![200],
            reps: 1,
            seed: 1,
            shards: 1,
            measure_time: false,
        };
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 1);
        assert!(records[0].hellinger.is_none());
        assert!(records[0].pe_hat.is_none());
        let csv = to_csv(&records);
        assert!(csv.contains("NA"));
    }

    #[test]
    fn generated_cases_multiply_rows() {
        let cfg = ExperimentConfig {
            network: NetworkSource::Gen {
                gen: GenSpec {
                    nodes: 8,
                    max_parents: 2,
                    states: (2, 2),
                    topology: crate::netgen::Topology::Dag,
                    depth_target: None,
                    extreme_fraction: 0.0,
                    extreme_floor: 1e-4,
                    seed: 5,
                },
            },
            evidence: EvidenceSource::Gen(EvidenceGen {
                k: 2,
                leaves_only: false,
                require_positive: true,
                cases: 3,
            }),
            arms: vec![arm(Algorithm::Lw, None, false, "lw")],
            schedule: vec![500],
            reps: 2,
            seed: 7,
            shards: 1,
            measure_time: false,
        };
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 3 * 2);
        // Seeds differ across coordinates.
        let seeds: std::collections::BTreeSet<u64> = records.iter().map(|r| r.seed).collect();
        assert_eq!(seeds.len(), 6);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = chain3_config(vec![arm(Algorithm::Lw, None, false, "lw")], vec![100], 1);
        let mut no_arms = base.clone();
        no_arms.arms.clear();
        assert!(matches!(
            run_experiment(&no_arms),
            Err(ExperimentError::Invalid(_))
        ));
        let mut bad_schedule = base.clone();
        bad_schedule.schedule = vec![200, 100];
        assert!(matches!(
            run_experiment(&bad_schedule),
            Err(ExperimentError::Invalid(_))
        ));
        let mut no_reps = base;
        no_reps.reps = 0;
        assert!(matches!(
            run_experiment(&no_reps),
            Err(ExperimentError::Invalid(_))
        ));
    }

    #[test]
    fn hellinger_median_improves_with_sample_count() {
        let net = chain3();
        let e = Evidence::from_labels(&net, &[("C", "1")]).unwrap();
        let oracle = enumerate_posteriors(&net, &e).unwrap();
        let mut medians = Vec::new();
        for &m in &[1000u64, 10_000, 100_000] {
            let mut values = Vec::new();
            for seed in 0..20u64 {
                let cfg = SamplerConfig {
                    algorithm: Algorithm::Epis,
                    samples: m,
                    propagation_length: Some(0),
                    cutoff: false,
                    seed,
                    shards: 1,
                };
                let est = crate::sampler::run(&net, &e, &cfg).unwrap();
                values.push(hellinger(&oracle, &est, &e).unwrap());
            }
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push((values[9] + values[10]) / 2.0);
        }
        assert!(
            medians[0] > medians[1] && medians[1] > medians[2],
            "medians {medians:?}"
        );
    }
}
