//! Command-line front end. Every subcommand is a client of the HTTP
//! service: with `--server` it talks to a running instance, otherwise it
//! starts one in-process on a loopback port and talks to that, so the wire
//! path is exercised either way.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (invalid network,
//! impossible evidence), 3 resource cap exceeded.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use epis_client::{ApiClient, ClientError};
use epis_core::api::{
    ExactMethod, ExactRequest, ExperimentRequest, GenerateEvidence, GenerateRequest, LbpRequest,
    SampleRequest, ValidateRequest,
};
use epis_core::eval::{EvidenceDocument, EvidenceSource, ExperimentConfig, NetworkSource};
use epis_core::io::{
    document_to_network, parse_network_document, serialize_network, NetworkDocument,
};
use epis_core::sampler::{Algorithm, SamplerConfig};

#[derive(Parser)]
#[command(name = "epis", version, about = "Bayesian-network inference: sampling, exact oracles, benchmarks")]
struct Cli {
    /// URL of a running service (e.g. http://127.0.0.1:8733); without it an
    /// in-process server is started.
    #[arg(long, global = true)]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Epis,
    Lw,
    Pls,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Epis => Algorithm::Epis,
            AlgoArg::Lw => Algorithm::Lw,
            AlgoArg::Pls => Algorithm::Pls,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Enumerate,
    Ve,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl From<OnOff> for bool {
    fn from(v: OnOff) -> bool {
        matches!(v, OnOff::On)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file against the structural invariants.
    Validate { network: PathBuf },
    /// Exact posterior marginals and evidence probability.
    Exact {
        network: PathBuf,
        evidence: PathBuf,
        /// Oracle to use.
        #[arg(long, value_enum, default_value_t = MethodArg::Enumerate)]
        method: MethodArg,
    },
    /// Beliefs after a fixed number of belief-propagation sweeps.
    Lbp {
        network: PathBuf,
        evidence: PathBuf,
        /// Sweep count; defaults to the deepest-evidence-depth rule.
        #[arg(long)]
        iters: Option<u32>,
    },
    /// Estimate posteriors by stochastic sampling.
    Sample {
        network: PathBuf,
        evidence: PathBuf,
        #[arg(long, value_enum)]
        algo: AlgoArg,
        /// Number of samples.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        /// Propagation length; defaults to the deepest-evidence-depth rule.
        #[arg(long)]
        prop_len: Option<u32>,
        /// Epsilon-cutoff on the importance tables.
        #[arg(long, value_enum, default_value_t = OnOff::On)]
        cutoff: OnOff,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker count; results are identical for any value.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        shards: u32,
        /// Write the computed importance tables to this file.
        #[arg(long)]
        dump_icpt: Option<PathBuf>,
    },
    /// Generate a seeded random network (and optionally evidence).
    Gen {
        /// Generator spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Output network file.
        #[arg(long)]
        out: PathBuf,
        /// Also draw this many evidence nodes.
        #[arg(long)]
        evidence_k: Option<usize>,
        /// Output evidence file (with --evidence-k).
        #[arg(long)]
        evidence_out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        evidence_seed: u64,
        /// Restrict evidence to leaf nodes.
        #[arg(long)]
        leaves_only: bool,
        /// Redraw evidence until it has positive probability.
        #[arg(long)]
        require_positive: bool,
    },
    /// Run a benchmark sweep from a config file and write the CSV.
    Experiment {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's worker count.
        #[arg(long)]
        shards: Option<u32>,
        /// Measure wall-clock times (makes the CSV non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8733")]
        addr: String,
    },
}

fn main() {
    // Behave like a pipeline citizen: die quietly when stdout closes.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let code = runtime.block_on(run(cli));
    std::process::exit(code);
}

async fn run(cli: Cli) -> i32 {
    if let Command::Serve { addr } = &cli.command {
        return serve(addr).await;
    }
    let client = match connect(&cli.server).await {
        Ok(client) => client,
        Err(code) => return code,
    };
    match dispatch(&cli.command, &client).await {
        Ok(code) => code,
        Err(Failure::Client(e)) => {
            eprintln!("error: {e}");
            e.api_error().map(|a| a.kind.exit_code()).unwrap_or(1)
        }
        Err(Failure::Local { code, message }) => {
            eprintln!("error: {message}");
            code
        }
    }
}

async fn serve(addr: &str) -> i32 {
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(listener) => listener,
        Err(e) => {
            eprintln!("failed to bind {addr}: {e}");
            return 1;
        }
    };
    println!("listening on {}", listener.local_addr().expect("bound"));
    match epis_server::serve(listener).await {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("server error: {e}");
            1
        }
    }
}

/// Connect to `--server`, or start an in-process instance on a loopback
/// port and connect to that.
async fn connect(server: &Option<String>) -> Result<ApiClient, i32> {
    match server {
        Some(url) => {
            let client = ApiClient::new(url.clone());
            if let Err(e) = client.health().await {
                eprintln!("cannot reach service at {url}: {e}");
                return Err(1);
            }
            Ok(client)
        }
        None => {
            let listener = match tokio::net::TcpListener::bind("127.0.0.1:0").await {
                Ok(listener) => listener,
                Err(e) => {
                    eprintln!("failed to start embedded service: {e}");
                    return Err(1);
                }
            };
            let addr = listener.local_addr().expect("bound");
            tokio::spawn(async move {
                let _ = epis_server::serve(listener).await;
            });
            let client = ApiClient::new(format!("http://{addr}"));
            if let Err(e) = client.health().await {
                eprintln!("embedded service failed to start: {e}");
                return Err(1);
            }
            Ok(client)
        }
    }
}

enum Failure {
    Client(ClientError),
    Local { code: i32, message: String },
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Failure::Client(e)
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure::Local {
        code: 1,
        message: message.into(),
    }
}

fn data_error(message: impl Into<String>) -> Failure {
    Failure::Local {
        code: 2,
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

/// Structural parse only; the service reports invariant violations.
fn load_network_document(path: &Path) -> Result<NetworkDocument, Failure> {
    parse_network_document(&read_file(path)?)
        .map_err(|e| data_error(format!("{}: {e}", path.display())))
}

fn load_evidence_document(path: &Path) -> Result<EvidenceDocument, Failure> {
    serde_json::from_str(&read_file(path)?)
        .map_err(|e| data_error(format!("{}: {e}", path.display())))
}

fn print_marginals(prefix: &str, marginals: &[epis_core::api::NodeMarginal], states_of: impl Fn(&str) -> Vec<String>) {
    for m in marginals {
        let states = states_of(&m.node);
        for (i, p) in m.probabilities.iter().enumerate() {
            let state = states
                .get(i)
                .cloned()
                .unwrap_or_else(|| i.to_string());
            println!("{prefix}({}={state}|E) = {p}", m.node);
        }
    }
}

async fn dispatch(command: &Command, client: &ApiClient) -> Result<i32, Failure> {
    match command {
        Command::Validate { network } => {
            let doc = load_network_document(network)?;
            let resp = client.validate(&ValidateRequest { network: doc }).await?;
            if resp.valid {
                println!("ok: {} is a valid network", network.display());
                Ok(0)
            } else {
                for v in &resp.violations {
                    let node = v.node.as_deref().unwrap_or("-");
                    println!("violation [{}] node {}: {}", v.kind, node, v.message);
                }
                Ok(2)
            }
        }
        Command::Exact {
            network,
            evidence,
            method,
        } => {
            let doc = load_network_document(network)?;
            let states: std::collections::BTreeMap<String, Vec<String>> = doc
                .nodes
                .iter()
                .map(|n| (n.id.clone(), n.states.clone()))
                .collect();
            let resp = client
                .exact(&ExactRequest {
                    network: doc,
                    evidence: load_evidence_document(evidence)?,
                    method: match method {
                        MethodArg::Enumerate => ExactMethod::Enumerate,
                        MethodArg::Ve => ExactMethod::Ve,
                    },
                })
                .await?;
            println!("P(E) = {}", resp.evidence_probability);
            if !resp.defined {
                return Err(data_error(
                    "evidence has zero probability; posteriors are undefined",
                ));
            }
            print_marginals("P", &resp.marginals, |id| {
                states.get(id).cloned().unwrap_or_default()
            });
            Ok(0)
        }
        Command::Lbp {
            network,
            evidence,
            iters,
        } => {
            let doc = load_network_document(network)?;
            let states: std::collections::BTreeMap<String, Vec<String>> = doc
                .nodes
                .iter()
                .map(|n| (n.id.clone(), n.states.clone()))
                .collect();
            let resp = client
                .lbp(&LbpRequest {
                    network: doc,
                    evidence: load_evidence_document(evidence)?,
                    iterations: *iters,
                })
                .await?;
            println!("iterations = {}", resp.iterations);
            if resp.conflict {
                println!("warning: conflicting deterministic evidence; degenerate messages were replaced by uniform ones");
            }
            print_marginals("BEL", &resp.beliefs, |id| {
                states.get(id).cloned().unwrap_or_default()
            });
            Ok(0)
        }
        Command::Sample {
            network,
            evidence,
            algo,
            samples,
            prop_len,
            cutoff,
            seed,
            shards,
            dump_icpt,
        } => {
            let doc = load_network_document(network)?;
            let states: std::collections::BTreeMap<String, Vec<String>> = doc
                .nodes
                .iter()
                .map(|n| (n.id.clone(), n.states.clone()))
                .collect();
            let resp = client
                .sample(&SampleRequest {
                    network: doc,
                    evidence: load_evidence_document(evidence)?,
                    config: SamplerConfig {
                        algorithm: (*algo).into(),
                        samples: *samples,
                        propagation_length: *prop_len,
                        cutoff: (*cutoff).into(),
                        seed: *seed,
                        shards: *shards,
                    },
                    dump_icpts: dump_icpt.is_some(),
                })
                .await?;
            println!("algorithm = {}", resp.algorithm);
            println!("samples = {}", resp.samples);
            println!("propagation length = {}", resp.propagation_length);
            println!("cutoff = {}", if resp.cutoff { "on" } else { "off" });
            println!("P(E) estimate = {}", resp.evidence_probability);
            println!("effective sample size = {}", resp.effective_sample_size);
            println!("rejected = {}", resp.rejected);
            if resp.conflict {
                println!("warning: degenerate messages or tables were replaced by uniform ones");
            }
            print_marginals("P", &resp.marginals, |id| {
                states.get(id).cloned().unwrap_or_default()
            });
            if let (Some(path), Some(icpts)) = (dump_icpt, &resp.icpts) {
                let mut text = serde_json::to_string_pretty(icpts)
                    .expect("icpt dump serializes");
                text.push('\n');
                write_file(path, &text)?;
                println!("wrote importance tables to {}", path.display());
            }
            Ok(0)
        }
        Command::Gen {
            spec,
            out,
            evidence_k,
            evidence_out,
            evidence_seed,
            leaves_only,
            require_positive,
        } => {
            let gen_spec = serde_json::from_str(&read_file(spec)?)
                .map_err(|e| usage(format!("{}: {e}", spec.display())))?;
            let resp = client
                .generate(&GenerateRequest {
                    spec: gen_spec,
                    evidence: evidence_k.map(|k| GenerateEvidence {
                        k,
                        leaves_only: *leaves_only,
                        require_positive: *require_positive,
                        seed: *evidence_seed,
                    }),
                })
                .await?;
            // Canonical bytes: serialize the resolved network, not the raw
            // document, so equal specs give byte-equal files.
            let network = document_to_network(&resp.network)
                .map_err(|e| data_error(e.to_string()))?;
            write_file(out, &serialize_network(&network))?;
            println!("wrote network to {}", out.display());
            if let Some(evidence) = &resp.evidence {
                let path = evidence_out
                    .clone()
                    .unwrap_or_else(|| out.with_extension("ev.json"));
                let mut text =
                    serde_json::to_string_pretty(evidence).expect("evidence serializes");
                text.push('\n');
                write_file(&path, &text)?;
                println!("wrote evidence to {}", path.display());
            }
            Ok(0)
        }
        Command::Experiment {
            config,
            out,
            shards,
            timing,
        } => {
            let text = read_file(config)?;
            let mut experiment: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{}: {e}", config.display())))?;
            inline_sources(&mut experiment, config.parent().unwrap_or(Path::new(".")))?;
            if let Some(shards) = shards {
                experiment.shards = *shards;
            }
            if *timing {
                experiment.measure_time = true;
            }
            let resp = client
                .experiment(&ExperimentRequest { config: experiment })
                .await?;
            write_file(out, &resp.csv)?;
            println!("wrote {} records to {}", resp.records.len(), out.display());
            for s in &resp.summaries {
                println!(
                    "arm {} {}: mean {} sd {} min {} median {} max {} (n={})",
                    s.label, s.metric, s.mean, s.std_dev, s.min, s.median, s.max, s.count
                );
            }
            for w in &resp.warnings {
                eprintln!("warning: {w}");
            }
            Ok(0)
        }
        Command::Serve { .. } => unreachable!("handled before connecting"),
    }
}

/// Replace path sources with inline documents (paths are relative to the
/// config file) so the request is self-contained.
fn inline_sources(config: &mut ExperimentConfig, base: &Path) -> Result<(), Failure> {
    let resolve = |p: &str| {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            base.join(path)
        }
    };
    if let NetworkSource::Path(p) = &config.network {
        let doc = load_network_document(&resolve(p))?;
        config.network = NetworkSource::Inline { inline: doc };
    }
    if let EvidenceSource::Path(p) = &config.evidence {
        let doc = load_evidence_document(&resolve(p))?;
        config.evidence = EvidenceSource::Inline { inline: doc };
    }
    Ok(())
}
