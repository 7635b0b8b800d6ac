//! Approximate and exact inference for discrete Bayesian networks.
//!
//! The centerpiece is an importance sampler whose sampling distribution is
//! pre-computed by loopy belief propagation: a fixed number of synchronous
//! message-passing sweeps yields per-node lambda vectors, which turn each
//! conditional probability table into an importance conditional probability
//! table (ICPT). An epsilon-cutoff heuristic thickens the tails of the
//! resulting importance function so that rare evidence does not starve the
//! sampler. Likelihood weighting and probabilistic logic sampling are
//! provided as baselines, brute-force enumeration and variable elimination
//! as exact oracles, and an experiment harness measures convergence against
//! the oracles in Hellinger distance and mean squared error.
//!
//! Modules map onto the moving parts:
//!
//! - [`net`] — network representation, validation, topological ordering
//! - [`io`] — canonical JSON (de)serialization of networks and evidence
//! - [`exact`] — enumeration and variable-elimination oracles, exact ICPTs
//! - [`lbp`] — synchronous loopy belief propagation
//! - [`importance`] — ICPT construction and the epsilon-cutoff heuristic
//! - [`sampler`] — the importance sampler and the two baselines
//! - [`netgen`] — seeded random networks and evidence for benchmarks
//! - [`eval`] — metrics, experiment orchestration, CSV output
//! - [`api`] — wire types shared by the HTTP server and client

pub mod api;
pub mod eval;
pub mod exact;
pub mod fixtures;
pub mod importance;
pub mod io;
pub mod lbp;
pub mod net;
pub mod netgen;
pub mod numeric;
pub mod sampler;

pub use net::{Evidence, Network, NetworkError, ValidationReport};
