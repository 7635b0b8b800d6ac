//! Request/response types for the HTTP service, shared by the server and
//! the client so the wire format has one definition.
//!
//! Documents travel inline: a request carries the network and evidence JSON
//! bodies, never file paths (the CLI resolves paths before sending).
//! Errors carry a machine-readable kind that maps onto process exit codes:
//! usage -> 1, data -> 2, cap -> 3.

use serde::{Deserialize, Serialize};

use crate::eval::{
    ArmSummary, EvidenceDocument, ExperimentConfig, ExperimentError, MetricError, RunRecord,
};
use crate::exact::OracleError;
use crate::importance::{CutoffError, IcptDump};
use crate::io::{NetworkDocument, ParseError};
use crate::net::{Network, NetworkError, Violation};
use crate::netgen::{GenError, GenSpec};
use crate::sampler::{SamplerConfig, SamplerError};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidateRequest {
    pub network: NetworkDocument,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ViolationDto {
    pub node: Option<String>,
    pub kind: String,
    pub message: String,
}

impl From<&Violation> for ViolationDto {
    fn from(v: &Violation) -> Self {
        ViolationDto {
            node: v.node.clone(),
            kind: v.kind.as_str().to_string(),
            message: v.message.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub valid: bool,
    pub violations: Vec<ViolationDto>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExactMethod {
    #[default]
    Enumerate,
    Ve,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExactRequest {
    pub network: NetworkDocument,
    #[serde(default)]
    pub evidence: EvidenceDocument,
    #[serde(default)]
    pub method: ExactMethod,
}

/// Marginal (or belief) vector of one node, states in declared order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeMarginal {
    pub node: String,
    pub probabilities: Vec<f64>,
}

/// Marginal list in node declaration order, skipping undefined slots.
pub fn marginal_list(network: &Network, marginals: &[Option<Vec<f64>>]) -> Vec<NodeMarginal> {
    marginals
        .iter()
        .enumerate()
        .filter_map(|(i, m)| {
            m.as_ref().map(|p| NodeMarginal {
                node: network.node(i).id().to_string(),
                probabilities: p.clone(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExactResponse {
    pub evidence_probability: f64,
    /// False when P(E) = 0 and the marginals are undefined.
    pub defined: bool,
    pub marginals: Vec<NodeMarginal>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LbpRequest {
    pub network: NetworkDocument,
    #[serde(default)]
    pub evidence: EvidenceDocument,
    /// Sweep count; defaults to the deepest-evidence-depth rule.
    #[serde(default)]
    pub iterations: Option<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LbpResponse {
    pub iterations: u32,
    pub conflict: bool,
    pub beliefs: Vec<NodeMarginal>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleRequest {
    pub network: NetworkDocument,
    #[serde(default)]
    pub evidence: EvidenceDocument,
    pub config: SamplerConfig,
    /// Include the computed importance tables in the response.
    #[serde(default)]
    pub dump_icpts: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleResponse {
    pub algorithm: String,
    pub samples: u64,
    pub propagation_length: u32,
    pub cutoff: bool,
    pub evidence_probability: f64,
    pub effective_sample_size: f64,
    pub rejected: u64,
    pub conflict: bool,
    pub marginals: Vec<NodeMarginal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub icpts: Option<IcptDump>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerateRequest {
    pub spec: GenSpec,
    #[serde(default)]
    pub evidence: Option<GenerateEvidence>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerateEvidence {
    pub k: usize,
    #[serde(default)]
    pub leaves_only: bool,
    #[serde(default)]
    pub require_positive: bool,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub network: NetworkDocument,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evidence: Option<EvidenceDocument>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentRequest {
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentResponse {
    pub csv: String,
    pub records: Vec<RunRecord>,
    pub summaries: Vec<ArmSummary>,
    pub warnings: Vec<String>,
}

/// Machine-readable error category; the CLI turns these into exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    /// Malformed request or unusable parameters (exit 1).
    Usage,
    /// Invalid model, impossible evidence, unresolvable references (exit 2).
    Data,
    /// A resource cap was exceeded (exit 3).
    Cap,
    /// Unexpected internal failure (exit 1).
    Internal,
}

impl ErrorKind {
    pub fn exit_code(&self) -> i32 {
        match self {
            ErrorKind::Usage | ErrorKind::Internal => 1,
            ErrorKind::Data => 2,
            ErrorKind::Cap => 3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
}

impl ApiError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        ApiError {
            kind,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        ApiError::new(ErrorKind::Usage, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        ApiError::new(ErrorKind::Data, message)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ApiError {}

/// Classification of engine errors into wire categories.
pub trait IntoApiError {
    fn into_api_error(self) -> ApiError;
}

impl IntoApiError for ParseError {
    fn into_api_error(self) -> ApiError {
        ApiError::data(self.to_string())
    }
}

impl IntoApiError for NetworkError {
    fn into_api_error(self) -> ApiError {
        ApiError::data(self.to_string())
    }
}

impl IntoApiError for OracleError {
    fn into_api_error(self) -> ApiError {
        match &self {
            OracleError::CapExceeded { .. } | OracleError::FactorTooLarge { .. } => {
                ApiError::new(ErrorKind::Cap, self.to_string())
            }
            OracleError::Network(_) => ApiError::data(self.to_string()),
        }
    }
}

impl IntoApiError for SamplerError {
    fn into_api_error(self) -> ApiError {
        match &self {
            SamplerError::InvalidConfig(_) => ApiError::usage(self.to_string()),
            SamplerError::ZeroTotalWeight { .. } => ApiError::data(self.to_string()),
            SamplerError::Cutoff(_) => ApiError::data(self.to_string()),
            SamplerError::Network(_) => ApiError::data(self.to_string()),
        }
    }
}

impl IntoApiError for CutoffError {
    fn into_api_error(self) -> ApiError {
        ApiError::data(self.to_string())
    }
}

impl IntoApiError for GenError {
    fn into_api_error(self) -> ApiError {
        match self {
            GenError::InvalidSpec(_) | GenError::Unsatisfiable(_) => {
                ApiError::usage(self.to_string())
            }
            GenError::RetryBudgetExhausted { .. } => ApiError::data(self.to_string()),
            GenError::Oracle(e) => e.into_api_error(),
            GenError::Network(e) => e.into_api_error(),
        }
    }
}

impl IntoApiError for MetricError {
    fn into_api_error(self) -> ApiError {
        ApiError::new(ErrorKind::Internal, self.to_string())
    }
}

impl IntoApiError for ExperimentError {
    fn into_api_error(self) -> ApiError {
        match self {
            ExperimentError::Invalid(_) => ApiError::usage(self.to_string()),
            ExperimentError::Io { .. } => ApiError::usage(self.to_string()),
            ExperimentError::Parse(e) => e.into_api_error(),
            ExperimentError::Gen(e) => e.into_api_error(),
            ExperimentError::Oracle(e) => e.into_api_error(),
            ExperimentError::Sampler(e) => e.into_api_error(),
            ExperimentError::Metric(e) => e.into_api_error(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(ErrorKind::Usage.exit_code(), 1);
        assert_eq!(ErrorKind::Data.exit_code(), 2);
        assert_eq!(ErrorKind::Cap.exit_code(), 3);
        assert_eq!(ErrorKind::Internal.exit_code(), 1);
    }

    #[test]
    fn oracle_cap_is_a_cap_error() {
        let err = OracleError::CapExceeded {
            required: 100,
            cap: 10,
        };
        assert_eq!(err.into_api_error().kind, ErrorKind::Cap);
    }

    #[test]
    fn error_body_round_trips() {
        let err = ApiError::data("bad network");
        let text = serde_json::to_string(&err).unwrap();
        assert!(text.contains("\"data\""));
        let back: ApiError = serde_json::from_str(&text).unwrap();
        assert_eq!(back.kind, ErrorKind::Data);
    }
}
