//! Canonical on-disk format for networks (`*.bn.json`) and evidence
//! (`*.ev.json`).
//!
//! A network document is a single JSON object `{ "name", "nodes": [...] }`
//! where each node carries `id`, `states`, `parents` (ids), and `cpt` (one
//! row per parent configuration, first declared parent most significant).
//! Serialization is canonical: keys in fixed order, nodes in declaration
//! order, probabilities printed with the shortest representation that
//! round-trips the underlying double (at most 17 significant digits), so
//! parse ∘ serialize is the identity on valid networks and equal inputs
//! produce byte-equal files.
//!
//! Evidence documents are JSON objects mapping node id to state label;
//! serialized with keys sorted by node id.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{Evidence, Network, NetworkBuilder, NetworkError, Violation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub name: String,
    pub nodes: Vec<NodeDocument>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDocument {
    pub id: String,
    pub states: Vec<String>,
    pub parents: Vec<String>,
    pub cpt: Vec<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("semantic error: {message}")]
    Semantic {
        node: Option<String>,
        message: String,
    },
    #[error("invalid network: {}", summarize(violations))]
    Invalid { violations: Vec<Violation> },
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("[{}] {}", v.kind.as_str(), v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

fn json_error(err: serde_json::Error) -> ParseError {
    match err.classify() {
        serde_json::error::Category::Data => ParseError::Semantic {
            node: None,
            message: format!("{err}"),
        },
        _ => ParseError::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        },
    }
}

/// Parse just the document structure; no semantic checks. The validator
/// front-end uses this so that invalid networks can still be loaded and
/// reported on.
pub fn parse_network_document(text: &str) -> Result<NetworkDocument, ParseError> {
    serde_json::from_str(text).map_err(json_error)
}

/// Resolve a document into a `Network`. Fails only on references that the
/// in-memory representation cannot express (unknown parent ids); all other
/// defects remain visible to `Network::validate`.
pub fn document_to_network(doc: &NetworkDocument) -> Result<Network, ParseError> {
    let mut builder = NetworkBuilder::new(doc.name.clone());
    for node in &doc.nodes {
        builder = builder.node(
            node.id.clone(),
            &node.states.iter().map(String::as_str).collect::<Vec<_>>(),
            &node.parents.iter().map(String::as_str).collect::<Vec<_>>(),
            node.cpt.clone(),
        );
    }
    builder.build().map_err(|e| match e {
        NetworkError::UnknownParent { node, parent } => ParseError::Semantic {
            node: Some(node.clone()),
            message: format!("node {node:?} references unknown parent {parent:?}"),
        },
        other => ParseError::Semantic {
            node: None,
            message: other.to_string(),
        },
    })
}

/// Strict parse: syntax, reference resolution, and every structural
/// invariant. The returned network always passes `validate`.
pub fn parse_network(text: &str) -> Result<Network, ParseError> {
    let doc = parse_network_document(text)?;
    let network = document_to_network(&doc)?;
    let report = network.validate();
    if !report.is_empty() {
        return Err(ParseError::Invalid {
            violations: report.violations,
        });
    }
    Ok(network)
}

pub fn network_to_document(network: &Network) -> NetworkDocument {
    NetworkDocument {
        name: network.name().to_string(),
        nodes: network
            .nodes()
            .iter()
            .map(|n| NodeDocument {
                id: n.id().to_string(),
                states: n.states().to_vec(),
                parents: n
                    .parents()
                    .iter()
                    .map(|&p| network.node(p).id().to_string())
                    .collect(),
                cpt: n.cpt().rows().to_vec(),
            })
            .collect(),
    }
}

/// Canonical serialization; see the module docs for the guarantees.
pub fn serialize_network(network: &Network) -> String {
    let doc = network_to_document(network);
    let mut text = serde_json::to_string_pretty(&doc).expect("network document serializes");
    text.push('\n');
    text
}

/// Parse a `{ nodeId: stateLabel }` object against a network.
pub fn parse_evidence(text: &str, network: &Network) -> Result<Evidence, ParseError> {
    let raw: std::collections::BTreeMap<String, String> =
        serde_json::from_str(text).map_err(json_error)?;
    let pairs: Vec<(&str, &str)> = raw
        .iter()
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .collect();
    Evidence::from_labels(network, &pairs).map_err(|e| match e {
        NetworkError::UnknownNode { id } => ParseError::Semantic {
            node: Some(id.clone()),
            message: format!("evidence references unknown node {id:?}"),
        },
        NetworkError::UnknownState { node, state } => ParseError::Semantic {
            node: Some(node.clone()),
            message: format!("evidence names unknown state {state:?} for node {node:?}"),
        },
        other => ParseError::Semantic {
            node: None,
            message: other.to_string(),
        },
    })
}

/// Serialize evidence with keys sorted by node id.
pub fn serialize_evidence(evidence: &Evidence, network: &Network) -> String {
    let map: std::collections::BTreeMap<String, String> = evidence
        .iter()
        .map(|(n, s)| {
            (
                network.node(n).id().to_string(),
                network.node(n).states()[s].clone(),
            )
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&map).expect("evidence serializes");
    text.push('\n');
    text
}
