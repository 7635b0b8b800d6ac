//! HTTP service exposing the inference engine over JSON.
//!
//! Stateless by design: every request carries its network and evidence
//! inline, and the engine's pure functions do the rest, so any number of
//! clients can hit one instance concurrently. Documents are the same JSON
//! schemas the CLI reads from disk; file paths are rejected (clients inline
//! documents before sending).
//!
//! Endpoints (all under `/v1`, POST with JSON bodies unless noted):
//!
//! - `GET  /healthz`        liveness probe
//! - `POST /v1/validate`    structural invariant report for a network
//! - `POST /v1/exact`       exact posteriors (enumeration or VE)
//! - `POST /v1/lbp`         loopy-belief-propagation beliefs
//! - `POST /v1/sample`      importance sampling / LW / logic sampling
//! - `POST /v1/generate`    seeded random network (and evidence)
//! - `POST /v1/experiment`  full benchmark sweep, returns records + CSV
//!
//! Errors use one JSON body `{ "kind", "message" }`; the kind maps onto
//! HTTP status (usage 400, data 422, cap 507, internal 500) and onto CLI
//! exit codes.

use axum::extract::Json;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;

use epis_core::api::{
    marginal_list, ApiError, ErrorKind, ExactMethod, ExactRequest, ExactResponse,
    ExperimentRequest, ExperimentResponse, GenerateRequest, GenerateResponse, IntoApiError,
    LbpRequest, LbpResponse, SampleRequest, SampleResponse, ValidateRequest, ValidateResponse,
    ViolationDto,
};
use epis_core::eval::{run_experiment, summarize, to_csv, EvidenceDocument};
use epis_core::io::{document_to_network, network_to_document, NetworkDocument, ParseError};
use epis_core::net::{Evidence, Network};
use epis_core::{exact, lbp, netgen, sampler};

/// Error wrapper that renders as the JSON error body with the right status.
#[derive(Debug)]
pub struct Failure(pub ApiError);

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let status = match self.0.kind {
            ErrorKind::Usage => StatusCode::BAD_REQUEST,
            ErrorKind::Data => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Cap => StatusCode::INSUFFICIENT_STORAGE,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(self.0)).into_response()
    }
}

impl<E: IntoApiError> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.into_api_error())
    }
}

type Handler<T> = Result<Json<T>, Failure>;

/// Strict network construction: references resolved and every invariant
/// checked.
fn build_network(doc: &NetworkDocument) -> Result<Network, Failure> {
    let network = document_to_network(doc)?;
    let report = network.validate();
    if !report.is_empty() {
        return Err(ParseError::Invalid {
            violations: report.violations,
        }
        .into());
    }
    Ok(network)
}

fn build_evidence(network: &Network, doc: &EvidenceDocument) -> Result<Evidence, Failure> {
    let pairs: Vec<(&str, &str)> = doc.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    Ok(Evidence::from_labels(network, &pairs)?)
}

/// Compute-bound work runs off the async threads.
async fn blocking<T: Send + 'static>(
    task: impl FnOnce() -> Result<T, Failure> + Send + 'static,
) -> Result<T, Failure> {
    tokio::task::spawn_blocking(task)
        .await
        .map_err(|e| Failure(ApiError::new(ErrorKind::Internal, e.to_string())))?
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn validate(Json(req): Json<ValidateRequest>) -> Handler<ValidateResponse> {
    blocking(move || {
        // Lenient build: representable defects become report entries, only
        // unresolvable references fail outright.
        let network = document_to_network(&req.network)?;
        let report = network.validate();
        Ok(Json(ValidateResponse {
            valid: report.is_empty(),
            violations: report.violations.iter().map(ViolationDto::from).collect(),
        }))
    })
    .await
}

async fn exact_posteriors(Json(req): Json<ExactRequest>) -> Handler<ExactResponse> {
    blocking(move || {
        let network = build_network(&req.network)?;
        let evidence = build_evidence(&network, &req.evidence)?;
        let result = match req.method {
            ExactMethod::Enumerate => exact::enumerate_posteriors(&network, &evidence)?,
            ExactMethod::Ve => exact::ve_posteriors(&network, &evidence)?,
        };
        Ok(Json(ExactResponse {
            evidence_probability: result.evidence_probability(),
            defined: result.is_defined(),
            marginals: marginal_list(&network, result.marginals()),
        }))
    })
    .await
}

async fn lbp_beliefs(Json(req): Json<LbpRequest>) -> Handler<LbpResponse> {
    blocking(move || {
        let network = build_network(&req.network)?;
        let evidence = build_evidence(&network, &req.evidence)?;
        let iterations = req
            .iterations
            .unwrap_or_else(|| lbp::default_propagation_length(&network, &evidence));
        let state = lbp::run(&network, &evidence, iterations);
        let beliefs = lbp::beliefs(&state, &network);
        let vectors: Vec<Option<Vec<f64>>> =
            beliefs.vectors().iter().cloned().map(Some).collect();
        Ok(Json(LbpResponse {
            iterations,
            conflict: state.conflict(),
            beliefs: marginal_list(&network, &vectors),
        }))
    })
    .await
}

async fn sample(Json(req): Json<SampleRequest>) -> Handler<SampleResponse> {
    blocking(move || {
        let network = build_network(&req.network)?;
        let evidence = build_evidence(&network, &req.evidence)?;
        let config = req.config;
        let prepared = sampler::prepare(&network, &evidence, &config)?;
        let tables = sampler::sample_prepared(&network, &evidence, &config, &prepared);
        let estimate = sampler::finalize(&config, &prepared, &tables)?;
        Ok(Json(SampleResponse {
            algorithm: config.algorithm.as_str().to_string(),
            samples: estimate.samples(),
            propagation_length: estimate.propagation_length(),
            cutoff: estimate.cutoff(),
            evidence_probability: estimate.evidence_probability(),
            effective_sample_size: estimate.effective_sample_size(),
            rejected: estimate.rejected(),
            conflict: estimate.conflict(),
            marginals: marginal_list(&network, estimate.marginals()),
            icpts: if req.dump_icpts {
                prepared.icpts().map(|set| set.to_document(&network))
            } else {
                None
            },
        }))
    })
    .await
}

async fn generate(Json(req): Json<GenerateRequest>) -> Handler<GenerateResponse> {
    blocking(move || {
        let network = netgen::generate_network(&req.spec)?;
        let evidence = match &req.evidence {
            Some(gen) => {
                let e = netgen::generate_evidence(
                    &network,
                    gen.k,
                    gen.seed,
                    gen.leaves_only,
                    gen.require_positive,
                )?;
                let doc: EvidenceDocument = e
                    .iter()
                    .map(|(node, state)| {
                        (
                            network.node(node).id().to_string(),
                            network.node(node).states()[state].clone(),
                        )
                    })
                    .collect();
                Some(doc)
            }
            None => None,
        };
        Ok(Json(GenerateResponse {
            network: network_to_document(&network),
            evidence,
        }))
    })
    .await
}

async fn experiment(Json(req): Json<ExperimentRequest>) -> Handler<ExperimentResponse> {
    blocking(move || {
        if req.config.references_paths() {
            return Err(Failure(ApiError::usage(
                "experiment configs sent to the service must inline documents, not file paths",
            )));
        }
        let records = run_experiment(&req.config)?;
        let (summaries, warnings) = summarize(&records);
        Ok(Json(ExperimentResponse {
            csv: to_csv(&records),
            records,
            summaries,
            warnings,
        }))
    })
    .await
}

/// The service router; everything the binary serves, reusable in-process.
pub fn router() -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/validate", post(validate))
        .route("/v1/exact", post(exact_posteriors))
        .route("/v1/lbp", post(lbp_beliefs))
        .route("/v1/sample", post(sample))
        .route("/v1/generate", post(generate))
        .route("/v1/experiment", post(experiment))
}

/// Serve on an already-bound listener (lets callers pick port 0 and read
/// the actual address before starting).
pub async fn serve(listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}
