//! Thin async client for the inference service.
//!
//! One method per endpoint, requests and responses straight from
//! `epis_core::api`. Server-reported errors surface as
//! [`ClientError::Api`] with the machine-readable kind intact, so callers
//! (the CLI in particular) can map them to exit codes without parsing
//! messages.

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use epis_core::api::{
    ApiError, ExactRequest, ExactResponse, ExperimentRequest, ExperimentResponse,
    GenerateRequest, GenerateResponse, LbpRequest, LbpResponse, SampleRequest, SampleResponse,
    ValidateRequest, ValidateResponse,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("{}", .0.message)]
    Api(ApiError),
    #[error("unexpected response status {0}")]
    Status(reqwest::StatusCode),
}

impl ClientError {
    /// The server's error classification, when there is one.
    pub fn api_error(&self) -> Option<&ApiError> {
        match self {
            ClientError::Api(e) => Some(e),
            _ => None,
        }
    }
}

#[derive(Clone)]
pub struct ApiClient {
    base: String,
    http: reqwest::Client,
}

impl ApiClient {
    /// `base_url` like `http://127.0.0.1:8733`, no trailing slash needed.
    pub fn new(base_url: impl Into<String>) -> Self {
        let mut base = base_url.into();
        while base.ends_with('/') {
            base.pop();
        }
        ApiClient {
            base,
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        request: &Req,
    ) -> Result<Resp, ClientError> {
        let response = self
            .http
            .post(format!("{}{}", self.base, path))
            .json(request)
            .send()
            .await?;
        let status = response.status();
        if status.is_success() {
            return Ok(response.json().await?);
        }
        match response.json::<ApiError>().await {
            Ok(api) => Err(ClientError::Api(api)),
            Err(_) => Err(ClientError::Status(status)),
        }
    }

    pub async fn health(&self) -> Result<(), ClientError> {
        let response = self
            .http
            .get(format!("{}/healthz", self.base))
            .send()
            .await?;
        if response.status().is_success() {
            Ok(())
        } else {
            Err(ClientError::Status(response.status()))
        }
    }

    pub async fn validate(&self, req: &ValidateRequest) -> Result<ValidateResponse, ClientError> {
        self.post("/v1/validate", req).await
    }

    pub async fn exact(&self, req: &ExactRequest) -> Result<ExactResponse, ClientError> {
        self.post("/v1/exact", req).await
    }

    pub async fn lbp(&self, req: &LbpRequest) -> Result<LbpResponse, ClientError> {
        self.post("/v1/lbp", req).await
    }

    pub async fn sample(&self, req: &SampleRequest) -> Result<SampleResponse, ClientError> {
        self.post("/v1/sample", req).await
    }

    pub async fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse, ClientError> {
        self.post("/v1/generate", req).await
    }

    pub async fn experiment(
        &self,
        req: &ExperimentRequest,
    ) -> Result<ExperimentResponse, ClientError> {
        self.post("/v1/experiment", req).await
    }
}
