//! Blocking clients: [`ServiceClient`] for the codec service and
//! [`HttpScorer`], a [`SemanticScorer`] that forwards to a remote
//! `POST /score` endpoint.

use std::thread;
use std::time::Duration;

use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;
use ssu_core::api::{self, ApiError, ErrorBody};
use ssu_core::raster::Framebuffer;
use ssu_core::reward::{RewardReport, ScoreRequest, ScoreResponse, ScorerError, SemanticScorer, StubScorer};
use ssu_core::ssu::TokenStats;
use ssu_core::validate::{CotReport, ValidityVerdict};
use thiserror::Error;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);
pub const DEFAULT_RETRIES: u32 = 2;
/// `SCORER_URL` value selecting the built-in stub.
pub const STUB_BACKEND: &str = "stub";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach {url}: {message}")]
    Unreachable { url: String, message: String },
    /// The service answered with its error body.
    #[error("service error ({status}): {error}")]
    Api { status: u16, error: ApiError },
    #[error("malformed response from {url}: {message}")]
    Malformed { url: String, message: String },
    #[error("cannot build HTTP client: {0}")]
    Setup(String),
}

fn build_http(timeout: Duration) -> Result<Client, ClientError> {
    Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| ClientError::Setup(e.to_string()))
}

/// Client of the codec service.
#[derive(Clone, Debug)]
pub struct ServiceClient {
    base: String,
    http: Client,
}

impl ServiceClient {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: &str, timeout: Duration) -> Result<Self, ClientError> {
        Ok(Self {
            base: base.trim_end_matches('/').to_owned(),
            http: build_http(timeout)?,
        })
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn post<Req: Serialize, Res: DeserializeOwned>(&self, path: &str, req: &Req) -> Result<Res, ClientError> {
        let url = format!("{}{path}", self.base);
        let resp = self.http.post(&url).json(req).send().map_err(|e| ClientError::Unreachable {
            url: url.clone(),
            message: e.to_string(),
        })?;
        read_json(&url, resp)
    }

    pub fn health(&self) -> Result<api::Health, ClientError> {
        let url = format!("{}/health", self.base);
        let resp = self.http.get(&url).send().map_err(|e| ClientError::Unreachable {
            url: url.clone(),
            message: e.to_string(),
        })?;
        read_json(&url, resp)
    }

    pub fn canonicalize(&self, req: &api::CanonicalizeRequest) -> Result<api::CanonicalizeResponse, ClientError> {
        self.post("/v1/canonicalize", req)
    }

    pub fn encode(&self, req: &api::EncodeRequest) -> Result<api::EncodeResponse, ClientError> {
        self.post("/v1/encode", req)
    }

    pub fn decode(&self, req: &api::DecodeRequest) -> Result<api::DecodeResponse, ClientError> {
        self.post("/v1/decode", req)
    }

    pub fn validate(&self, req: &api::ValidateRequest) -> Result<ValidityVerdict, ClientError> {
        self.post("/v1/validate", req)
    }

    pub fn cot(&self, req: &api::CotRequest) -> Result<CotReport, ClientError> {
        self.post("/v1/cot", req)
    }

    pub fn stats(&self, req: &api::StatsRequest) -> Result<TokenStats, ClientError> {
        self.post("/v1/stats", req)
    }

    pub fn render(&self, req: &api::RenderRequest) -> Result<api::RenderResponse, ClientError> {
        self.post("/v1/render", req)
    }

    pub fn reward(&self, req: &api::RewardRequest) -> Result<RewardReport, ClientError> {
        self.post("/v1/reward", req)
    }

    pub fn grpo(&self, req: &api::GrpoRequest) -> Result<api::GrpoResponse, ClientError> {
        self.post("/v1/grpo", req)
    }

    pub fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse, ClientError> {
        self.post("/score", req)
    }
}

fn read_json<T: DeserializeOwned>(url: &str, resp: Response) -> Result<T, ClientError> {
    let status = resp.status();
    let body = resp.bytes().map_err(|e| ClientError::Unreachable {
        url: url.to_owned(),
        message: e.to_string(),
    })?;
    let malformed = |message: String| ClientError::Malformed {
        url: url.to_owned(),
        message,
    };
    if status.is_success() {
        return serde_json::from_slice(&body).map_err(|e| malformed(e.to_string()));
    }
    match serde_json::from_slice::<ErrorBody>(&body) {
        Ok(b) => Err(ClientError::Api {
            status: status.as_u16(),
            error: b.error,
        }),
        Err(_) => Err(malformed(format!("status {status} without an error body"))),
    }
}

/// Remote scorer speaking the `POST /score` protocol. Transport failures,
/// timeouts and 5xx answers are retried; malformed answers are not.
#[derive(Clone, Debug)]
pub struct HttpScorer {
    url: String,
    http: Client,
    retries: u32,
    backoff: Duration,
}

impl HttpScorer {
    /// `base` is the backend root; requests go to `{base}/score`.
    pub fn new(base: &str) -> Result<Self, ClientError> {
        Self::with_options(base, DEFAULT_TIMEOUT, DEFAULT_RETRIES)
    }

    pub fn with_options(base: &str, timeout: Duration, retries: u32) -> Result<Self, ClientError> {
        Ok(Self {
            url: format!("{}/score", base.trim_end_matches('/')),
            http: build_http(timeout)?,
            retries,
            backoff: Duration::from_millis(100),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn attempt(&self, req: &ScoreRequest) -> Result<f64, ScorerError> {
        let resp = self
            .http
            .post(&self.url)
            .json(req)
            .send()
            .map_err(|e| ScorerError::Unavailable(format!("{}: {e}", self.url)))?;
        let status = resp.status();
        let body = resp
            .bytes()
            .map_err(|e| ScorerError::Unavailable(format!("{}: {e}", self.url)))?;
        if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
            return Err(ScorerError::Unavailable(format!("{} answered {status}", self.url)));
        }
        if status.is_client_error() {
            let message = serde_json::from_slice::<ErrorBody>(&body)
                .map(|b| b.error.message)
                .unwrap_or_else(|_| String::from_utf8_lossy(&body).into_owned());
            return Err(ScorerError::InvalidRequest(format!("{} answered {status}: {message}", self.url)));
        }
        let parsed: ScoreResponse = serde_json::from_slice(&body)
            .map_err(|e| ScorerError::Protocol(format!("{}: malformed score response: {e}", self.url)))?;
        Ok(parsed.score)
    }
}

impl SemanticScorer for HttpScorer {
    fn score(&self, prompt: &str, frames: &[Framebuffer], description: Option<&str>) -> Result<f64, ScorerError> {
        let req = ScoreRequest::new(prompt, frames, description)?;
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(&req) {
                Err(ScorerError::Unavailable(m)) if attempt < self.retries => {
                    tracing::warn!(attempt, error = %m, "scorer unavailable, retrying");
                    thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Scorer for a `SCORER_URL`-style setting: `stub` selects the built-in
/// stub, anything else is a remote backend URL.
pub fn scorer_for(backend: &str, timeout: Duration, retries: u32) -> Result<Box<dyn SemanticScorer>, ClientError> {
    if backend.trim().eq_ignore_ascii_case(STUB_BACKEND) {
        Ok(Box::new(StubScorer))
    } else {
        Ok(Box::new(HttpScorer::with_options(backend.trim(), timeout, retries)?))
    }
}
