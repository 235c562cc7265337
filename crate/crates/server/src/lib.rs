//! HTTP front end for `ssu_core::api`.
//!
//! Every route takes and returns JSON. Failures use the
//! `{"error": {"kind", "message"}}` body with status 400 (bad request),
//! 503 (scorer unavailable), 502 (scorer protocol) or 500. Handlers run on
//! the blocking pool since codec, rendering and scoring are CPU bound.

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use ssu_core::api::{self, ApiError, ApiErrorKind, ErrorBody};
use ssu_core::reward::SemanticScorer;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

#[derive(Clone)]
pub struct AppState {
    pub scorer: Arc<dyn SemanticScorer>,
}

impl AppState {
    pub fn new(scorer: impl SemanticScorer + 'static) -> Self {
        Self {
            scorer: Arc::new(scorer),
        }
    }
}

/// Wrapper giving `ApiError` an HTTP shape.
struct HttpError(ApiError);

impl IntoResponse for HttpError {
    fn into_response(self) -> Response {
        let status = match self.0.kind {
            ApiErrorKind::BadRequest => StatusCode::BAD_REQUEST,
            ApiErrorKind::ScorerUnavailable => StatusCode::SERVICE_UNAVAILABLE,
            ApiErrorKind::ScorerProtocol => StatusCode::BAD_GATEWAY,
            ApiErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(ErrorBody { error: self.0 })).into_response()
    }
}

type Reply<T> = Result<Json<T>, HttpError>;

/// Parses the body and runs `f` on the blocking pool. Body errors use the
/// common error shape instead of axum's plain-text rejections.
async fn run<Req, Res>(
    body: Bytes,
    f: impl FnOnce(Req) -> Result<Res, ApiError> + Send + 'static,
) -> Reply<Res>
where
    Req: DeserializeOwned + Send + 'static,
    Res: Serialize + Send + 'static,
{
    let req: Req = serde_json::from_slice(&body)
        .map_err(|e| HttpError(ApiError::bad_request(format!("invalid request body: {e}"))))?;
    match tokio::task::spawn_blocking(move || f(req)).await {
        Ok(Ok(res)) => Ok(Json(res)),
        Ok(Err(e)) => {
            tracing::debug!(kind = %e.kind, message = %e.message, "request failed");
            Err(HttpError(e))
        }
        Err(join) => Err(HttpError(ApiError::internal(format!("handler panicked: {join}")))),
    }
}

macro_rules! stateless {
    ($name:ident, $func:path, $req:ty, $res:ty) => {
        async fn $name(body: Bytes) -> Reply<$res> {
            run(body, |req: $req| $func(&req)).await
        }
    };
}

macro_rules! scored {
    ($name:ident, $func:path, $req:ty, $res:ty) => {
        async fn $name(State(state): State<AppState>, body: Bytes) -> Reply<$res> {
            run(body, move |req: $req| $func(&req, state.scorer.as_ref())).await
        }
    };
}

stateless!(canonicalize, api::canonicalize_svg, api::CanonicalizeRequest, api::CanonicalizeResponse);
stateless!(encode, api::encode, api::EncodeRequest, api::EncodeResponse);
stateless!(decode, api::decode, api::DecodeRequest, api::DecodeResponse);
stateless!(validate, api::validate, api::ValidateRequest, ssu_core::validate::ValidityVerdict);
stateless!(cot, api::cot, api::CotRequest, ssu_core::validate::CotReport);
stateless!(stats, api::stats, api::StatsRequest, ssu_core::ssu::TokenStats);
stateless!(render, api::render, api::RenderRequest, api::RenderResponse);
scored!(reward, api::reward, api::RewardRequest, ssu_core::reward::RewardReport);
scored!(grpo, api::grpo, api::GrpoRequest, api::GrpoResponse);
scored!(score, api::score, ssu_core::reward::ScoreRequest, ssu_core::reward::ScoreResponse);

async fn health() -> Json<api::Health> {
    Json(api::health())
}

async fn not_found() -> HttpError {
    HttpError(ApiError::bad_request("no such route"))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/canonicalize", post(canonicalize))
        .route("/v1/encode", post(encode))
        .route("/v1/decode", post(decode))
        .route("/v1/validate", post(validate))
        .route("/v1/cot", post(cot))
        .route("/v1/stats", post(stats))
        .route("/v1/render", post(render))
        .route("/v1/reward", post(reward))
        .route("/v1/grpo", post(grpo))
        .route("/score", post(score))
        .fallback(not_found)
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(listener: TcpListener, state: AppState) -> io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// A server on its own thread and runtime; stops when dropped.
pub struct RunningServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<io::Result<()>>>,
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` (port 0 for any free port) and serves in the background.
pub fn spawn(addr: SocketAddr, state: AppState) -> io::Result<RunningServer> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let std_listener = std::net::TcpListener::bind(addr)?;
    std_listener.set_nonblocking(true)?;
    let addr = std_listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = thread::Builder::new().name("ssu-server".into()).spawn(move || {
        runtime.block_on(async move {
            let listener = TcpListener::from_std(std_listener)?;
            axum::serve(listener, router(state))
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
        })
    })?;
    Ok(RunningServer {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
