//! HTTP front end for [`EpisodeService`].
//!
//! | method | path | body / reply |
//! |---|---|---|
//! | GET | `/v1/tasks` | task list |
//! | GET, POST | `/v1/episodes` | list, or create from `CreateEpisode` |
//! | GET | `/v1/episodes/{id}` | episode info |
//! | GET | `/v1/episodes/{id}/observation` | pending request envelope |
//! | POST | `/v1/episodes/{id}/action` | `{seq?, response}` or `{seq?, raw}` |
//! | POST | `/v1/episodes/{id}/ask` | `{seq?, question?}` |
//! | GET | `/v1/episodes/{id}/result` | episode result |
//! | GET | `/v1/episodes/{id}/log` | step log as JSON lines |
//! | GET | `/v1/episodes/{id}/frame.png` | current frame (direct control) |
//!
//! Errors reply `{"error": kind, "message": text}` with 404 for unknown
//! tasks and episodes, 409 for stale or concurrent submissions and
//! unfinished results, 410 once an episode has finished.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use turnbench::harness::{
    AgentOutput, CreateEpisode, EpisodeError, EpisodeInfo, EpisodeService, Phase, Response,
    ServiceError, SubmitReceipt,
};

type Shared = Arc<EpisodeService>;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ActionBody {
    #[serde(default)]
    pub seq: Option<u64>,
    #[serde(default)]
    pub response: Option<Response>,
    /// Agent output passed through verbatim, as if read off the wire.
    #[serde(default)]
    pub raw: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AskBody {
    #[serde(default)]
    pub seq: Option<u64>,
    /// Absent or blank means act without asking.
    #[serde(default)]
    pub question: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> HttpResponse {
        let (status, kind) = match &self.0 {
            ServiceError::UnknownTask(_) => (StatusCode::NOT_FOUND, "unknown_task"),
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::Conflict { .. } => (StatusCode::CONFLICT, "conflict"),
            ServiceError::Busy => (StatusCode::CONFLICT, "busy"),
            ServiceError::NotFinished => (StatusCode::CONFLICT, "not_finished"),
            ServiceError::Terminal | ServiceError::Episode(EpisodeError::Finished) => {
                (StatusCode::GONE, "terminal")
            }
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ServiceError::Episode(EpisodeError::Config(_)) => {
                (StatusCode::BAD_REQUEST, "invalid_config")
            }
            ServiceError::Episode(_) | ServiceError::Replay(_) | ServiceError::Io(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        let body = ErrorBody {
            error: kind.into(),
            message: self.0.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/v1/tasks", get(tasks))
        .route("/v1/episodes", get(list).post(create))
        .route("/v1/episodes/{id}", get(show))
        .route("/v1/episodes/{id}/observation", get(observation))
        .route("/v1/episodes/{id}/action", post(action))
        .route("/v1/episodes/{id}/ask", post(ask))
        .route("/v1/episodes/{id}/result", get(result))
        .route("/v1/episodes/{id}/log", get(log))
        .route("/v1/episodes/{id}/frame.png", get(frame))
        .with_state(service)
}

async fn tasks(State(s): State<Shared>) -> impl IntoResponse {
    Json(s.tasks())
}

async fn list(State(s): State<Shared>) -> impl IntoResponse {
    Json(s.list())
}

async fn create(
    State(s): State<Shared>,
    Json(req): Json<CreateEpisode>,
) -> ApiResult<(StatusCode, Json<EpisodeInfo>)> {
    Ok((StatusCode::CREATED, Json(s.create(req)?)))
}

async fn show(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<EpisodeInfo>> {
    Ok(Json(s.info(&id)?))
}

async fn observation(
    State(s): State<Shared>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.observation(&id)?))
}

async fn action(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<ActionBody>,
) -> ApiResult<Json<SubmitReceipt>> {
    let output = match (body.raw, body.response) {
        (Some(text), None) => AgentOutput::Raw { text },
        (None, Some(r)) => AgentOutput::response(&r),
        _ => {
            return Err(
                ServiceError::BadRequest("send exactly one of `response` or `raw`".into()).into(),
            )
        }
    };
    Ok(Json(s.submit(&id, body.seq, output)?))
}

async fn ask(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<AskBody>,
) -> ApiResult<Json<SubmitReceipt>> {
    let info = s.info(&id)?;
    if info.outcome.is_some() {
        return Err(ServiceError::Terminal.into());
    }
    if info.phase != Phase::AskPoint {
        return Err(ServiceError::BadRequest("the episode is not at its ask point".into()).into());
    }
    let response = match body.question {
        Some(q) if !q.trim().is_empty() => Response::Ask { question: q },
        _ => Response::Act,
    };
    Ok(Json(s.submit(
        &id,
        body.seq,
        AgentOutput::response(&response),
    )?))
}

async fn result(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.result(&id)?))
}

async fn log(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        s.log(&id)?,
    ))
}

async fn frame(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(([(header::CONTENT_TYPE, "image/png")], s.frame_png(&id)?))
}

/// Binds `addr` and serves until the process exits.
pub async fn serve(service: Shared, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service)).await
}
