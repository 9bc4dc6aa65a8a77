//! HTTP+JSON front of [`QuizService`].
//!
//! | method | path                                   | body / result                     |
//! |--------|----------------------------------------|-----------------------------------|
//! | POST   | `/sessions`                            | `{participant_id, role}` → view   |
//! | GET    | `/sessions/{id}`                       | view                              |
//! | POST   | `/sessions/{id}/start`                 | view                              |
//! | GET    | `/sessions/{id}/familiarization/{n}`   | PNG                               |
//! | GET    | `/sessions/{id}/images/{n}`            | PNG; `n` is an index or a token   |
//! | POST   | `/sessions/{id}/responses`             | `{index or token, answer}` → view |
//! | GET    | `/sessions/{id}/results`               | results, 409 until complete       |
//! | GET    | `/analytics`                           | report, 404 if none completed     |

use crate::service::{ItemKey, QuizService};
use crate::QuizError;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use std::sync::Arc;
use teegen_core::metrics::{Role, Verdict};

impl IntoResponse for QuizError {
    fn into_response(self) -> Response {
        let status = match &self {
            QuizError::BadRequest(_) | QuizError::Config(_) | QuizError::InsufficientPool { .. } => {
                StatusCode::BAD_REQUEST
            }
            QuizError::UnknownSession(_) | QuizError::UnknownImage(_) | QuizError::NoneCompleted => {
                StatusCode::NOT_FOUND
            }
            QuizError::SessionComplete | QuizError::RevisitDisallowed(_) | QuizError::NotComplete => {
                StatusCode::CONFLICT
            }
            QuizError::ImageUnavailable | QuizError::Io(_) | QuizError::Log(_) | QuizError::Metrics(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Deserialize)]
struct CreateBody {
    participant_id: String,
    role: Role,
}

#[derive(Deserialize)]
struct RespondBody {
    index: Option<usize>,
    token: Option<String>,
    answer: Verdict,
}

type Svc = State<Arc<QuizService>>;

fn png(bytes: Vec<u8>) -> Response {
    (
        [(header::CONTENT_TYPE, "image/png"), (header::CACHE_CONTROL, "no-store")],
        bytes,
    )
        .into_response()
}

async fn create(State(svc): Svc, Json(body): Json<CreateBody>) -> Result<Response, QuizError> {
    let view = svc.create_session(&body.participant_id, body.role)?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn view(State(svc): Svc, Path(id): Path<String>) -> Result<Response, QuizError> {
    Ok(Json(svc.view(&id)?).into_response())
}

async fn start(State(svc): Svc, Path(id): Path<String>) -> Result<Response, QuizError> {
    Ok(Json(svc.start(&id)?).into_response())
}

async fn image(State(svc): Svc, Path((id, n)): Path<(String, String)>) -> Result<Response, QuizError> {
    Ok(png(svc.image(&id, &ItemKey::parse(&n))?))
}

async fn familiarization(State(svc): Svc, Path((id, n)): Path<(String, usize)>) -> Result<Response, QuizError> {
    Ok(png(svc.familiarization_image(&id, n)?))
}

async fn respond(State(svc): Svc, Path(id): Path<String>, Json(body): Json<RespondBody>) -> Result<Response, QuizError> {
    let key = match (body.index, body.token) {
        (Some(i), None) => ItemKey::Index(i),
        (None, Some(t)) => ItemKey::Token(t),
        _ => return Err(QuizError::BadRequest("give exactly one of `index` or `token`".into())),
    };
    Ok(Json(svc.respond(&id, &key, body.answer)?).into_response())
}

async fn results(State(svc): Svc, Path(id): Path<String>) -> Result<Response, QuizError> {
    Ok(Json(svc.results(&id)?).into_response())
}

async fn analytics(State(svc): Svc) -> Result<Response, QuizError> {
    Ok(Json(svc.analytics()?).into_response())
}

pub fn router(service: Arc<QuizService>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(view))
        .route("/sessions/{id}/start", post(start))
        .route("/sessions/{id}/familiarization/{n}", get(familiarization))
        .route("/sessions/{id}/images/{n}", get(image))
        .route("/sessions/{id}/responses", post(respond))
        .route("/sessions/{id}/results", get(results))
        .route("/analytics", get(analytics))
        .with_state(service)
}

/// Serves until the process is stopped.
pub async fn serve(addr: std::net::SocketAddr, service: Arc<QuizService>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("quiz service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service)).await
}
