//! JSON review API under `/api/v1/`.
//!
//! | method | path                               | body / result                     |
//! |--------|------------------------------------|-----------------------------------|
//! | GET    | `/api/v1/health`                   | `{"status":"ok"}`                 |
//! | GET    | `/api/v1/reviewers`                | roster                            |
//! | GET    | `/api/v1/reviewers/{id}/next`      | next unjudged item or `done`      |
//! | POST   | `/api/v1/verdicts`                 | verdict submission, 201 on success |
//! | GET    | `/api/v1/progress`                 | per-reviewer counts               |
//! | GET    | `/api/v1/agreement`                | `incomplete` or `complete` report |
//! | GET    | `/api/v1/disagreements[?format=csv]` | conflicting shared records      |
//!
//! Errors are `{"error": message}` with 400, 403, 404, 409 or 500.

use std::{path::PathBuf, sync::Arc};

use axum::{
    extract::{Path, Query, State},
    http::{header, StatusCode},
    response::{IntoResponse, Response},
    routing::{get, post},
    Json, Router,
};
use dermcascade::review::{Disagreement, ErrorKind, ReviewError, ReviewItem, ReviewSession, VerdictSubmission};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub type SharedSession = Arc<ReviewSession>;

struct ApiError(ReviewError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0.kind() {
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Forbidden => StatusCode::FORBIDDEN,
            ErrorKind::Conflict => StatusCode::CONFLICT,
            ErrorKind::Invalid => StatusCode::BAD_REQUEST,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        Self(e)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum NextResponse {
    Pending { item: ReviewItem },
    Done { judged: usize, assigned: usize },
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn reviewers(State(s): State<SharedSession>) -> Json<serde_json::Value> {
    Json(json!({ "reviewers": s.roster() }))
}

async fn next(State(s): State<SharedSession>, Path(reviewer): Path<String>) -> Result<Json<NextResponse>, ApiError> {
    Ok(Json(match s.next_item(&reviewer)? {
        Some(item) => NextResponse::Pending { item },
        None => {
            let p = s.progress();
            let me = p.reviewers.iter().find(|r| r.reviewer_id == reviewer).expect("known reviewer");
            NextResponse::Done { judged: me.judged, assigned: me.assigned }
        }
    }))
}

async fn post_verdict(
    State(s): State<SharedSession>,
    Json(sub): Json<VerdictSubmission>,
) -> Result<impl IntoResponse, ApiError> {
    Ok((StatusCode::CREATED, Json(s.submit(sub)?)))
}

async fn progress(State(s): State<SharedSession>) -> impl IntoResponse {
    Json(s.progress())
}

async fn agreement(State(s): State<SharedSession>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(s.agreement()?))
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn disagreements(State(s): State<SharedSession>, Query(q): Query<ExportQuery>) -> Response {
    let rows = s.disagreements();
    if q.format.as_deref() == Some("csv") {
        ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], disagreements_csv(&rows)).into_response()
    } else {
        Json(rows).into_response()
    }
}

/// One line per conflicting record with both judgments and notes.
pub fn disagreements_csv(rows: &[Disagreement]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["record_id", "label", "reviewer_a", "judgment_a", "note_a", "reviewer_b", "judgment_b", "note_b"])
        .expect("in-memory write");
    for d in rows {
        let mut rec = vec![d.record_id.clone(), d.label.clone()];
        for v in &d.verdicts {
            rec.push(v.reviewer_id.clone());
            rec.push(
                serde_json::to_value(v.judgment).ok().and_then(|j| j.as_str().map(String::from)).unwrap_or_default(),
            );
            rec.push(v.note.clone().unwrap_or_default());
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// API routes, plus the static UI bundle at `/` when `ui_dir` is given.
pub fn router(session: SharedSession, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/reviewers", get(reviewers))
        .route("/reviewers/{id}/next", get(next))
        .route("/verdicts", post(post_verdict))
        .route("/progress", get(progress))
        .route("/agreement", get(agreement))
        .route("/disagreements", get(disagreements))
        .with_state(session);
    let app = Router::new().nest("/api/v1", api);
    match ui_dir {
        Some(dir) => app.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => app,
    }
}

pub async fn serve(session: SharedSession, bind: &str, ui_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("review API listening on http://{}/api/v1/", listener.local_addr()?);
    eprintln!("review API listening on http://{}/api/v1/", listener.local_addr()?);
    axum::serve(listener, router(session, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
