//! JSON routes: `GET /api/task`, `POST /api/judgment`, `POST /api/qualify`
//! and `GET /api/progress`.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use factlens_core::annotation::JudgmentRecord;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::store::{AnnotationTask, Answers, Phase, Progress, QualifyOutcome, Store};

#[derive(Debug, Deserialize)]
pub struct AnnotatorQuery {
    pub annotator: String,
}

#[derive(Debug, Deserialize)]
pub struct ProgressQuery {
    pub annotator: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResponse {
    pub phase: Phase,
    pub tasks: Vec<AnnotationTask>,
}

/// Submission body; every dimension is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgmentPayload {
    pub annotator_id: String,
    pub task_id: String,
    pub q1: bool,
    pub q2: bool,
    pub q3: bool,
    pub q4: bool,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentResponse {
    pub record_id: i64,
    pub record: JudgmentRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualifyAnswer {
    pub task_id: String,
    pub q1: bool,
    pub q2: bool,
    pub q3: bool,
    pub q4: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualifyPayload {
    pub annotator_id: String,
    pub answers: Vec<QualifyAnswer>,
}

fn body<T>(payload: std::result::Result<Json<T>, JsonRejection>) -> Result<T> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::Validation(e.body_text()))
}

async fn next_task(
    State(store): State<Arc<Store>>,
    query: std::result::Result<Query<AnnotatorQuery>, QueryRejection>,
) -> Result<Json<TaskResponse>> {
    let Query(q) = query.map_err(|e| ServiceError::Validation(e.body_text()))?;
    let (phase, tasks) = store.next_task(&q.annotator)?;
    Ok(Json(TaskResponse { phase, tasks }))
}

async fn submit_judgment(
    State(store): State<Arc<Store>>,
    payload: std::result::Result<Json<JudgmentPayload>, JsonRejection>,
) -> Result<(StatusCode, Json<JudgmentResponse>)> {
    let p = body(payload)?;
    let answers = Answers {
        q1: p.q1,
        q2: p.q2,
        q3: p.q3,
        q4: p.q4,
    };
    let (record_id, record) = store.submit(&p.annotator_id, &p.task_id, answers, p.quality)?;
    Ok((StatusCode::CREATED, Json(JudgmentResponse { record_id, record })))
}

async fn qualify(
    State(store): State<Arc<Store>>,
    payload: std::result::Result<Json<QualifyPayload>, JsonRejection>,
) -> Result<Json<QualifyOutcome>> {
    let p = body(payload)?;
    let mut answers = BTreeMap::new();
    for a in p.answers {
        let task = a.task_id.clone();
        let value = Answers {
            q1: a.q1,
            q2: a.q2,
            q3: a.q3,
            q4: a.q4,
        };
        if answers.insert(task.clone(), value).is_some() {
            return Err(ServiceError::Validation(format!("{task} answered twice")));
        }
    }
    Ok(Json(store.qualify(&p.annotator_id, &answers)?))
}

async fn progress(State(store): State<Arc<Store>>, Query(q): Query<ProgressQuery>) -> Result<Json<Progress>> {
    Ok(Json(store.progress(q.annotator.as_deref())?))
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/api/task", get(next_task))
        .route("/api/judgment", post(submit_judgment))
        .route("/api/qualify", post(qualify))
        .route("/api/progress", get(progress))
        .with_state(store)
}

/// Serves until the process receives Ctrl-C.
pub async fn serve(store: Arc<Store>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "annotation service listening");
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
