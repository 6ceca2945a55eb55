//! HTTP routes. Handlers run engine calls on the blocking pool, so remote
//! backends never stall the async workers.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use relex_core::explainer::ExplainError;
use relex_core::kg::{Iri, KnowledgeGraph};
use relex_core::relevance::RelevanceError;

use crate::engine::{load_graph_file, Engine, EvaluateRequest, ExploreRequest};
use crate::EngineError;

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, message: message.into() }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::UnknownQuerySet(_) => StatusCode::NOT_FOUND,
            EngineError::Invalid(_) | EngineError::Graph { .. } | EngineError::Io { .. } => StatusCode::BAD_REQUEST,
            EngineError::Explain(ExplainError::Relevance(RelevanceError::OutOfRange { .. })) => StatusCode::BAD_REQUEST,
            EngineError::Explain(ExplainError::Path(_)) => StatusCode::BAD_REQUEST,
            EngineError::Explain(_) | EngineError::Ingest(_) => StatusCode::BAD_GATEWAY,
            EngineError::Config(_) | EngineError::Pattern { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError { status, message: e.to_string() }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError { status: r.status(), message: r.body_text() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T, F>(engine: &Arc<Engine>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> Result<T, EngineError> + Send + 'static,
{
    let engine = Arc::clone(engine);
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, message: e.to_string() })?
        .map_err(ApiError::from)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub triples: usize,
}

async fn health(State(engine): State<Arc<Engine>>) -> Json<Health> {
    Json(Health { status: "ok".into(), triples: engine.snapshot().kg.len() })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRef {
    path: std::path::PathBuf,
}

/// N-Triples in the body, or `{"path": ...}` with a JSON content type.
async fn replace_graph(
    State(engine): State<Arc<Engine>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<serde_json::Value> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let stats = blocking(&engine, move |engine| {
        let kg = if is_json {
            let r: GraphRef = serde_json::from_slice(&body).map_err(|e| EngineError::Invalid(e.to_string()))?;
            load_graph_file(&r.path, engine.config())?
        } else {
            let text = std::str::from_utf8(&body).map_err(|e| EngineError::Invalid(e.to_string()))?;
            KnowledgeGraph::load_ntriples(text.as_bytes(), engine.config().graph.options.clone())
                .map_err(|e| EngineError::Graph { path: None, message: e.to_string() })?
        };
        Ok(engine.replace_graph(kg))
    })
    .await?;
    Ok(Json(json!({ "triples": stats.triples, "entities": stats.entities })))
}

#[derive(Deserialize)]
struct EntityQuery {
    #[serde(default)]
    q: String,
    limit: Option<usize>,
}

async fn entities(State(engine): State<Arc<Engine>>, Query(p): Query<EntityQuery>) -> Json<serde_json::Value> {
    Json(json!(engine.search(&p.q, p.limit.unwrap_or(20))))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct QuerySetRef {
    query_set: Option<String>,
}

async fn discover(
    State(engine): State<Arc<Engine>>,
    body: Result<Json<QuerySetRef>, JsonRejection>,
) -> ApiResult<serde_json::Value> {
    let Json(r) = body?;
    let out = blocking(&engine, move |e| e.discover(r.query_set.as_deref())).await?;
    Ok(Json(json!(out)))
}

async fn facets(State(engine): State<Arc<Engine>>, Query(r): Query<QuerySetRef>) -> ApiResult<serde_json::Value> {
    let out = blocking(&engine, move |e| e.facets(r.query_set.as_deref())).await?;
    Ok(Json(json!(out)))
}

async fn explore(
    State(engine): State<Arc<Engine>>,
    body: Result<Json<ExploreRequest>, JsonRejection>,
) -> ApiResult<serde_json::Value> {
    let Json(req) = body?;
    let out = blocking(&engine, move |e| e.explore(&req)).await?;
    Ok(Json(json!(out)))
}

async fn evaluate(
    State(engine): State<Arc<Engine>>,
    body: Result<Json<EvaluateRequest>, JsonRejection>,
) -> ApiResult<serde_json::Value> {
    let Json(req) = body?;
    let out = blocking(&engine, move |e| e.evaluate(&req)).await?;
    Ok(Json(json!(out)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BaselineRequest {
    entity1: Iri,
    entity2: Iri,
}

/// Shortest-path verbalization for one pair; `null` when unconnected.
async fn baseline(
    State(engine): State<Arc<Engine>>,
    body: Result<Json<BaselineRequest>, JsonRejection>,
) -> ApiResult<serde_json::Value> {
    let Json(req) = body?;
    if req.entity1 == req.entity2 {
        return Err(ApiError::bad_request("entity1 and entity2 must differ"));
    }
    let out = blocking(&engine, move |e| Ok(e.graph_baseline(&req.entity1, &req.entity2))).await?;
    Ok(Json(json!(out)))
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/graphs", post(replace_graph))
        .route("/entities", get(entities))
        .route("/discover", post(discover))
        .route("/explore", post(explore))
        .route("/evaluate", post(evaluate))
        .route("/facets", get(facets))
        .route("/baseline", post(baseline))
        .with_state(engine)
}

/// Bind and serve until Ctrl-C.
pub async fn serve(engine: Arc<Engine>, bind: &str) -> Result<(), EngineError> {
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| EngineError::Config(format!("cannot bind {bind}: {e}")))?;
    log::info!("listening on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or_else(|_| bind.to_string()));
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| EngineError::Invalid(e.to_string()))
}
