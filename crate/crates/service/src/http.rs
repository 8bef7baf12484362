//! HTTP JSON API over a loaded [`Engine`]. Handlers only translate between
//! JSON and library calls.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, MethodRouter};
use axum::{Json, Router};
use contextrec::queryeng::QueryError;
use contextrec::{AnalogicalQuery, RecommendationItem};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::catch_panic::CatchPanicLayer;
use tower_http::cors::CorsLayer;

use crate::engine::{Engine, EngineDir};
use crate::openapi;

/// Every route as `(method, path)`; the router and the API description are
/// both checked against this list.
pub const ROUTES: &[(&str, &str)] = &[
    ("GET", "/health"),
    ("GET", "/contexts"),
    ("GET", "/documents/{id}"),
    ("GET", "/documents/{id}/recommendations"),
    ("POST", "/query"),
    ("GET", "/openapi.json"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn unknown_document(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown_document",
            format!("unknown document {id:?}"),
        )
    }

    fn bad_query(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_query", message)
    }
}

impl From<QueryError> for ApiError {
    fn from(err: QueryError) -> Self {
        match &err {
            QueryError::UnknownSeed(id) => Self::unknown_document(id),
            QueryError::UnknownContext(_) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_context", err.to_string())
            }
            _ => Self::bad_query(err.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Items {
    pub items: Vec<RecommendationItem>,
}

/// `POST /query` body. Omitted thresholds fall back to the engine configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryBody {
    pub seed: String,
    #[serde(default)]
    pub require: Vec<String>,
    #[serde(default)]
    pub exclude: Vec<String>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub tau_sim: Option<f64>,
    #[serde(default)]
    pub tau_dis: Option<f64>,
}

impl QueryBody {
    pub fn resolve(self, engine: &Engine) -> AnalogicalQuery {
        let t = &engine.settings.context.thresholds;
        let mut q = AnalogicalQuery::new(self.seed)
            .thresholds(self.tau_sim.unwrap_or(t.tau_sim), self.tau_dis.unwrap_or(t.tau_dis));
        q.require = self.require;
        q.exclude = self.exclude;
        if let Some(k) = self.k {
            q.k = k;
        }
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Diverse,
    Focused,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RecommendParams {
    #[serde(default)]
    pub mode: Mode,
    pub context: Option<String>,
    pub k: Option<usize>,
}

/// Shared recommendation entry point for the CLI and the HTTP layer.
pub fn recommend(
    engine: &Engine,
    seed: &str,
    mode: Mode,
    context: Option<&str>,
    k: usize,
) -> Result<Vec<RecommendationItem>, ApiError> {
    if k == 0 {
        return Err(ApiError::bad_query("k must be positive"));
    }
    let qe = engine.query_engine();
    let items = match mode {
        Mode::Diverse => qe.recommend_diverse(seed, k)?,
        Mode::Focused => {
            let c = context.ok_or_else(|| ApiError::bad_query("focused mode needs a context"))?;
            qe.recommend_focused(seed, c, k)?
        }
    };
    Ok(items)
}

type Shared = Arc<Engine>;

async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

async fn contexts(State(engine): State<Shared>) -> Json<Value> {
    Json(json!({"contexts": engine.graph.contexts().labels()}))
}

async fn document(State(engine): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let doc = engine.corpus.get(&id).ok_or_else(|| ApiError::unknown_document(&id))?;
    Ok(Json(doc).into_response())
}

async fn recommendations(
    State(engine): State<Shared>,
    Path(id): Path<String>,
    params: Result<Query<RecommendParams>, axum::extract::rejection::QueryRejection>,
) -> Result<Json<Items>, ApiError> {
    let Query(params) = params.map_err(|e| ApiError::bad_query(e.body_text()))?;
    let k = params.k.unwrap_or(contextrec::queryeng::DEFAULT_K);
    let items = recommend(&engine, &id, params.mode, params.context.as_deref(), k)?;
    Ok(Json(Items { items }))
}

async fn query(
    State(engine): State<Shared>,
    body: Result<Json<QueryBody>, JsonRejection>,
) -> Result<Json<Items>, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::bad_query(e.body_text()))?;
    let q = body.resolve(&engine);
    let items = engine.query_engine().answer(&q)?;
    Ok(Json(Items { items }))
}

async fn describe() -> Json<Value> {
    Json(openapi::openapi_describe())
}

fn internal(_: Box<dyn std::any::Any + Send + 'static>) -> Response {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error").into_response()
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

fn handler(method: &str, path: &str) -> MethodRouter<Shared> {
    match (method, path) {
        ("GET", "/health") => get(health),
        ("GET", "/contexts") => get(contexts),
        ("GET", "/documents/{id}") => get(document),
        ("GET", "/documents/{id}/recommendations") => get(recommendations),
        ("POST", "/query") => post(query),
        ("GET", "/openapi.json") => get(describe),
        _ => unreachable!("route {method} {path} has no handler"),
    }
}

/// Router over [`ROUTES`]; CORS is permissive when `cors` is set.
pub fn router(engine: Engine, cors: bool) -> Router {
    let mut app = Router::new();
    for (method, path) in ROUTES {
        app = app.route(path, handler(method, path));
    }
    let app = app
        .fallback(fallback)
        .with_state(Arc::new(engine))
        .layer(CatchPanicLayer::custom(internal));
    if cors {
        app.layer(CorsLayer::permissive())
    } else {
        app
    }
}

/// Server settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub dir: PathBuf,
    pub host: String,
    pub port: u16,
    pub cors: bool,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.port == 0 {
            bail!("port must lie in 1..=65535");
        }
        if !self.dir.is_dir() {
            bail!("engine directory {} does not exist", self.dir.display());
        }
        Ok(())
    }

    pub fn addr(&self) -> Result<SocketAddr> {
        format!("{}:{}", self.host, self.port)
            .parse()
            .with_context(|| format!("invalid listen address {}:{}", self.host, self.port))
    }
}

/// Loads the engine directory and serves until the process is stopped.
pub async fn serve(config: EngineConfig) -> Result<()> {
    config.validate()?;
    let engine = Engine::open(&EngineDir::new(&config.dir))?;
    let listener = tokio::net::TcpListener::bind(config.addr()?)
        .await
        .with_context(|| format!("cannot listen on {}:{}", config.host, config.port))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(engine, config.cors)).await?;
    Ok(())
}
