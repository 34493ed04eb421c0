//! Session-oriented HTTP JSON API.

mod store;

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cotvis_core::chartspec::emit_chart;
use cotvis_core::cot::{node_stage, run_pipeline, PipelineCause, PipelineError, PipelineOptions, ReasoningTrace, StageId};
use cotvis_core::datastore::Database;
use cotvis_core::executor::{execute, execute_step, ResultTable, StepView};
use cotvis_core::model::ModelClient;
use cotvis_core::refine::{correct, promote_alternative, CorrectionRequest, RefineError, TraceDiff};
use cotvis_core::vql::{canonicalize, VqlQuery};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::load::{DbRoot, DbRootError};
pub use store::{Origin, Session, SessionCell, SessionStore, TraceVersion};

/// Rows shown for an S1 node.
pub const RAW_PREVIEW_ROWS: usize = 50;

pub struct AppState {
    pub dbs: DbRoot,
    pub client: Arc<dyn ModelClient>,
    pub store: SessionStore,
    pub pipeline: PipelineOptions,
}

/// Final query, result and chart of a complete trace.
pub struct Materialized {
    pub query: VqlQuery,
    pub result: ResultTable,
    pub chart: Value,
}

/// Parses, executes and charts the trace's final VQL.
pub fn materialize(trace: &ReasoningTrace, db: &Database) -> Result<Materialized, String> {
    let query = trace.query().map_err(|e| e.to_string())?;
    let result = execute(&query, db).map_err(|e| e.to_string())?;
    let chart = emit_chart(&query, &result).map_err(|e| e.to_string())?.to_vega_lite();
    Ok(Materialized { query, result, chart })
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    extra: serde_json::Map<String, Value>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, kind, message: message.into(), extra: serde_json::Map::new() }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut err = serde_json::Map::new();
        err.insert("kind".into(), json!(self.kind));
        err.insert("message".into(), json!(self.message));
        let mut body = self.extra;
        body.insert("error".into(), Value::Object(err));
        (self.status, Json(Value::Object(body))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/databases", get(list_databases))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/query", post(submit_query))
        .route("/sessions/{id}/trace", get(get_trace))
        .route("/sessions/{id}/steps/{*rest}", get(step_data))
        .route("/sessions/{id}/correct", post(correct_step))
        .route("/sessions/{id}/promote", post(promote))
        .route("/sessions/{id}/export", get(export))
        .with_state(state)
}

fn session(state: &AppState, id: &str) -> ApiResult<Arc<SessionCell>> {
    state
        .store
        .get(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("unknown session {id}")))
}

fn database(state: &AppState, id: &str) -> ApiResult<Arc<Database>> {
    state.dbs.load(id).map_err(|e| match e {
        DbRootError::Unknown(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_database", e.to_string()),
        DbRootError::Load(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "database_load", e.to_string()),
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)
}

async fn list_databases(State(state): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let st = state.clone();
    let ids = blocking(move || st.dbs.list()).await?;
    Ok(Json(json!({ "databases": ids })))
}

#[derive(Deserialize)]
struct CreateSession {
    database: String,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(body): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let st = state.clone();
    let name = body.database.clone();
    blocking(move || database(&st, &name).map(|_| ())).await??;
    let s = state.store.create(&body.database).map_err(ApiError::internal)?;
    Ok((StatusCode::CREATED, Json(json!({"id": s.id, "database": s.database, "created_at": s.created_at}))))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let cell = session(&state, &id)?;
    let s = cell.state.read().expect("session lock");
    let versions: Vec<Value> = s.versions.iter().map(|v| json!({"version": v.version, "origin": v.origin})).collect();
    Ok(Json(json!({"id": s.id, "database": s.database, "created_at": s.created_at, "versions": versions})))
}

/// Body shared by query, correction and promotion responses.
fn version_body(v: &TraceVersion, db: &Database) -> (Value, Option<String>) {
    let mut body = json!({
        "version": v.version,
        "origin": v.origin,
        "trace": v.trace,
        "tree": v.trace.tree(),
        "diff": v.diff,
        "vql": v.trace.vql(),
    });
    match materialize(&v.trace, db) {
        Ok(m) => {
            body["vql"] = json!(canonicalize(&m.query));
            body["chart_spec"] = m.chart;
            body["data"] = json!(m.result);
            (body, None)
        }
        Err(e) => {
            body["chart_spec"] = Value::Null;
            body["data"] = Value::Null;
            (body, Some(e))
        }
    }
}

/// 200 with the version, or 422 with the version attached when the final
/// VQL does not execute.
fn version_response(v: &TraceVersion, db: &Database) -> Response {
    match version_body(v, db) {
        (body, None) => Json(body).into_response(),
        (body, Some(msg)) => {
            let Value::Object(extra) = body else { unreachable!() };
            ApiError { status: StatusCode::UNPROCESSABLE_ENTITY, kind: "execution", message: msg, extra }.into_response()
        }
    }
}

fn busy(id: &str) -> ApiError {
    ApiError::new(StatusCode::CONFLICT, "busy", format!("session {id} has a request in flight"))
}

fn pipeline_error(e: &PipelineError) -> ApiError {
    let (status, kind) = match e.cause {
        PipelineCause::Backend(_) => (StatusCode::BAD_GATEWAY, "backend"),
        PipelineCause::Extraction(_) => (StatusCode::UNPROCESSABLE_ENTITY, "extraction"),
        PipelineCause::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_vql"),
    };
    ApiError::new(status, kind, e.to_string()).with("stage", json!(e.stage.map(StageId::as_str)))
}

/// Stores the trace attached to a failed run, so it can be inspected and
/// corrected, and reports the failure with that version.
fn failed_run(
    state: &AppState,
    cell: &SessionCell,
    origin: Origin,
    base: Option<&ReasoningTrace>,
    e: &PipelineError,
) -> ApiResult<Response> {
    let mut err = pipeline_error(e);
    if let Some(t) = &e.trace {
        let diff = base.map(|b| cotvis_core::refine::diff_traces(b, t));
        let v = state.store.push_version(cell, origin, (**t).clone(), diff).map_err(ApiError::internal)?;
        err = err
            .with("version", json!(v.version))
            .with("trace", json!(v.trace))
            .with("tree", json!(v.trace.tree()))
            .with("diff", json!(v.diff));
    }
    Ok(err.into_response())
}

#[derive(Deserialize)]
struct SubmitQuery {
    nl_query: String,
}

async fn submit_query(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<SubmitQuery>,
) -> ApiResult<Response> {
    if body.nl_query.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "nl_query is empty"));
    }
    let cell = session(&state, &id)?;
    let guard = cell.try_begin().ok_or_else(|| busy(&id))?;
    let st = state.clone();
    blocking(move || {
        let _guard = guard;
        let db_name = cell.state.read().expect("session lock").database.clone();
        let db = database(&st, &db_name)?;
        let origin = Origin::Query { nl_query: body.nl_query.clone() };
        match run_pipeline(&body.nl_query, &db, st.client.as_ref(), &st.pipeline) {
            Ok(out) => {
                let v = st.store.push_version(&cell, origin, out.trace, None).map_err(ApiError::internal)?;
                Ok(version_response(&v, &db))
            }
            Err(e) => failed_run(&st, &cell, origin, None, &e),
        }
    })
    .await?
}

#[derive(Deserialize)]
struct VersionQuery {
    version: Option<u32>,
}

fn pick_version(cell: &SessionCell, v: Option<u32>) -> ApiResult<TraceVersion> {
    let s = cell.state.read().expect("session lock");
    match v {
        None => s
            .latest()
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "no_trace", "the session has no trace yet")),
        Some(n) => s
            .version(n)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_version", format!("unknown version {n}"))),
    }
}

async fn get_trace(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<VersionQuery>,
) -> ApiResult<Json<Value>> {
    let cell = session(&state, &id)?;
    let v = pick_version(&cell, q.version)?;
    Ok(Json(json!({
        "version": v.version,
        "origin": v.origin,
        "trace": v.trace,
        "tree": v.trace.tree(),
        "diff": v.diff,
    })))
}

/// The view shown for a node: raw preview for S1, filtered rows for S2,
/// grouped rows for S3, final rows for S4 and S5.
pub fn view_for(stage: StageId) -> StepView {
    match stage {
        StageId::S1 => StepView::Raw { limit: RAW_PREVIEW_ROWS },
        StageId::S2 => StepView::Filtered,
        StageId::S3 => StepView::Grouped,
        StageId::S4 | StageId::S5 => StepView::Final,
    }
}

async fn step_data(
    State(state): State<Arc<AppState>>,
    Path((id, rest)): Path<(String, String)>,
    Query(q): Query<VersionQuery>,
) -> ApiResult<Json<ResultTable>> {
    let node = rest
        .strip_suffix("/data")
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", "expected /steps/{node}/data"))?
        .to_string();
    let cell = session(&state, &id)?;
    let v = pick_version(&cell, q.version)?;
    let stage = node_stage(&node)
        .filter(|_| v.trace.node_ids().iter().any(|n| *n == node))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_node", format!("unknown node {node}")))?;
    let db_name = cell.state.read().expect("session lock").database.clone();
    let st = state.clone();
    blocking(move || {
        let db = database(&st, &db_name)?;
        let exec = |msg: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "execution", msg);
        let query = v.trace.query().map_err(|e| exec(e.to_string()))?;
        execute_step(&query, &db, view_for(stage)).map(Json).map_err(|e| exec(e.to_string()))
    })
    .await?
}

fn refine_error(e: RefineError) -> ApiError {
    match e {
        RefineError::UnknownNode(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_node", e.to_string()),
        RefineError::UnknownAlternative(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_alternative", e.to_string()),
        RefineError::EmptyPreference | RefineError::UnexpectedPreference => {
            ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string())
        }
        RefineError::Pipeline(p) => pipeline_error(&p),
    }
}

/// Runs `f` on the latest trace under the session's busy guard and stores
/// the result as the next version.
async fn mutate(
    state: Arc<AppState>,
    id: String,
    origin: Origin,
    f: impl FnOnce(&ReasoningTrace, &Database, &dyn ModelClient) -> Result<(ReasoningTrace, TraceDiff), RefineError> + Send + 'static,
) -> ApiResult<Response> {
    let cell = session(&state, &id)?;
    let guard = cell.try_begin().ok_or_else(|| busy(&id))?;
    let base = pick_version(&cell, None)?;
    blocking(move || {
        let _guard = guard;
        let db_name = cell.state.read().expect("session lock").database.clone();
        let db = database(&state, &db_name)?;
        match f(&base.trace, &db, state.client.as_ref()) {
            Ok((next, diff)) => {
                let v = state.store.push_version(&cell, origin, next, Some(diff)).map_err(ApiError::internal)?;
                Ok(version_response(&v, &db))
            }
            Err(RefineError::Pipeline(e)) => failed_run(&state, &cell, origin, Some(&base.trace), &e),
            Err(e) => Err(refine_error(e)),
        }
    })
    .await?
}

async fn correct_step(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<CorrectionRequest>,
) -> ApiResult<Response> {
    let origin = Origin::Correction { request: req.clone() };
    mutate(state, id, origin, move |t, db, c| correct(t, &req, db, c)).await
}

#[derive(Deserialize)]
struct Promote {
    alternative: String,
}

async fn promote(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<Promote>,
) -> ApiResult<Response> {
    let origin = Origin::Promotion { alternative: body.alternative.clone() };
    mutate(state, id, origin, move |t, _, _| promote_alternative(t, &body.alternative)).await
}

#[derive(Deserialize)]
struct ExportQuery {
    kind: String,
    version: Option<u32>,
}

async fn export(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    if q.kind != "vql" && q.kind != "chart-spec" {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_request", format!("unknown export kind {:?}", q.kind)));
    }
    let cell = session(&state, &id)?;
    let v = pick_version(&cell, q.version)?;
    let db_name = cell.state.read().expect("session lock").database.clone();
    let st = state.clone();
    blocking(move || {
        let db = database(&st, &db_name)?;
        let exec = |msg: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "execution", msg);
        if q.kind == "vql" {
            let query = v.trace.query().map_err(|e| exec(e.to_string()))?;
            return Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], canonicalize(&query)).into_response());
        }
        let query = v.trace.query().map_err(|e| exec(e.to_string()))?;
        let result = execute(&query, &db).map_err(|e| exec(e.to_string()))?;
        let doc = emit_chart(&query, &result).map_err(|e| exec(e.to_string()))?;
        Ok(([(header::CONTENT_TYPE, "application/json")], doc.to_json_string()).into_response())
    })
    .await?
}
