#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use cotvis::load::DbRoot;
use cotvis::server::{router, AppState, SessionStore};
use cotvis_core::cot::PipelineOptions;
use cotvis_core::model::ModelClient;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub fn db_root() -> std::path::PathBuf {
    cotvis_testkit::data_dir().join("db")
}

pub fn state(client: Arc<dyn ModelClient>, store: SessionStore) -> Arc<AppState> {
    Arc::new(AppState {
        dbs: DbRoot::new(db_root()),
        client,
        store,
        pipeline: PipelineOptions::default(),
    })
}

pub fn app(client: impl ModelClient + 'static) -> Router {
    router(state(Arc::new(client), SessionStore::in_memory()))
}

pub fn persistent_app(client: impl ModelClient + 'static, log: &Path) -> Router {
    router(state(Arc::new(client), SessionStore::persistent(log).unwrap()))
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("{e}: {}", self.text()))
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.bytes).into_owned()
    }
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, content_type, bytes }
}

pub async fn new_session(app: &Router, db: &str) -> String {
    let r = call(app, "POST", "/sessions", Some(serde_json::json!({"database": db}))).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    r.json()["id"].as_str().unwrap().to_string()
}

pub fn vega_lite_validator() -> jsonschema::JSONSchema {
    let text = include_str!("../fixtures/vega-lite-v5.21.0.schema.json");
    let schema: Value = serde_json::from_str(text).unwrap();
    jsonschema::JSONSchema::options()
        .with_draft(jsonschema::Draft::Draft7)
        .compile(&schema)
        .expect("schema compiles")
}

pub fn schema_errors(v: &jsonschema::JSONSchema, doc: &Value) -> Vec<String> {
    match v.validate(doc) {
        Ok(()) => Vec::new(),
        Err(errs) => errs.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    }
}
