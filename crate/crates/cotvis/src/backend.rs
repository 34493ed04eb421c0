//! Model backends: the scripted fixture client, an OpenAI-compatible HTTP
//! client, and a wrapper bounding concurrent requests.

use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use cotvis_core::model::{BackendError, ChatRequest, ModelClient, ScriptedClient};
use serde::Deserialize;
use serde_json::json;

pub fn load_scripted(path: &Path) -> anyhow::Result<ScriptedClient> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    ScriptedClient::from_json(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Chat-completions client. `url` is either the full endpoint or a base
/// URL to which `/chat/completions` is appended.
pub struct HttpClient {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl HttpClient {
    pub fn new(url: &str, model: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let url = url.trim_end_matches('/');
        let endpoint = if url.ends_with("/chat/completions") {
            url.to_string()
        } else {
            format!("{url}/chat/completions")
        };
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpClient { agent, endpoint, model: model.into(), api_key: api_key.filter(|k| !k.is_empty()) }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl ModelClient for HttpClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": request.messages,
            "temperature": request.temperature,
        });
        let mut req = self.agent.post(&self.endpoint);
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Status { status, body: text });
        }
        let parsed: Completion = serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed("no message content in first choice".into()))
    }
}

/// Lets at most `limit` requests reach the inner client at once; callers
/// beyond that block until a slot frees up.
pub struct Bounded {
    inner: Arc<dyn ModelClient>,
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl Bounded {
    pub fn new(inner: Arc<dyn ModelClient>, limit: usize) -> Self {
        Bounded { inner, limit: limit.max(1), in_flight: Mutex::new(0), freed: Condvar::new() }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }
}

struct Slot<'a>(&'a Bounded);

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("in-flight lock") -= 1;
        self.0.freed.notify_one();
    }
}

impl ModelClient for Bounded {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let mut n = self.in_flight.lock().expect("in-flight lock");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("in-flight lock");
        }
        *n += 1;
        drop(n);
        let _slot = Slot(self);
        self.inner.complete(request)
    }
}

/// Parses `scripted:<fixture>` or `http:<url>` (a bare `http://` or
/// `https://` URL is accepted too).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Scripted(std::path::PathBuf),
    Http(String),
}

impl std::str::FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(p) = s.strip_prefix("scripted:") {
            return Ok(BackendSpec::Scripted(p.into()));
        }
        if s.starts_with("https://") || s.starts_with("http://") {
            return Ok(BackendSpec::Http(s.to_string()));
        }
        if let Some(rest) = s.strip_prefix("http:") {
            return Ok(BackendSpec::Http(if rest.starts_with("//") { format!("http:{rest}") } else { rest.to_string() }));
        }
        Err(format!("backend must be scripted:<fixture> or http:<url>, got {s:?}"))
    }
}

/// Settings for an HTTP backend, usually read from the environment.
#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpSettings {
    /// `NLVIS_MODEL` (default `gpt-4o-mini`), `NLVIS_API_KEY`,
    /// `NLVIS_TIMEOUT_SECS` (default 120).
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        HttpSettings {
            model: var("NLVIS_MODEL").unwrap_or_else(|| "gpt-4o-mini".into()),
            api_key: var("NLVIS_API_KEY"),
            timeout: Duration::from_secs(var("NLVIS_TIMEOUT_SECS").and_then(|v| v.parse().ok()).unwrap_or(120)),
        }
    }
}

pub fn open_backend(spec: &BackendSpec, http: &HttpSettings) -> anyhow::Result<Arc<dyn ModelClient>> {
    Ok(match spec {
        BackendSpec::Scripted(p) => Arc::new(load_scripted(p)?),
        BackendSpec::Http(url) => Arc::new(HttpClient::new(url, http.model.clone(), http.api_key.clone(), http.timeout)),
    })
}
