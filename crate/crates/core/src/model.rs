//! Chat-model contract shared by the reasoning pipeline, the corpus builder
//! and the refinement engine, plus a scripted backend that replays canned
//! responses.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// One completion request. `purpose` tags the call site (`stage:S3`,
/// `sample-columns`, ...); it takes part in the digest but is not sent to
/// HTTP backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub purpose: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(purpose: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        ChatRequest {
            purpose: purpose.into(),
            messages,
            temperature: 0.0,
        }
    }

    /// Hex SHA-256 of the request's JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("request serializes");
        let hash = Sha256::digest(&bytes);
        let mut out = String::with_capacity(64);
        for b in hash {
            let _ = write!(out, "{:02x}", b);
        }
        out
    }

    /// All message text joined, for substring matching.
    pub fn text(&self) -> String {
        let mut s = String::new();
        for m in &self.messages {
            s.push_str(&m.content);
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("no scripted response for {purpose} request {digest}")]
    ScriptMiss { purpose: String, digest: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
}

/// A chat-completion backend. Implementations must tolerate concurrent calls.
pub trait ModelClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

impl<T: ModelClient + ?Sized> ModelClient for &T {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<T: ModelClient + ?Sized> ModelClient for alloc::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Substring rule for scripted responses.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    /// Exact purpose tag, when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
    /// Every string must occur somewhere in the request text.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    /// No string may occur in the request text.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub absent: Vec<String>,
}

impl ScriptRule {
    fn matches(&self, req: &ChatRequest, text: &str) -> bool {
        self.purpose.as_ref().is_none_or(|p| *p == req.purpose)
            && self.contains.iter().all(|c| text.contains(c.as_str()))
            && !self.absent.iter().any(|c| text.contains(c.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<ScriptRule>,
    pub response: String,
}

/// Fixture file layout for [`ScriptedClient`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptFixture {
    pub entries: Vec<ScriptEntry>,
}

/// Replays canned responses. A request is answered by the entry whose
/// `digest` equals the request digest; failing that, by the first entry
/// whose `when` rule matches. Unanswerable requests are a
/// [`BackendError::ScriptMiss`].
#[derive(Debug, Clone, Default)]
pub struct ScriptedClient {
    fixture: ScriptFixture,
}

impl ScriptedClient {
    pub fn new(fixture: ScriptFixture) -> Self {
        ScriptedClient { fixture }
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        Ok(ScriptedClient::new(serde_json::from_str(json)?))
    }

    pub fn fixture(&self) -> &ScriptFixture {
        &self.fixture
    }

    pub fn push_digest(&mut self, digest: impl Into<String>, response: impl Into<String>) {
        self.fixture.entries.push(ScriptEntry {
            note: None,
            digest: Some(digest.into()),
            when: None,
            response: response.into(),
        });
    }

    pub fn push_rule(&mut self, rule: ScriptRule, response: impl Into<String>) {
        self.fixture.entries.push(ScriptEntry {
            note: None,
            digest: None,
            when: Some(rule),
            response: response.into(),
        });
    }
}

impl ModelClient for ScriptedClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let digest = request.digest();
        if let Some(e) = self
            .fixture
            .entries
            .iter()
            .find(|e| e.digest.as_deref() == Some(digest.as_str()))
        {
            return Ok(e.response.clone());
        }
        let text = request.text();
        self.fixture
            .entries
            .iter()
            .find(|e| e.when.as_ref().is_some_and(|r| r.matches(request, &text)))
            .map(|e| e.response.clone())
            .ok_or_else(|| BackendError::ScriptMiss {
                purpose: request.purpose.to_string(),
                digest,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn req(text: &str) -> ChatRequest {
        ChatRequest::new("stage:S1", vec![ChatMessage::user(text)])
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = req("hello");
        assert_eq!(a.digest(), req("hello").digest());
        assert_ne!(a.digest(), req("hello!").digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn digest_entries_win_over_rules() {
        let mut c = ScriptedClient::default();
        c.push_rule(
            ScriptRule {
                contains: vec!["hello".into()],
                ..Default::default()
            },
            "rule",
        );
        c.push_digest(req("hello").digest(), "pinned");
        assert_eq!(c.complete(&req("hello")).unwrap(), "pinned");
        assert_eq!(c.complete(&req("hello there")).unwrap(), "rule");
        assert!(matches!(
            c.complete(&req("bye")),
            Err(BackendError::ScriptMiss { .. })
        ));
    }

    #[test]
    fn purpose_and_absent_filter() {
        let mut c = ScriptedClient::default();
        c.push_rule(
            ScriptRule {
                purpose: Some("stage:S2".into()),
                ..Default::default()
            },
            "s2",
        );
        c.push_rule(
            ScriptRule {
                absent: vec!["skip".into()],
                ..Default::default()
            },
            "fallback",
        );
        assert_eq!(c.complete(&req("x")).unwrap(), "fallback");
        assert!(c.complete(&req("skip me")).is_err());
        let r = ChatRequest::new("stage:S2", vec![ChatMessage::user("skip")]);
        assert_eq!(c.complete(&r).unwrap(), "s2");
    }
}
