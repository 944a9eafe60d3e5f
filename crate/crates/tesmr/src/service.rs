//! HTTP clients for OpenAI-compatible chat-completion and embedding services.

use std::path::PathBuf;
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const ENV_LLM_URL: &str = "TESMR_LLM_URL";
pub const ENV_LLM_KEY: &str = "TESMR_LLM_KEY";
pub const ENV_LLM_MODEL: &str = "TESMR_LLM_MODEL";
pub const ENV_EMB_URL: &str = "TESMR_EMB_URL";

/// One text-generation request: a prompt and an optional image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationRequest {
    pub prompt: String,
    pub image: Option<PathBuf>,
}

pub trait TextGenerator: Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<String>;
}

fn endpoint(base: &str, path: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with(path) {
        base.to_string()
    } else {
        format!("{base}{path}")
    }
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::AgentBuilder::new().timeout(timeout).build()
}

fn post(agent: &ureq::Agent, url: &str, key: Option<&str>, body: &Value) -> Result<Value> {
    let mut req = agent.post(url).set("Content-Type", "application/json");
    if let Some(k) = key {
        req = req.set("Authorization", &format!("Bearer {k}"));
    }
    match req.send_json(body) {
        Ok(resp) => resp
            .into_json::<Value>()
            .map_err(|e| Error::Service(format!("{url}: invalid JSON response: {e}"))),
        Err(ureq::Error::Status(code, resp)) => {
            let text = resp.into_string().unwrap_or_default();
            Err(Error::Service(format!("{url}: HTTP {code}: {}", text.trim())))
        }
        Err(e) => Err(Error::Service(format!("{url}: {e}"))),
    }
}

fn image_mime(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        _ => "image/jpeg",
    }
}

/// Chat-completion client. Requests carry `{model, messages, temperature}`;
/// images travel as base64 `image_url` content parts.
#[derive(Debug, Clone)]
pub struct ChatClient {
    pub url: String,
    pub key: Option<String>,
    pub model: String,
    pub temperature: f64,
    agent: ureq::Agent,
}

impl ChatClient {
    pub fn new(base_url: &str, key: Option<String>, model: &str, temperature: f64, timeout: Duration) -> Self {
        Self {
            url: endpoint(base_url, "/chat/completions"),
            key,
            model: model.to_string(),
            temperature,
            agent: agent(timeout),
        }
    }

    /// Reads `TESMR_LLM_URL`, `TESMR_LLM_KEY` and `TESMR_LLM_MODEL`;
    /// `None` when no URL is set.
    pub fn from_env(temperature: f64, timeout: Duration) -> Option<Self> {
        let url = std::env::var(ENV_LLM_URL).ok().filter(|u| !u.is_empty())?;
        let key = std::env::var(ENV_LLM_KEY).ok().filter(|k| !k.is_empty());
        let model = std::env::var(ENV_LLM_MODEL).unwrap_or_else(|_| "default".into());
        Some(Self::new(&url, key, &model, temperature, timeout))
    }

    pub fn request_body(&self, request: &GenerationRequest) -> Result<Value> {
        let content = match &request.image {
            None => Value::String(request.prompt.clone()),
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
                let data = base64::engine::general_purpose::STANDARD.encode(bytes);
                json!([
                    {"type": "text", "text": request.prompt},
                    {"type": "image_url", "image_url": {"url": format!("data:{};base64,{data}", image_mime(path))}}
                ])
            }
        };
        Ok(json!({
            "model": self.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": self.temperature,
        }))
    }
}

impl TextGenerator for ChatClient {
    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        let body = self.request_body(request)?;
        let resp = post(&self.agent, &self.url, self.key.as_deref(), &body)?;
        let text = resp
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Service(format!("{}: response has no choices[0].message.content", self.url)))?;
        Ok(text.to_string())
    }
}

/// Embedding client: POST `{model, input: [texts]}`. Accepts either the
/// OpenAI shape (`data[i].embedding`) or a bare `embeddings` array.
#[derive(Debug, Clone)]
pub struct EmbeddingClient {
    pub url: String,
    pub key: Option<String>,
    pub model: String,
    agent: ureq::Agent,
}

impl EmbeddingClient {
    pub fn new(base_url: &str, key: Option<String>, model: &str, timeout: Duration) -> Self {
        Self {
            url: endpoint(base_url, "/embeddings"),
            key,
            model: model.to_string(),
            agent: agent(timeout),
        }
    }

    pub fn from_env(model: &str, timeout: Duration) -> Option<Self> {
        let url = std::env::var(ENV_EMB_URL).ok().filter(|u| !u.is_empty())?;
        let key = std::env::var(ENV_LLM_KEY).ok().filter(|k| !k.is_empty());
        Some(Self::new(&url, key, model, timeout))
    }

    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
        let body = json!({"model": self.model, "input": texts});
        let resp = post(&self.agent, &self.url, self.key.as_deref(), &body)?;
        let bad = |what: &str| Error::Service(format!("{}: {what}", self.url));
        let rows: Vec<&Value> = if let Some(data) = resp.get("data").and_then(Value::as_array) {
            let mut items: Vec<(u64, &Value)> = data
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let idx = d.get("index").and_then(Value::as_u64).unwrap_or(i as u64);
                    (idx, d.get("embedding").unwrap_or(&Value::Null))
                })
                .collect();
            items.sort_by_key(|(i, _)| *i);
            items.into_iter().map(|(_, v)| v).collect()
        } else if let Some(e) = resp.get("embeddings").and_then(Value::as_array) {
            e.iter().collect()
        } else {
            return Err(bad("response has neither `data` nor `embeddings`"));
        };
        if rows.len() != texts.len() {
            return Err(bad(&format!("{} vectors for {} inputs", rows.len(), texts.len())));
        }
        rows.into_iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| bad("embedding is not an array"))?
                    .iter()
                    .map(|x| x.as_f64().map(|v| v as f32).ok_or_else(|| bad("non-numeric embedding value")))
                    .collect()
            })
            .collect()
    }
}

/// Attempts and exponential backoff for service calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: usize,
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_backoff: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    /// Runs `f` until it succeeds or attempts run out; sleeps
    /// `base · 2^i` after the i-th failure. Returns the last error.
    pub fn run<T>(&self, mut f: impl FnMut() -> Result<T>) -> Result<T> {
        let mut last = None;
        for i in 0..self.attempts.max(1) {
            match f() {
                Ok(v) => return Ok(v),
                Err(e) => last = Some(e),
            }
            if i + 1 < self.attempts {
                std::thread::sleep(self.base_backoff * (1u32 << i.min(16)));
            }
        }
        Err(last.expect("at least one attempt"))
    }
}
