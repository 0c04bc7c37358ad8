//! Thin HTTP adapters for hosted chat, search and embedding services.
//!
//! All three share one transport: JSON over HTTP POST with a bearer token,
//! a bounded timeout, a token-bucket rate limit and exponential backoff on
//! retriable failures (429, 5xx, timeouts, connection errors).

use std::marker::PhantomData;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::Utc;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::domain::{SearchContext, Snippet};
use crate::error::{ToolError, ToolErrorKind};
use crate::scalar::Scalar;
use crate::vector::normalize_in_place;

use super::{CallDigest, ChatModel, Embedder, SearchProvider};

pub const CHAT_KEY_VAR: &str = "KWGEN_CHAT_API_KEY";
pub const SEARCH_KEY_VAR: &str = "KWGEN_SEARCH_API_KEY";
pub const EMBED_KEY_VAR: &str = "KWGEN_EMBED_API_KEY";

static REQUESTS_SENT: AtomicUsize = AtomicUsize::new(0);

/// Number of HTTP requests issued by any remote client in this process.
pub fn requests_sent() -> usize {
    REQUESTS_SENT.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1 << attempt.min(16))
    }
}

/// Token bucket: `burst` tokens, refilled continuously at `refill_per_sec`.
#[derive(Debug)]
pub struct TokenBucket {
    burst: f64,
    refill_per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub const DEFAULT_BURST: u32 = 5;

    pub fn new(burst: u32, refill_per_sec: f64) -> Self {
        let burst = f64::from(burst.max(1));
        TokenBucket {
            burst,
            refill_per_sec: refill_per_sec.max(f64::MIN_POSITIVE),
            state: Mutex::new((burst, Instant::now())),
        }
    }

    /// Takes a token if one is available, otherwise reports how long to wait.
    pub fn try_acquire(&self) -> Result<(), Duration> {
        let mut guard = self.state.lock().expect("token bucket poisoned");
        let (tokens, last) = &mut *guard;
        let now = Instant::now();
        *tokens = (*tokens + now.duration_since(*last).as_secs_f64() * self.refill_per_sec)
            .min(self.burst);
        *last = now;
        if *tokens >= 1.0 {
            *tokens -= 1.0;
            Ok(())
        } else {
            Err(Duration::from_secs_f64((1.0 - *tokens) / self.refill_per_sec))
        }
    }

    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire() {
            std::thread::sleep(wait);
        }
    }
}

impl Default for TokenBucket {
    fn default() -> Self {
        Self::new(Self::DEFAULT_BURST, 2.0)
    }
}

/// Shared HTTP plumbing for one endpoint.
#[derive(Debug)]
pub struct HttpTransport {
    tool: &'static str,
    url: String,
    api_key: String,
    client: reqwest::blocking::Client,
    retry: RetryPolicy,
    bucket: TokenBucket,
    audit: Mutex<Vec<CallDigest>>,
}

impl HttpTransport {
    pub fn new(
        tool: &'static str,
        url: impl Into<String>,
        api_key: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, ToolError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ToolError::new(tool, ToolErrorKind::Config, e.to_string()))?;
        Ok(HttpTransport {
            tool,
            url: url.into(),
            api_key: api_key.into(),
            client,
            retry: RetryPolicy::default(),
            bucket: TokenBucket::default(),
            audit: Mutex::new(Vec::new()),
        })
    }

    /// Reads the API key from `var`; a missing key is a configuration error.
    pub fn from_env(
        tool: &'static str,
        url: impl Into<String>,
        var: &str,
        timeout: Duration,
    ) -> Result<Self, ToolError> {
        let key = std::env::var(var).map_err(|_| {
            ToolError::new(tool, ToolErrorKind::Config, format!("environment variable {var} is not set"))
        })?;
        Self::new(tool, url, key, timeout)
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limit(mut self, bucket: TokenBucket) -> Self {
        self.bucket = bucket;
        self
    }

    fn post_once(&self, body: &str) -> Result<Value, ToolError> {
        self.bucket.acquire();
        REQUESTS_SENT.fetch_add(1, Ordering::SeqCst);
        let response = self
            .client
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string())
            .send()
            .map_err(|e| self.transport_error(e))?;
        let status = response.status();
        let text = response.text().map_err(|e| self.transport_error(e))?;
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(ToolError::new(self.tool, ToolErrorKind::Auth, format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(ToolError::new(
                self.tool,
                ToolErrorKind::Status(status.as_u16()),
                format!("HTTP {status}: {}", truncate(&text, 200)),
            ));
        }
        self.audit.lock().expect("audit log poisoned").push(CallDigest {
            tool: self.tool.to_string(),
            request_sha256: sha256_hex(body),
            response_sha256: sha256_hex(&text),
        });
        serde_json::from_str(&text).map_err(|e| {
            ToolError::new(self.tool, ToolErrorKind::Schema, format!("response is not JSON: {e}"))
        })
    }

    fn transport_error(&self, e: reqwest::Error) -> ToolError {
        let kind = if e.is_timeout() {
            ToolErrorKind::Timeout
        } else {
            ToolErrorKind::Transport
        };
        ToolError::new(self.tool, kind, e.to_string())
    }

    /// POSTs `payload`, retrying retriable failures with exponential backoff.
    pub fn post_json<T: Serialize>(&self, payload: &T) -> Result<Value, ToolError> {
        let body = serde_json::to_string(payload)
            .map_err(|e| ToolError::new(self.tool, ToolErrorKind::Schema, e.to_string()))?;
        let mut attempt = 0;
        loop {
            match self.post_once(&body) {
                Ok(v) => return Ok(v),
                Err(e) if e.retriable && attempt + 1 < self.retry.attempts => {
                    tracing::warn!(tool = self.tool, attempt, error = %e, "retrying");
                    std::thread::sleep(self.retry.delay(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn audit_trail(&self) -> Vec<CallDigest> {
        self.audit.lock().expect("audit log poisoned").clone()
    }

    fn schema_error(&self, message: impl Into<String>) -> ToolError {
        ToolError::new(self.tool, ToolErrorKind::Schema, message)
    }
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Chat client for hosted models speaking the common
/// `{"model", "messages": [{role, content}], "temperature"}` schema.
#[derive(Debug)]
pub struct RemoteChat {
    transport: HttpTransport,
    model: String,
}

impl RemoteChat {
    pub fn new(transport: HttpTransport, model: impl Into<String>) -> Self {
        RemoteChat {
            transport,
            model: model.into(),
        }
    }
}

/// Pulls `choices[0].message.content` out of a completion payload.
pub fn extract_completion_text(payload: &Value) -> Option<String> {
    payload
        .get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

impl ChatModel for RemoteChat {
    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, ToolError> {
        let payload = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        });
        let reply = self.transport.post_json(&payload)?;
        extract_completion_text(&reply)
            .ok_or_else(|| self.transport.schema_error("missing choices[0].message.content"))
    }

    fn audit_trail(&self) -> Vec<CallDigest> {
        self.transport.audit_trail()
    }
}

/// Search client posting `{"query", "max_results"}` and reading
/// `{"results": [{"source_id"|"url"|"link", "text"|"snippet"}]}`.
#[derive(Debug)]
pub struct RemoteSearch {
    transport: HttpTransport,
}

impl RemoteSearch {
    pub fn new(transport: HttpTransport) -> Self {
        RemoteSearch { transport }
    }
}

impl SearchProvider for RemoteSearch {
    fn search(&self, query: &str, max_results: usize) -> Result<SearchContext, ToolError> {
        let reply = self
            .transport
            .post_json(&json!({"query": query, "max_results": max_results}))?;
        let results = reply
            .get("results")
            .and_then(Value::as_array)
            .ok_or_else(|| self.transport.schema_error("missing results array"))?;
        let now = Utc::now();
        let mut snippets = Vec::new();
        for (i, item) in results.iter().take(max_results).enumerate() {
            let text = ["text", "snippet"]
                .iter()
                .find_map(|k| item.get(*k).and_then(Value::as_str))
                .ok_or_else(|| self.transport.schema_error(format!("result {i} has no text")))?;
            if text.trim().is_empty() {
                continue;
            }
            let source_id = ["source_id", "url", "link"]
                .iter()
                .find_map(|k| item.get(*k).and_then(Value::as_str))
                .map_or_else(|| format!("result#{i}"), str::to_string);
            snippets.push(Snippet {
                source_id,
                text: text.to_string(),
                retrieved_at: now,
            });
        }
        SearchContext::new(query, snippets).map_err(|e| self.transport.schema_error(e.to_string()))
    }

    fn audit_trail(&self) -> Vec<CallDigest> {
        self.transport.audit_trail()
    }
}

/// Embedding client posting `{"model", "input": [texts]}` and reading
/// `{"data": [{"embedding": [...], "index": i}]}`. Vectors are L2-normalized
/// on arrival so the unit-norm contract holds regardless of the service.
#[derive(Debug)]
pub struct RemoteEmbed<S = f64> {
    transport: HttpTransport,
    model: String,
    dim: usize,
    _scalar: PhantomData<S>,
}

impl<S: Scalar> RemoteEmbed<S> {
    pub fn new(transport: HttpTransport, model: impl Into<String>, dim: usize) -> Self {
        RemoteEmbed {
            transport,
            model: model.into(),
            dim,
            _scalar: PhantomData,
        }
    }
}

impl<S: Scalar> Embedder<S> for RemoteEmbed<S> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<S>>, ToolError> {
        let reply = self
            .transport
            .post_json(&json!({"model": self.model, "input": texts}))?;
        let data = reply
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| self.transport.schema_error("missing data array"))?;
        if data.len() != texts.len() {
            return Err(self.transport.schema_error(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                data.len()
            )));
        }
        let mut out: Vec<Option<Vec<S>>> = vec![None; texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let idx = item
                .get("index")
                .and_then(Value::as_u64)
                .map_or(pos, |i| i as usize);
            let raw = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| self.transport.schema_error(format!("item {pos} has no embedding")))?;
            let mut v: Vec<S> = raw
                .iter()
                .map(|x| x.as_f64().map(S::from_f64_lossy))
                .collect::<Option<_>>()
                .ok_or_else(|| self.transport.schema_error("non-numeric embedding component"))?;
            if v.len() != self.dim {
                return Err(self.transport.schema_error(format!(
                    "embedding dimension {} != configured {}",
                    v.len(),
                    self.dim
                )));
            }
            if !normalize_in_place(&mut v) {
                return Err(self.transport.schema_error("zero embedding"));
            }
            let slot = out
                .get_mut(idx)
                .ok_or_else(|| self.transport.schema_error(format!("index {idx} out of range")))?;
            *slot = Some(v);
        }
        out.into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| self.transport.schema_error("duplicate embedding index"))
    }

    fn audit_trail(&self) -> Vec<CallDigest> {
        self.transport.audit_trail()
    }
}
