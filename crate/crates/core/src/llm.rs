//! Blocking chat-completion client with retry and a request-rate ceiling.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    /// Network, authentication or server failure after retries.
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    /// Empty or policy-blocked reply.
    #[error("backend refused: {0}")]
    Refusal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: ChatRole, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub backoff_multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff_ms: 500,
            backoff_multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    pub fn delay_before(&self, attempt: u32) -> Duration {
        let factor = self.backoff_multiplier.powi(attempt.saturating_sub(1) as i32);
        Duration::from_millis((self.initial_backoff_ms as f64 * factor) as u64)
    }
}

/// Endpoint settings, as they appear in the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatEndpoint {
    /// Full URL of the chat-completions resource.
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Ceiling on requests per minute across all threads; `None` disables it.
    #[serde(default)]
    pub max_requests_per_minute: Option<u32>,
    /// Extra top-level request fields (temperature, max_tokens, ...).
    #[serde(default)]
    pub params: Map<String, Value>,
}

fn default_api_key_env() -> String {
    "OPENAI_API_KEY".to_string()
}

fn default_timeout_secs() -> u64 {
    120
}

impl ChatEndpoint {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        ChatEndpoint {
            url: url.into(),
            model: model.into(),
            api_key_env: default_api_key_env(),
            timeout_secs: default_timeout_secs(),
            retry: RetryPolicy::default(),
            max_requests_per_minute: None,
            params: Map::new(),
        }
    }
}

/// Spaces request starts at least `interval` apart.
#[derive(Debug)]
struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn new(per_minute: u32) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(60.0 / per_minute.max(1) as f64),
            next_slot: Mutex::new(None),
        }
    }

    fn acquire(&self) {
        let wait = {
            let mut slot = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let start = slot.map_or(now, |s| s.max(now));
            *slot = Some(start + self.interval);
            start.saturating_duration_since(now)
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// A structured tool the model is forced to call; its arguments are returned.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub parameters: Value,
}

#[derive(Debug)]
pub struct ChatClient {
    endpoint: ChatEndpoint,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
    limiter: Option<RateLimiter>,
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl ChatClient {
    /// Builds a client, reading the API key from the configured variable.
    /// A missing key is not an error here: local endpoints often need none.
    pub fn new(endpoint: ChatEndpoint) -> Result<Self, BackendError> {
        let api_key = std::env::var(&endpoint.api_key_env).ok();
        Self::with_api_key(endpoint, api_key)
    }

    pub fn with_api_key(
        endpoint: ChatEndpoint,
        api_key: Option<String>,
    ) -> Result<Self, BackendError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let limiter = endpoint.max_requests_per_minute.map(RateLimiter::new);
        Ok(ChatClient {
            endpoint,
            api_key,
            http,
            limiter,
        })
    }

    pub fn endpoint(&self) -> &ChatEndpoint {
        &self.endpoint
    }

    pub fn request_body(&self, messages: &[ChatMessage], tool: Option<&ToolSpec>) -> Value {
        let mut body = Map::new();
        body.insert("model".into(), json!(self.endpoint.model));
        body.insert("messages".into(), json!(messages));
        for (k, v) in &self.endpoint.params {
            body.insert(k.clone(), v.clone());
        }
        if let Some(tool) = tool {
            body.insert(
                "tools".into(),
                json!([{
                    "type": "function",
                    "function": {
                        "name": tool.name,
                        "description": tool.description,
                        "parameters": tool.parameters,
                    }
                }]),
            );
            body.insert(
                "tool_choice".into(),
                json!({"type": "function", "function": {"name": tool.name}}),
            );
        }
        Value::Object(body)
    }

    /// Plain completion: returns the assistant message text.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let response = self.send(&self.request_body(messages, None))?;
        extract_content(&response)
    }

    /// Forced tool call: returns the parsed argument object. Falls back to the
    /// message content when the server ignores tools but answers in JSON.
    pub fn call_tool(&self, messages: &[ChatMessage], tool: &ToolSpec) -> Result<Value, BackendError> {
        let response = self.send(&self.request_body(messages, Some(tool)))?;
        extract_tool_arguments(&response)
    }

    fn send(&self, body: &Value) -> Result<Value, BackendError> {
        let attempts = self.endpoint.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                std::thread::sleep(self.endpoint.retry.delay_before(attempt - 1));
            }
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            match self.attempt(body) {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::warn!("chat request attempt {attempt}/{attempts} failed: {msg}");
                    last = msg;
                }
            }
        }
        Err(BackendError::Unavailable(format!(
            "{attempts} attempts failed, last error: {last}"
        )))
    }

    fn attempt(&self, body: &Value) -> Result<Value, Attempt> {
        let mut req = self.http.post(&self.endpoint.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Retry(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(BackendError::Unavailable(format!(
                "HTTP {status}: {text}"
            ))));
        }
        serde_json::from_str(&text)
            .map_err(|e| Attempt::Retry(format!("malformed response body: {e}")))
    }
}

fn first_choice(response: &Value) -> Result<&Value, BackendError> {
    let choice = response
        .pointer("/choices/0")
        .ok_or_else(|| BackendError::Refusal("response has no choices".into()))?;
    if choice.get("finish_reason").and_then(Value::as_str) == Some("content_filter") {
        return Err(BackendError::Refusal("content filtered".into()));
    }
    Ok(choice)
}

pub fn extract_content(response: &Value) -> Result<String, BackendError> {
    let choice = first_choice(response)?;
    if let Some(refusal) = choice.pointer("/message/refusal").and_then(Value::as_str) {
        return Err(BackendError::Refusal(refusal.to_string()));
    }
    let content = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .trim();
    if content.is_empty() {
        return Err(BackendError::Refusal("empty reply".into()));
    }
    Ok(content.to_string())
}

pub fn extract_tool_arguments(response: &Value) -> Result<Value, BackendError> {
    let choice = first_choice(response)?;
    let raw = choice
        .pointer("/message/tool_calls/0/function/arguments")
        .and_then(Value::as_str)
        .map(str::to_string)
        .or_else(|| {
            choice
                .pointer("/message/content")
                .and_then(Value::as_str)
                .map(|s| s.trim().trim_start_matches("```json").trim_matches('`').trim().to_string())
        })
        .ok_or_else(|| BackendError::Refusal("no tool call in reply".into()))?;
    serde_json::from_str(&raw).map_err(|e| BackendError::Refusal(format!("tool arguments: {e}")))
}

/// Minimal single-threaded HTTP server returning canned chat-completion
/// bodies, for exercising [`ChatClient`] without a network.
#[doc(hidden)]
pub mod testing {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};
    use std::thread::JoinHandle;

    pub struct CannedServer {
        pub url: String,
        pub requests: Arc<Mutex<Vec<String>>>,
        _handle: JoinHandle<()>,
    }

    /// Serves `responses` (status, body) in order, one per connection.
    pub fn serve(responses: Vec<(u16, String)>) -> CannedServer {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = requests.clone();
        let handle = std::thread::spawn(move || {
            for (status, body) in responses {
                let Ok((mut stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut length = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        length = v.trim().parse().unwrap_or(0);
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0u8; length];
                let _ = reader.read_exact(&mut buf);
                seen.lock().unwrap().push(String::from_utf8_lossy(&buf).into_owned());
                let reply = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        CannedServer {
            url,
            requests,
            _handle: handle,
        }
    }

    pub fn completion_body(content: &str) -> String {
        serde_json::json!({
            "choices": [{"index": 0, "finish_reason": "stop",
                         "message": {"role": "assistant", "content": content}}]
        })
        .to_string()
    }

    pub fn tool_call_body(arguments: &serde_json::Value) -> String {
        serde_json::json!({
            "choices": [{"index": 0, "finish_reason": "tool_calls",
                         "message": {"role": "assistant", "content": null,
                                     "tool_calls": [{"id": "c1", "type": "function",
                                                     "function": {"name": "f", "arguments": arguments.to_string()}}]}}]
        })
        .to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;

    fn fast(url: &str) -> ChatEndpoint {
        let mut e = ChatEndpoint::new(url, "test-model");
        e.retry.initial_backoff_ms = 1;
        e.timeout_secs = 5;
        e
    }

    #[test]
    fn canned_reply_is_returned() {
        let server = serve(vec![(200, completion_body("canned hello"))]);
        let client = ChatClient::with_api_key(fast(&server.url), Some("k".into())).unwrap();
        let out = client
            .complete(&[ChatMessage::new(ChatRole::System, "sys"), ChatMessage::new(ChatRole::User, "hi")])
            .unwrap();
        assert_eq!(out, "canned hello");
        let req: Value = serde_json::from_str(&server.requests.lock().unwrap()[0]).unwrap();
        assert_eq!(req["model"], "test-model");
        assert_eq!(req["messages"][0]["role"], "system");
        assert_eq!(req["messages"][1]["content"], "hi");
    }

    #[test]
    fn transient_failures_are_retried() {
        let server = serve(vec![
            (500, "{}".into()),
            (429, "{}".into()),
            (200, completion_body("third time")),
        ]);
        let client = ChatClient::with_api_key(fast(&server.url), None).unwrap();
        assert_eq!(client.complete(&[]).unwrap(), "third time");
        assert_eq!(server.requests.lock().unwrap().len(), 3);
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let server = serve(vec![(503, "{}".into()), (503, "{}".into()), (503, "{}".into())]);
        let client = ChatClient::with_api_key(fast(&server.url), None).unwrap();
        assert!(matches!(client.complete(&[]), Err(BackendError::Unavailable(_))));
    }

    #[test]
    fn auth_failure_is_not_retried() {
        let server = serve(vec![(401, "{\"error\":\"bad key\"}".into())]);
        let client = ChatClient::with_api_key(fast(&server.url), None).unwrap();
        assert!(matches!(client.complete(&[]), Err(BackendError::Unavailable(_))));
        assert_eq!(server.requests.lock().unwrap().len(), 1);
    }

    #[test]
    fn empty_reply_is_refusal() {
        let server = serve(vec![(200, completion_body("   "))]);
        let client = ChatClient::with_api_key(fast(&server.url), None).unwrap();
        assert!(matches!(client.complete(&[]), Err(BackendError::Refusal(_))));
    }

    #[test]
    fn tool_arguments_are_parsed() {
        let args = json!({"state": "offer", "price": 80});
        let server = serve(vec![(200, tool_call_body(&args))]);
        let client = ChatClient::with_api_key(fast(&server.url), None).unwrap();
        let tool = ToolSpec {
            name: "f".into(),
            description: "d".into(),
            parameters: json!({"type": "object"}),
        };
        assert_eq!(client.call_tool(&[], &tool).unwrap(), args);
        let req: Value = serde_json::from_str(&server.requests.lock().unwrap()[0]).unwrap();
        assert_eq!(req["tool_choice"]["function"]["name"], "f");
    }

    #[test]
    fn content_json_fallback() {
        let resp: Value = serde_json::from_str(&completion_body("```json\n{\"state\":\"accept\"}\n```")).unwrap();
        assert_eq!(extract_tool_arguments(&resp).unwrap(), json!({"state": "accept"}));
    }

    #[test]
    fn backoff_grows() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay_before(1), Duration::from_millis(500));
        assert_eq!(p.delay_before(2), Duration::from_millis(1000));
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let limiter = RateLimiter::new(1200); // 50ms apart
        let start = Instant::now();
        for _ in 0..3 {
            limiter.acquire();
        }
        assert!(start.elapsed() >= Duration::from_millis(95));
    }
}
