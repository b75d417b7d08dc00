//! Chat-completion transport: the [`ChatEndpoint`] trait, a replay cassette
//! for hermetic runs, a recorder, and (with the `http` feature) an
//! OpenAI-compatible HTTP client with a shared token-bucket rate limiter.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Request body for `POST {base_url}/chat/completions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn user(model: &str, prompt: String, temperature: f64) -> Self {
        Self {
            model: model.to_owned(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt,
            }],
            temperature,
        }
    }

    /// Hex SHA-256 of the serialized request; the cassette key.
    pub fn sha256(&self) -> String {
        let body = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&body))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EndpointError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("no cassette entry for request {0}")]
    CassetteMiss(String),
    #[error("unexpected response: {0}")]
    InvalidResponse(String),
    #[error("cassette {path}: {message}")]
    Cassette { path: PathBuf, message: String },
}

impl EndpointError {
    /// Transient failures worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            EndpointError::Transport(_) => true,
            EndpointError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait ChatEndpoint: Send + Sync {
    /// Returns the assistant message text of the first choice.
    fn complete(&self, request: &ChatRequest) -> Result<String, EndpointError>;
}

impl<E: ChatEndpoint + ?Sized> ChatEndpoint for &E {
    fn complete(&self, request: &ChatRequest) -> Result<String, EndpointError> {
        (**self).complete(request)
    }
}

impl<E: ChatEndpoint + ?Sized> ChatEndpoint for Box<E> {
    fn complete(&self, request: &ChatRequest) -> Result<String, EndpointError> {
        (**self).complete(request)
    }
}

/// Adapts a closure; handy for scripted endpoints in tests and tools.
pub struct FnEndpoint<F>(pub F);

impl<F> ChatEndpoint for FnEndpoint<F>
where
    F: Fn(&ChatRequest) -> Result<String, EndpointError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, EndpointError> {
        (self.0)(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CassetteEntry {
    pub request_sha256: String,
    pub response_text: String,
}

/// Read-only request-hash to response map.
#[derive(Debug, Clone, Default)]
pub struct ReplayEndpoint {
    entries: HashMap<String, String>,
}

impl ReplayEndpoint {
    pub fn open(path: &Path) -> Result<Self, EndpointError> {
        let file = File::open(path).map_err(|e| EndpointError::Cassette {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Self::from_reader(BufReader::new(file)).map_err(|message| EndpointError::Cassette {
            path: path.to_owned(),
            message,
        })
    }

    pub fn from_reader<R: BufRead>(input: R) -> Result<Self, String> {
        let mut entries = HashMap::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CassetteEntry =
                serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", n + 1))?;
            entries.insert(entry.request_sha256, entry.response_text);
        }
        Ok(Self { entries })
    }

    pub fn from_entries(entries: impl IntoIterator<Item = CassetteEntry>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|e| (e.request_sha256, e.response_text))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ChatEndpoint for ReplayEndpoint {
    fn complete(&self, request: &ChatRequest) -> Result<String, EndpointError> {
        let key = request.sha256();
        self.entries
            .get(&key)
            .cloned()
            .ok_or(EndpointError::CassetteMiss(key))
    }
}

/// Forwards to `inner` and appends every successful exchange to a cassette.
pub struct RecordingEndpoint<E> {
    inner: E,
    sink: Mutex<File>,
}

impl<E: ChatEndpoint> RecordingEndpoint<E> {
    pub fn new(inner: E, cassette: &Path) -> Result<Self, EndpointError> {
        let sink = OpenOptions::new()
            .create(true)
            .append(true)
            .open(cassette)
            .map_err(|e| EndpointError::Cassette {
                path: cassette.to_owned(),
                message: e.to_string(),
            })?;
        Ok(Self {
            inner,
            sink: Mutex::new(sink),
        })
    }
}

impl<E: ChatEndpoint> ChatEndpoint for RecordingEndpoint<E> {
    fn complete(&self, request: &ChatRequest) -> Result<String, EndpointError> {
        let text = self.inner.complete(request)?;
        let line = serde_json::to_string(&CassetteEntry {
            request_sha256: request.sha256(),
            response_text: text.clone(),
        })
        .expect("cassette entry serializes");
        let mut sink = self.sink.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(sink, "{line}")
            .map_err(|e| EndpointError::Transport(format!("cassette write: {e}")))?;
        Ok(text)
    }
}

/// Token bucket shared by all in-flight requests.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_second: f64,
    state: Mutex<(f64, std::time::Instant)>,
}

impl TokenBucket {
    pub fn new(per_second: f64, capacity: f64) -> Self {
        let capacity = capacity.max(1.0);
        Self {
            capacity,
            per_second: per_second.max(f64::MIN_POSITIVE),
            state: Mutex::new((capacity, std::time::Instant::now())),
        }
    }

    /// Blocks until a token is available and takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
                let now = std::time::Instant::now();
                let elapsed = now.duration_since(state.1).as_secs_f64();
                state.0 = (state.0 + elapsed * self.per_second).min(self.capacity);
                state.1 = now;
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                (1.0 - state.0) / self.per_second
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

#[cfg(feature = "http")]
pub use http::HttpEndpoint;

#[cfg(feature = "http")]
mod http {
    use std::time::Duration;

    use serde::Deserialize;

    use super::{ChatEndpoint, ChatRequest, EndpointError, TokenBucket};

    /// OpenAI-compatible `chat/completions` client.
    pub struct HttpEndpoint {
        agent: ureq::Agent,
        url: String,
        api_key: String,
        limiter: TokenBucket,
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
        #[serde(default)]
        content: Option<String>,
    }

    impl HttpEndpoint {
        pub fn new(
            base_url: &str,
            api_key: String,
            requests_per_second: f64,
            timeout: Duration,
        ) -> Self {
            let config = ureq::Agent::config_builder()
                .timeout_global(Some(timeout))
                .http_status_as_error(false)
                .build();
            Self {
                agent: config.into(),
                url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
                api_key,
                limiter: TokenBucket::new(requests_per_second, requests_per_second.ceil()),
            }
        }
    }

    impl ChatEndpoint for HttpEndpoint {
        fn complete(&self, request: &ChatRequest) -> Result<String, EndpointError> {
            self.limiter.acquire();
            let mut response = self
                .agent
                .post(&self.url)
                .header("Authorization", &format!("Bearer {}", self.api_key))
                .send_json(request)
                .map_err(|e| EndpointError::Transport(e.to_string()))?;
            let status = response.status().as_u16();
            if !(200..300).contains(&status) {
                let body = response.body_mut().read_to_string().unwrap_or_default();
                return Err(EndpointError::Status { status, body });
            }
            let completion: Completion = response
                .body_mut()
                .read_json()
                .map_err(|e| EndpointError::InvalidResponse(e.to_string()))?;
            completion
                .choices
                .into_iter()
                .next()
                .map(|c| c.message.content.unwrap_or_default())
                .ok_or_else(|| EndpointError::InvalidResponse("no choices".into()))
        }
    }
}
