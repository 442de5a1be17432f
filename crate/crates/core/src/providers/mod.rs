//! Access to the four model capabilities (chat, embed, ner, summarize).
//!
//! Every call is described by a [`ProviderRequest`], answered by a
//! [`Backend`] (HTTP or mock) and optionally memoised in a [`DiskCache`]
//! under the SHA-256 of the request's canonical JSON. Typed handles wrap a
//! [`Client`] and decode the wire responses.

mod cache;
mod canonical;
mod http;
pub mod mock;
mod retry;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::DiskCache;
pub use canonical::canonical_json;
pub use http::HttpBackend;
pub use mock::{ChatMode, Lexicon, MockBackend, MockChat};
pub use retry::{RateLimiter, RetryPolicy};

use crate::gap_detection::EntityMention;
use crate::metrics::EmbeddingVector;
use crate::text_analysis::Stopwords;

/// Request parameters a client may attach.
pub const ALLOWED_PARAMS: &[&str] = &["temperature", "max_tokens"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Capability {
    Chat,
    Embed,
    Ner,
    Summarize,
}

impl Capability {
    pub fn as_str(self) -> &'static str {
        match self {
            Capability::Chat => "chat",
            Capability::Embed => "embed",
            Capability::Ner => "ner",
            Capability::Summarize => "summarize",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("provider unavailable after {attempts} attempts: {last}")]
    Unavailable { attempts: u32, last: String },
    #[error("provider rejected request (status {status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("embedding dimension mismatch: configured {expected}, provider returned {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("provider configuration: {0}")]
    Config(String),
}

/// One call to a capability, as it is hashed for the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub capability: Capability,
    pub model: String,
    pub payload: Value,
    pub params: Map<String, Value>,
}

impl ProviderRequest {
    pub fn new(capability: Capability, model: impl Into<String>, payload: Value) -> Self {
        ProviderRequest {
            capability,
            model: model.into(),
            payload,
            params: Map::new(),
        }
    }

    pub fn with_params(mut self, params: Map<String, Value>) -> Self {
        self.params = params;
        self
    }

    pub fn canonical(&self) -> String {
        canonical_json(&json!({
            "capability": self.capability.as_str(),
            "model": self.model,
            "payload": self.payload,
            "params": self.params,
        }))
    }

    pub fn cache_key(&self) -> CacheKey {
        CacheKey(Sha256::digest(self.canonical().as_bytes()).into())
    }
}

/// SHA-256 digest of a request's canonical serialization.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey(pub [u8; 32]);

impl CacheKey {
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CacheKey({})", self.to_hex())
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Something that answers provider requests with wire-format JSON bodies.
pub trait Backend: Send + Sync {
    fn send(&self, request: &ProviderRequest) -> Result<Value, ProviderError>;

    /// Embedding dimension the backend reports, when it reports one.
    fn advertised_dimension(&self) -> Result<Option<usize>, ProviderError> {
        Ok(None)
    }
}

#[derive(Debug, Default)]
pub struct CallStats {
    backend_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl CallStats {
    /// Attempts that reached the backend, retries included.
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::SeqCst)
    }
}

/// Shared machinery behind every typed handle.
#[derive(Clone)]
pub struct Client {
    capability: Capability,
    model: String,
    params: Map<String, Value>,
    backend: Arc<dyn Backend>,
    cache: Option<Arc<DiskCache>>,
    retry: RetryPolicy,
    limiter: Option<Arc<RateLimiter>>,
    stats: Arc<CallStats>,
}

impl Client {
    pub fn new(
        capability: Capability,
        model: impl Into<String>,
        backend: Arc<dyn Backend>,
    ) -> Self {
        Client {
            capability,
            model: model.into(),
            params: Map::new(),
            backend,
            cache: None,
            retry: RetryPolicy::no_delay(0),
            limiter: None,
            stats: Arc::new(CallStats::default()),
        }
    }

    pub fn with_param(mut self, key: &str, value: Value) -> Result<Self, ProviderError> {
        if !ALLOWED_PARAMS.contains(&key) {
            return Err(ProviderError::Config(format!(
                "unknown request parameter {key:?}"
            )));
        }
        self.params.insert(key.to_string(), value);
        Ok(self)
    }

    pub fn with_cache(mut self, cache: Option<Arc<DiskCache>>) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limit(mut self, limiter: Option<Arc<RateLimiter>>) -> Self {
        self.limiter = limiter;
        self
    }

    pub fn stats(&self) -> &CallStats {
        &self.stats
    }

    pub fn request(&self, payload: Value) -> ProviderRequest {
        ProviderRequest::new(self.capability, self.model.clone(), payload)
            .with_params(self.params.clone())
    }

    /// Send `payload`, serving from the cache when possible. Only responses
    /// that decode successfully are stored.
    pub fn execute<T>(
        &self,
        payload: Value,
        decode: impl Fn(&Value) -> Result<T, ProviderError>,
    ) -> Result<T, ProviderError> {
        let request = self.request(payload);
        let key = request.cache_key();
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key) {
                match decode(&hit) {
                    Ok(v) => {
                        self.stats.cache_hits.fetch_add(1, Ordering::SeqCst);
                        return Ok(v);
                    }
                    Err(e) => warn!(
                        "discarding cached {} response {key}: {e}",
                        self.capability.as_str()
                    ),
                }
            }
        }
        let body = self.send_with_retry(&request)?;
        let value = decode(&body)?;
        if let Some(cache) = &self.cache {
            if let Err(e) = cache.put(&key, &body) {
                warn!("could not write cache entry {key}: {e}");
            }
        }
        Ok(value)
    }

    fn send_with_retry(&self, request: &ProviderRequest) -> Result<Value, ProviderError> {
        let mut retry = 0;
        loop {
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            self.stats.backend_calls.fetch_add(1, Ordering::SeqCst);
            match self.backend.send(request) {
                Err(ProviderError::Transient(last)) => {
                    if retry >= self.retry.max_retries {
                        return Err(ProviderError::Unavailable {
                            attempts: retry + 1,
                            last,
                        });
                    }
                    warn!(
                        "{} call failed ({last}); retrying",
                        self.capability.as_str()
                    );
                    std::thread::sleep(self.retry.delay(retry));
                    retry += 1;
                }
                other => return other,
            }
        }
    }
}

fn require_non_empty(what: &str, text: &str) -> Result<(), ProviderError> {
    if text.trim().is_empty() {
        Err(ProviderError::Precondition(format!(
            "{what} must be non-empty"
        )))
    } else {
        Ok(())
    }
}

fn string_at(body: &Value, pointer: &str) -> Result<String, ProviderError> {
    body.pointer(pointer)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProviderError::Malformed(format!("expected a string at {pointer}")))
}

/// Chat completion handle.
#[derive(Clone)]
pub struct ChatClient(pub Client);

impl ChatClient {
    pub fn request_for(&self, prompt: &str) -> ProviderRequest {
        self.0.request(Self::payload(prompt))
    }

    fn payload(prompt: &str) -> Value {
        json!({ "messages": [ { "role": "user", "content": prompt } ] })
    }

    /// The model's reply, verbatim.
    pub fn chat_complete(&self, prompt: &str) -> Result<String, ProviderError> {
        require_non_empty("prompt", prompt)?;
        self.0.execute(Self::payload(prompt), |body| {
            string_at(body, "/choices/0/message/content")
        })
    }

    pub fn stats(&self) -> &CallStats {
        self.0.stats()
    }
}

/// Embedding handle; every vector is checked against `dimension`.
#[derive(Clone)]
pub struct EmbedClient {
    pub client: Client,
    pub dimension: usize,
}

impl EmbedClient {
    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        require_non_empty("text to embed", text)?;
        let dimension = self.dimension;
        self.client.execute(json!({ "input": text }), |body| {
            let values: Vec<f64> = body
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| ProviderError::Malformed("expected an embedding array".into()))?
                .iter()
                .map(|v| {
                    v.as_f64().ok_or_else(|| {
                        ProviderError::Malformed("non-numeric embedding value".into())
                    })
                })
                .collect::<Result<_, _>>()?;
            if values.len() != dimension {
                return Err(ProviderError::DimensionMismatch {
                    expected: dimension,
                    actual: values.len(),
                });
            }
            EmbeddingVector::new(values).map_err(|e| ProviderError::Malformed(e.to_string()))
        })
    }

    /// Compare the backend's advertised dimension with the configured one.
    pub fn handshake(&self) -> Result<(), ProviderError> {
        match self.client.backend.advertised_dimension()? {
            Some(actual) if actual != self.dimension => Err(ProviderError::DimensionMismatch {
                expected: self.dimension,
                actual,
            }),
            _ => Ok(()),
        }
    }

    pub fn stats(&self) -> &CallStats {
        self.client.stats()
    }
}

/// Named-entity extraction handle.
#[derive(Clone)]
pub struct NerClient(pub Client);

impl NerClient {
    pub fn extract_entities(&self, text: &str) -> Result<Vec<EntityMention>, ProviderError> {
        self.0.execute(json!({ "text": text }), |body| {
            let entities = body
                .get("entities")
                .ok_or_else(|| ProviderError::Malformed("expected an entities array".into()))?;
            serde_json::from_value(entities.clone())
                .map_err(|e| ProviderError::Malformed(format!("entities: {e}")))
        })
    }

    pub fn stats(&self) -> &CallStats {
        self.0.stats()
    }
}

/// Summarization handle.
#[derive(Clone)]
pub struct SummarizeClient(pub Client);

impl SummarizeClient {
    pub fn summarize(&self, text: &str) -> Result<String, ProviderError> {
        require_non_empty("text to summarize", text)?;
        self.0
            .execute(json!({ "text": text }), |body| string_at(body, "/summary"))
    }

    pub fn stats(&self) -> &CallStats {
        self.0.stats()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatSettings {
    pub mock: bool,
    pub mode: ChatMode,
    /// Canned-response file for `template` mode.
    pub canned: Option<PathBuf>,
    /// Mode answering template misses; misses are rejected when unset.
    pub fallback: Option<ChatMode>,
    pub base_url: String,
    pub model: String,
    pub token_env: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ChatSettings {
    fn default() -> Self {
        ChatSettings {
            mock: false,
            mode: ChatMode::Append,
            canned: None,
            fallback: None,
            base_url: "http://127.0.0.1:8000".into(),
            model: "gpt-4-0613".into(),
            token_env: None,
            temperature: 0.0,
            max_tokens: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedSettings {
    pub mock: bool,
    pub base_url: String,
    pub model: String,
    pub token_env: Option<String>,
    pub dimension: usize,
}

impl Default for EmbedSettings {
    fn default() -> Self {
        EmbedSettings {
            mock: false,
            base_url: "http://127.0.0.1:8000".into(),
            model: "all-MiniLM-L6-v2".into(),
            token_env: None,
            dimension: 384,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NerSettings {
    pub mock: bool,
    pub base_url: String,
    pub model: String,
    pub token_env: Option<String>,
    /// Lexicon for the mock; the bundled one when unset.
    pub lexicon: Option<PathBuf>,
}

impl Default for NerSettings {
    fn default() -> Self {
        NerSettings {
            mock: false,
            base_url: "http://127.0.0.1:8000".into(),
            model: "biomedical-ner".into(),
            token_env: None,
            lexicon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummarizeSettings {
    pub mock: bool,
    pub base_url: String,
    pub model: String,
    pub token_env: Option<String>,
    /// Sentences kept by the mock summarizer.
    pub sentences: usize,
    pub max_tokens: u32,
}

impl Default for SummarizeSettings {
    fn default() -> Self {
        SummarizeSettings {
            mock: false,
            base_url: "http://127.0.0.1:8000".into(),
            model: "bart-large-cnn".into(),
            token_env: None,
            sentences: 3,
            max_tokens: 142,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrySettings {
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
    pub jitter: bool,
    /// Per-capability request rate; unlimited when unset.
    pub requests_per_minute: Option<u32>,
    pub timeout_secs: u64,
}

impl Default for RetrySettings {
    fn default() -> Self {
        RetrySettings {
            max_retries: 3,
            backoff_base_ms: 500,
            backoff_max_ms: 30_000,
            jitter: true,
            requests_per_minute: None,
            timeout_secs: 120,
        }
    }
}

impl RetrySettings {
    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay: Duration::from_millis(self.backoff_base_ms),
            max_delay: Duration::from_millis(self.backoff_max_ms),
            jitter: self.jitter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheSettings {
    pub enabled: bool,
    pub dir: PathBuf,
}

impl Default for CacheSettings {
    fn default() -> Self {
        CacheSettings {
            enabled: true,
            dir: PathBuf::from(".reinsert-cache"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersConfig {
    pub chat: ChatSettings,
    pub embed: EmbedSettings,
    pub ner: NerSettings,
    pub summarize: SummarizeSettings,
    pub retry: RetrySettings,
    pub cache: CacheSettings,
}

impl ProvidersConfig {
    /// Every capability mocked, no cache.
    pub fn all_mock() -> Self {
        let mut config = ProvidersConfig::default();
        config.set_all_mock();
        config.cache.enabled = false;
        config
    }

    pub fn set_all_mock(&mut self) {
        self.chat.mock = true;
        self.embed.mock = true;
        self.ner.mock = true;
        self.summarize.mock = true;
    }
}

/// The four handles a pipeline run needs.
#[derive(Clone)]
pub struct Providers {
    pub chat: ChatClient,
    pub embed: EmbedClient,
    pub ner: NerClient,
    pub summarize: SummarizeClient,
}

impl Providers {
    /// Build handles from configuration. `stopwords` feeds the mock embedding.
    pub fn from_config(
        config: &ProvidersConfig,
        stopwords: &Stopwords,
    ) -> Result<Self, ProviderError> {
        if config.embed.dimension < 2 {
            return Err(ProviderError::Config(
                "embedding dimension must be at least 2".into(),
            ));
        }
        let cache = config
            .cache
            .enabled
            .then(|| Arc::new(DiskCache::new(config.cache.dir.clone())));
        let timeout = Duration::from_secs(config.retry.timeout_secs);

        let wire = |capability: Capability,
                    mock: Option<MockBackend>,
                    base_url: &str,
                    token_env: &Option<String>,
                    model: &str|
         -> Result<Client, ProviderError> {
            // Only live calls are cached.
            if let Some(m) = mock {
                return Ok(Client::new(capability, model, Arc::new(m)));
            }
            let token = token_env
                .as_deref()
                .map(HttpBackend::token_from_env)
                .transpose()?;
            let backend = HttpBackend::new(capability, base_url, token, timeout);
            let limiter = config
                .retry
                .requests_per_minute
                .filter(|r| *r > 0)
                .map(|r| Arc::new(RateLimiter::per_minute(r)));
            Ok(Client::new(capability, model, Arc::new(backend))
                .with_retry(config.retry.policy())
                .with_rate_limit(limiter)
                .with_cache(cache.clone()))
        };

        let chat_mock = if config.chat.mock {
            Some(MockBackend::Chat(match config.chat.mode {
                ChatMode::Template => {
                    let canned = match &config.chat.canned {
                        Some(path) => MockChat::load_canned(path)?,
                        None => BTreeMap::new(),
                    };
                    MockChat::template(canned, config.chat.fallback)
                }
                mode => MockChat::new(mode),
            }))
        } else {
            None
        };
        let c = &config.chat;
        let chat = wire(
            Capability::Chat,
            chat_mock,
            &c.base_url,
            &c.token_env,
            &c.model,
        )?
        .with_param("temperature", json!(c.temperature))?
        .with_param("max_tokens", json!(c.max_tokens))?;

        let e = &config.embed;
        let embed_mock = e.mock.then(|| MockBackend::Embed {
            dimension: e.dimension,
            stopwords: stopwords.clone(),
        });
        let embed = wire(
            Capability::Embed,
            embed_mock,
            &e.base_url,
            &e.token_env,
            &e.model,
        )?;

        let n = &config.ner;
        let ner_mock = if n.mock {
            Some(MockBackend::Ner(match &n.lexicon {
                Some(path) => Lexicon::from_file(path)?,
                None => Lexicon::parse(mock::DEFAULT_LEXICON),
            }))
        } else {
            None
        };
        let ner = wire(
            Capability::Ner,
            ner_mock,
            &n.base_url,
            &n.token_env,
            &n.model,
        )?;

        let s = &config.summarize;
        let sum_mock = s.mock.then_some(MockBackend::Summarize {
            sentences: s.sentences,
        });
        let summarize = wire(
            Capability::Summarize,
            sum_mock,
            &s.base_url,
            &s.token_env,
            &s.model,
        )?
        .with_param("max_tokens", json!(s.max_tokens))?;

        Ok(Providers {
            chat: ChatClient(chat),
            embed: EmbedClient {
                client: embed,
                dimension: e.dimension,
            },
            ner: NerClient(ner),
            summarize: SummarizeClient(summarize),
        })
    }

    /// All-mock providers with the given chat mode and lexicon, no cache.
    pub fn mock(mode: ChatMode, lexicon: &str, dimension: usize, sentences: usize) -> Self {
        let chat = Client::new(
            Capability::Chat,
            "mock-chat",
            Arc::new(MockBackend::Chat(MockChat::new(mode))),
        );
        Self::mock_with_chat(chat, lexicon, dimension, sentences)
    }

    /// All-mock providers around an arbitrary chat client.
    pub fn mock_with_chat(chat: Client, lexicon: &str, dimension: usize, sentences: usize) -> Self {
        let embed = Client::new(
            Capability::Embed,
            "mock-embed",
            Arc::new(MockBackend::Embed {
                dimension,
                stopwords: Stopwords::bundled().clone(),
            }),
        );
        let ner = Client::new(
            Capability::Ner,
            "mock-ner",
            Arc::new(MockBackend::Ner(Lexicon::parse(lexicon))),
        );
        let summarize = Client::new(
            Capability::Summarize,
            "mock-summarize",
            Arc::new(MockBackend::Summarize { sentences }),
        );
        Providers {
            chat: ChatClient(chat),
            embed: EmbedClient {
                client: embed,
                dimension,
            },
            ner: NerClient(ner),
            summarize: SummarizeClient(summarize),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    /// Fails with a transient error a fixed number of times, then echoes.
    struct Flaky {
        failures: Mutex<u32>,
    }

    impl Backend for Flaky {
        fn send(&self, request: &ProviderRequest) -> Result<Value, ProviderError> {
            let mut left = self.failures.lock().unwrap();
            if *left > 0 {
                *left -= 1;
                return Err(ProviderError::Transient("connection reset".into()));
            }
            Ok(json!({ "summary": request.payload["text"] }))
        }
    }

    fn flaky(failures: u32, retries: u32) -> SummarizeClient {
        let backend = Arc::new(Flaky {
            failures: Mutex::new(failures),
        });
        SummarizeClient(
            Client::new(Capability::Summarize, "m", backend)
                .with_retry(RetryPolicy::no_delay(retries)),
        )
    }

    #[test]
    fn cache_key_ignores_key_order_and_float_spelling() {
        let a = ProviderRequest::new(Capability::Chat, "m", json!({"a": 1, "b": 2}))
            .with_params(json!({"temperature": 0.0}).as_object().unwrap().clone());
        let b = ProviderRequest::new(Capability::Chat, "m", json!({"b": 2, "a": 1}))
            .with_params(json!({"temperature": 0}).as_object().unwrap().clone());
        assert_eq!(a.cache_key(), b.cache_key());
        let c = ProviderRequest::new(Capability::Chat, "other", json!({"a": 1, "b": 2}));
        assert_ne!(a.cache_key(), c.cache_key());
    }

    #[test]
    fn cache_key_is_pinned() {
        // Keys must not drift between builds; entries on disk depend on them.
        let request = ProviderRequest::new(Capability::Ner, "m", json!({"text": "gout"}));
        assert_eq!(
            request.canonical(),
            r#"{"capability":"ner","model":"m","params":{},"payload":{"text":"gout"}}"#
        );
        let expected: String = Sha256::digest(request.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(request.cache_key().to_hex(), expected);
    }

    #[test]
    fn retries_transient_failures() {
        let client = flaky(2, 3);
        assert_eq!(client.summarize("hello").unwrap(), "hello");
        assert_eq!(client.stats().backend_calls(), 3);
    }

    #[test]
    fn exhausted_retries_are_unavailable() {
        let client = flaky(10, 3);
        match client.summarize("hello") {
            Err(ProviderError::Unavailable { attempts, .. }) => assert_eq!(attempts, 4),
            other => panic!("expected unavailable, got {other:?}"),
        }
        assert_eq!(client.stats().backend_calls(), 4);
    }

    #[test]
    fn empty_inputs_violate_preconditions() {
        let providers = Providers::mock(ChatMode::Append, "", 8, 3);
        assert!(matches!(
            providers.chat.chat_complete(""),
            Err(ProviderError::Precondition(_))
        ));
        assert!(matches!(
            providers.embed.embed("  "),
            Err(ProviderError::Precondition(_))
        ));
        assert!(matches!(
            providers.summarize.summarize(""),
            Err(ProviderError::Precondition(_))
        ));
        assert_eq!(providers.chat.stats().backend_calls(), 0);
    }

    #[test]
    fn cache_serves_repeat_requests() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Some(Arc::new(DiskCache::new(dir.path())));
        let chat = Client::new(
            Capability::Chat,
            "mock",
            Arc::new(MockBackend::Chat(MockChat::new(ChatMode::Append))),
        )
        .with_cache(cache);
        let chat = ChatClient(chat);
        let prompt = "x\n- Current Simplified Text: Base.\n- Important Entities Missing: gout\n\nInstructions:\n";
        let first = chat.chat_complete(prompt).unwrap();
        let second = chat.chat_complete(prompt).unwrap();
        assert_eq!(first, second);
        assert_eq!(first, "Base. gout");
        assert_eq!(chat.stats().backend_calls(), 1);
        assert_eq!(chat.stats().cache_hits(), 1);
    }

    #[test]
    fn embed_dimension_is_enforced() {
        let providers = Providers::mock(ChatMode::Echo, "", 16, 3);
        let narrow = EmbedClient {
            client: providers.embed.client.clone(),
            dimension: 8,
        };
        assert_eq!(
            narrow.embed("joint pain").unwrap_err(),
            ProviderError::DimensionMismatch {
                expected: 8,
                actual: 16
            }
        );
        assert!(narrow.handshake().is_err());
        assert!(providers.embed.handshake().is_ok());
    }

    #[test]
    fn unknown_params_rejected() {
        let client = Client::new(
            Capability::Chat,
            "m",
            Arc::new(MockBackend::Summarize { sentences: 1 }),
        );
        assert!(client.with_param("top_k", json!(3)).is_err());
    }

    #[test]
    fn template_mode_answers_by_digest() {
        let base = Client::new(
            Capability::Chat,
            "m",
            Arc::new(MockBackend::Chat(MockChat::new(ChatMode::Echo))),
        );
        let request = ChatClient(base).request_for("anything");
        let canned = BTreeMap::from([(request.cache_key().to_hex(), json!("canned reply"))]);
        let chat = ChatClient(Client::new(
            Capability::Chat,
            "m",
            Arc::new(MockBackend::Chat(MockChat::template(canned, None))),
        ));
        assert_eq!(chat.chat_complete("anything").unwrap(), "canned reply");
        assert!(matches!(
            chat.chat_complete("something else"),
            Err(ProviderError::Rejected { status: 404, .. })
        ));
    }
}
