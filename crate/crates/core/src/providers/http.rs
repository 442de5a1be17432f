use std::time::Duration;

use serde_json::{Map, Value};

use super::{Backend, Capability, ProviderError, ProviderRequest};

const BODY_EXCERPT: usize = 300;

/// JSON-over-HTTP backend for one capability.
///
/// Requests go to `POST {base_url}/{chat|embed|ner|summarize}`; the dimension
/// handshake uses `GET {base_url}/healthz`.
pub struct HttpBackend {
    capability: Capability,
    base_url: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(
        capability: Capability,
        base_url: &str,
        token: Option<String>,
        timeout: Duration,
    ) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            capability,
            base_url: base_url.trim_end_matches('/').to_string(),
            token,
            agent,
        }
    }

    /// Read the bearer token from `env_var`. An unset variable is a
    /// configuration error.
    pub fn token_from_env(env_var: &str) -> Result<String, ProviderError> {
        std::env::var(env_var).map_err(|_| {
            ProviderError::Config(format!("environment variable {env_var} is not set"))
        })
    }

    pub fn endpoint(&self) -> String {
        format!("{}/{}", self.base_url, self.capability.as_str())
    }

    /// The request body placed on the wire.
    pub fn wire_body(request: &ProviderRequest) -> Value {
        let mut body = Map::new();
        if matches!(request.capability, Capability::Chat | Capability::Embed) {
            body.insert("model".into(), Value::String(request.model.clone()));
        }
        if let Value::Object(payload) = &request.payload {
            body.extend(payload.clone());
        }
        body.extend(request.params.clone());
        Value::Object(body)
    }

    fn classify(status: u16, body: &str) -> ProviderError {
        let excerpt: String = body.chars().take(BODY_EXCERPT).collect();
        if status == 408 || status == 429 || status >= 500 {
            ProviderError::Transient(format!("status {status}: {excerpt}"))
        } else {
            ProviderError::Rejected {
                status,
                body: excerpt,
            }
        }
    }

    fn read(mut response: ureq::http::Response<ureq::Body>) -> Result<Value, ProviderError> {
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transient(format!("reading response body: {e}")))?;
        if !(200..300).contains(&status) {
            return Err(Self::classify(status, &text));
        }
        serde_json::from_str(&text)
            .map_err(|e| ProviderError::Malformed(format!("response is not JSON: {e}")))
    }

    fn authorization(&self) -> Option<String> {
        self.token.as_ref().map(|t| format!("Bearer {t}"))
    }
}

impl Backend for HttpBackend {
    fn send(&self, request: &ProviderRequest) -> Result<Value, ProviderError> {
        let mut call = self.agent.post(&self.endpoint());
        if let Some(auth) = self.authorization() {
            call = call.header("Authorization", &auth);
        }
        let response = call
            .send_json(Self::wire_body(request))
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        Self::read(response)
    }

    fn advertised_dimension(&self) -> Result<Option<usize>, ProviderError> {
        if self.capability != Capability::Embed {
            return Ok(None);
        }
        let mut call = self.agent.get(&format!("{}/healthz", self.base_url));
        if let Some(auth) = self.authorization() {
            call = call.header("Authorization", &auth);
        }
        let response = call
            .call()
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let body = Self::read(response)?;
        body.get("embedding_dimension")
            .and_then(Value::as_u64)
            .map(|d| Some(d as usize))
            .ok_or_else(|| ProviderError::Malformed("healthz lacks embedding_dimension".into()))
    }
}
