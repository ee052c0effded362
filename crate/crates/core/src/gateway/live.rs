//! HTTP chat-completion / embedding backend (OpenAI-compatible wire format).

use std::time::{Duration, Instant};

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendKind, Completion, GatewayError, Slots, TemplateId};

pub const DEFAULT_API_KEY_ENV: &str = "AGENTSIM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveConfig {
    pub base_url: String,
    pub model: String,
    pub embedding_model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".to_string(),
            model: "gpt-3.5-turbo".to_string(),
            embedding_model: "text-embedding-ada-002".to_string(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            timeout_secs: 60,
            max_retries: 2,
            backoff_ms: 500,
        }
    }
}

pub struct LiveBackend {
    config: LiveConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok();
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: LiveConfig, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self {
            config,
            api_key,
            agent,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn post_once(&self, url: &str, body: &Value) -> Result<Value, GatewayError> {
        let mut req = self.agent.post(url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(GatewayError::Transport(format!("HTTP {status} from {url}")));
        }
        resp.body_mut()
            .read_json::<Value>()
            .map_err(|e| GatewayError::Transport(format!("bad response body: {e}")))
    }

    /// Up to `max_retries` additional attempts with exponential backoff.
    fn post_with_retries(&self, url: &str, body: &Value) -> Result<Value, GatewayError> {
        let mut attempt = 0;
        loop {
            match self.post_once(url, body) {
                Ok(v) => return Ok(v),
                Err(e) if attempt < self.config.max_retries => {
                    let wait = self.config.backoff_ms.saturating_mul(1 << attempt);
                    warn!("live gateway attempt {} failed: {e}; retrying in {wait} ms", attempt + 1);
                    std::thread::sleep(Duration::from_millis(wait));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn chat_request(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        })
    }
}

impl Backend for LiveBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Live
    }

    fn complete(
        &mut self,
        _template: TemplateId,
        prompt: &str,
        _slots: &Slots,
    ) -> Result<Completion, GatewayError> {
        let started = Instant::now();
        let body = self.chat_request(prompt);
        let value = self.post_with_retries(&self.url("chat/completions"), &body)?;
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| GatewayError::Transport("response has no choices[0].message.content".into()))?
            .trim()
            .to_string();
        Ok(Completion {
            text,
            backend: BackendKind::Live,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }

    fn embed(&mut self, text: &str) -> Result<Option<Vec<f64>>, GatewayError> {
        let body = json!({"model": self.config.embedding_model, "input": text});
        let value = self.post_with_retries(&self.url("embeddings"), &body)?;
        let vector = value["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| GatewayError::Transport("response has no data[0].embedding".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| GatewayError::Transport("non-numeric embedding".into())))
            .collect::<Result<Vec<f64>, _>>()?;
        Ok(Some(vector))
    }
}
