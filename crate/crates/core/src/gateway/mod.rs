//! Single choke point for language-model and embedding calls.
//!
//! [`Gateway`] renders a registered template, dispatches it to a backend
//! (scripted, live HTTP, or replay of a recorded log) and keeps a record of
//! every exchange so the engine can log it before the tick commits.

pub mod embed;
pub mod live;
pub mod script;
pub mod templates;

use std::collections::{BTreeMap, VecDeque};

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scalar::Real;

pub use embed::{hash_embedding, EMBEDDING_DIM};
pub use live::{LiveBackend, LiveConfig};
pub use script::{Script, ScriptEntry, ScriptedBackend, SlotMatcher};
pub use templates::{PromptTemplate, Slots, TemplateId, TemplateRegistry};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("template `{template}` is missing slot `{slot}`")]
    MissingSlot { template: TemplateId, slot: String },
    #[error("unknown template id `{0}`")]
    UnknownTemplate(String),
    #[error("scripted backend has no entry for template `{template}` (slot digest {slot_digest}, slots {slots:?})")]
    ScriptMiss {
        template: TemplateId,
        slot_digest: String,
        slots: Vec<String>,
    },
    #[error("script error: {0}")]
    Script(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("replay diverged: {0}")]
    ReplayDiverged(String),
    #[error("replay log has no more recorded exchanges")]
    ReplayExhausted,
    /// A failure served back verbatim from a recorded exchange.
    #[error("{0}")]
    Recorded(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scripted,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeOp {
    Complete,
    Embed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub backend: BackendKind,
    pub latency_ms: u64,
}

pub trait Backend: Send {
    fn kind(&self) -> BackendKind;

    fn complete(
        &mut self,
        template: TemplateId,
        prompt: &str,
        slots: &Slots,
    ) -> Result<Completion, GatewayError>;

    /// `Ok(None)` selects the deterministic hashing embedder.
    fn embed(&mut self, _text: &str) -> Result<Option<Vec<f64>>, GatewayError> {
        Ok(None)
    }
}

/// One request/response crossing the gateway.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelExchange {
    pub op: ExchangeOp,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template: Option<TemplateId>,
    pub tick: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<u32>,
    pub prompt_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub backend: BackendKind,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub memory_ids: Vec<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotations: BTreeMap<String, String>,
}

pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(&Sha256::digest(prompt.as_bytes())[..8])
}

/// Extra bookkeeping attached to an exchange record.
#[derive(Debug, Clone, Default)]
pub struct CallMeta {
    pub memory_ids: Vec<u64>,
    pub annotations: BTreeMap<String, String>,
}

impl CallMeta {
    pub fn citing(ids: impl IntoIterator<Item = u64>) -> Self {
        Self {
            memory_ids: ids.into_iter().collect(),
            annotations: BTreeMap::new(),
        }
    }

    pub fn annotate(mut self, key: &str, value: impl Into<String>) -> Self {
        self.annotations.insert(key.to_string(), value.into());
        self
    }
}

/// Serves recorded exchanges back in order; never contacts a model.
pub struct ReplayBackend {
    completions: VecDeque<ModelExchange>,
    embeddings: VecDeque<ModelExchange>,
    kind: BackendKind,
}

impl ReplayBackend {
    pub fn new(recorded: impl IntoIterator<Item = ModelExchange>, kind: BackendKind) -> Self {
        let mut completions = VecDeque::new();
        let mut embeddings = VecDeque::new();
        for x in recorded {
            match x.op {
                ExchangeOp::Complete => completions.push_back(x),
                ExchangeOp::Embed => embeddings.push_back(x),
            }
        }
        Self {
            completions,
            embeddings,
            kind,
        }
    }

    pub fn remaining(&self) -> usize {
        self.completions.len() + self.embeddings.len()
    }
}

impl Backend for ReplayBackend {
    fn kind(&self) -> BackendKind {
        self.kind
    }

    fn complete(
        &mut self,
        template: TemplateId,
        prompt: &str,
        _slots: &Slots,
    ) -> Result<Completion, GatewayError> {
        let rec = self
            .completions
            .pop_front()
            .ok_or(GatewayError::ReplayExhausted)?;
        if rec.template != Some(template) {
            return Err(GatewayError::ReplayDiverged(format!(
                "expected template {:?} at tick {}, engine asked for {template}",
                rec.template, rec.tick
            )));
        }
        let digest = prompt_digest(prompt);
        if rec.prompt_digest != digest {
            return Err(GatewayError::ReplayDiverged(format!(
                "prompt digest {digest} differs from recorded {} ({template}, tick {})",
                rec.prompt_digest, rec.tick
            )));
        }
        match (rec.reply, rec.error) {
            (Some(text), _) => Ok(Completion {
                text,
                backend: rec.backend,
                latency_ms: rec.latency_ms,
            }),
            (None, Some(err)) => Err(GatewayError::Recorded(err)),
            (None, None) => Err(GatewayError::ReplayDiverged("recorded exchange has neither reply nor error".into())),
        }
    }

    fn embed(&mut self, text: &str) -> Result<Option<Vec<f64>>, GatewayError> {
        if self.kind == BackendKind::Scripted {
            return Ok(None);
        }
        let rec = self
            .embeddings
            .pop_front()
            .ok_or(GatewayError::ReplayExhausted)?;
        if rec.prompt_digest != prompt_digest(text) {
            return Err(GatewayError::ReplayDiverged(format!(
                "embedding input differs from recorded one at tick {}",
                rec.tick
            )));
        }
        match (rec.reply, rec.error) {
            (Some(json), _) => serde_json::from_str(&json)
                .map(Some)
                .map_err(|e| GatewayError::ReplayDiverged(e.to_string())),
            (None, Some(err)) => Err(GatewayError::Recorded(err)),
            (None, None) => Ok(None),
        }
    }
}

/// Counters for diagnostics and tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GatewayStats {
    pub completions: u64,
    pub failures: u64,
    pub script_misses: u64,
    pub embeddings: u64,
}

pub struct Gateway {
    backend: Box<dyn Backend>,
    registry: TemplateRegistry,
    exchanges: Vec<ModelExchange>,
    tick: u64,
    agent: Option<u32>,
    keep_prompts: bool,
    stats: GatewayStats,
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Self {
            backend,
            registry: TemplateRegistry::standard(),
            exchanges: Vec::new(),
            tick: 0,
            agent: None,
            keep_prompts: false,
            stats: GatewayStats::default(),
        }
    }

    pub fn scripted(script: Script) -> Self {
        Self::new(Box::new(ScriptedBackend::new(script)))
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn registry(&self) -> &TemplateRegistry {
        &self.registry
    }

    /// Store full rendered prompts on exchange records (digests are always kept).
    pub fn keep_prompts(&mut self, keep: bool) {
        self.keep_prompts = keep;
    }

    pub fn set_context(&mut self, tick: u64, agent: Option<u32>) {
        self.tick = tick;
        self.agent = agent;
    }

    pub fn set_agent(&mut self, agent: Option<u32>) {
        self.agent = agent;
    }

    pub fn stats(&self) -> GatewayStats {
        self.stats
    }

    pub fn exchanges(&self) -> &[ModelExchange] {
        &self.exchanges
    }

    pub fn drain_exchanges(&mut self) -> Vec<ModelExchange> {
        std::mem::take(&mut self.exchanges)
    }

    pub fn complete(&mut self, template: TemplateId, slots: &Slots) -> Result<String, GatewayError> {
        self.complete_with(template, slots, CallMeta::default())
    }

    pub fn complete_with(
        &mut self,
        template: TemplateId,
        slots: &Slots,
        meta: CallMeta,
    ) -> Result<String, GatewayError> {
        let prompt = self.registry.render(template, slots)?;
        let result = self.backend.complete(template, &prompt, slots);
        self.stats.completions += 1;
        let (reply, error, backend, latency_ms) = match &result {
            Ok(c) => (Some(c.text.clone()), None, c.backend, c.latency_ms),
            Err(e) => {
                self.stats.failures += 1;
                if matches!(e, GatewayError::ScriptMiss { .. }) {
                    self.stats.script_misses += 1;
                    warn!("{e}");
                }
                (None, Some(e.to_string()), self.backend.kind(), 0)
            }
        };
        self.exchanges.push(ModelExchange {
            op: ExchangeOp::Complete,
            template: Some(template),
            tick: self.tick,
            agent: self.agent,
            prompt_digest: prompt_digest(&prompt),
            prompt: self.keep_prompts.then_some(prompt),
            reply,
            error,
            backend,
            latency_ms,
            memory_ids: meta.memory_ids,
            annotations: meta.annotations,
        });
        result.map(|c| c.text)
    }

    /// Unit-length embedding of `text`. Never fails: backend errors fall
    /// back to the hashing embedder with a warning.
    pub fn embed<F: Real>(&mut self, text: &str) -> Vec<F> {
        self.stats.embeddings += 1;
        match self.backend.embed(text) {
            Ok(None) => hash_embedding(text),
            Ok(Some(raw)) => {
                self.record_embedding(text, Some(&raw), None);
                embed::normalize(&raw).unwrap_or_else(|| hash_embedding(text))
            }
            Err(e) => {
                warn!("embedding failed ({e}); using hashing embedder");
                self.record_embedding(text, None, Some(e.to_string()));
                hash_embedding(text)
            }
        }
    }

    fn record_embedding(&mut self, text: &str, raw: Option<&[f64]>, error: Option<String>) {
        self.exchanges.push(ModelExchange {
            op: ExchangeOp::Embed,
            template: None,
            tick: self.tick,
            agent: self.agent,
            prompt_digest: prompt_digest(text),
            prompt: self.keep_prompts.then(|| text.to_string()),
            reply: raw.map(|v| serde_json::to_string(v).expect("f64 vectors serialize")),
            error,
            backend: self.backend.kind(),
            latency_ms: 0,
            memory_ids: Vec::new(),
            annotations: BTreeMap::new(),
        });
    }
}
