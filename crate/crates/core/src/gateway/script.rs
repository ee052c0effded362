//! Deterministic scripted backend.
//!
//! A script is an ordered list of entries `{template, when, reply}`. For a
//! request the first entry (in file order) whose template matches and whose
//! every slot matcher accepts the slot value wins. Replies may reference
//! slot values with `{{slot}}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, BackendKind, Completion, GatewayError, Slots, TemplateId};

pub const SCRIPT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotMatcher {
    Exact(String),
    Contains(String),
}

impl SlotMatcher {
    pub fn accepts(&self, value: &str) -> bool {
        match self {
            SlotMatcher::Exact(want) => value == want,
            SlotMatcher::Contains(needle) => value.contains(needle.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub template: TemplateId,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub when: BTreeMap<String, SlotMatcher>,
    pub reply: String,
}

impl ScriptEntry {
    pub fn new(template: TemplateId, reply: impl Into<String>) -> Self {
        Self {
            template,
            when: BTreeMap::new(),
            reply: reply.into(),
        }
    }

    pub fn when_exact(mut self, slot: &str, value: impl Into<String>) -> Self {
        self.when
            .insert(slot.to_string(), SlotMatcher::Exact(value.into()));
        self
    }

    pub fn when_contains(mut self, slot: &str, needle: impl Into<String>) -> Self {
        self.when
            .insert(slot.to_string(), SlotMatcher::Contains(needle.into()));
        self
    }

    fn matches(&self, slots: &Slots) -> bool {
        self.when.iter().all(|(slot, matcher)| {
            slots
                .get(slot)
                .is_some_and(|value| matcher.accepts(value))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub schema_version: u32,
    pub entries: Vec<ScriptEntry>,
}

impl Default for Script {
    fn default() -> Self {
        Self {
            schema_version: SCRIPT_SCHEMA_VERSION,
            entries: Vec::new(),
        }
    }
}

impl Script {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self {
            schema_version: SCRIPT_SCHEMA_VERSION,
            entries,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        let script: Script =
            serde_json::from_str(text).map_err(|e| GatewayError::Script(e.to_string()))?;
        if script.schema_version != SCRIPT_SCHEMA_VERSION {
            return Err(GatewayError::Script(format!(
                "script schema_version {} is not supported (expected {})",
                script.schema_version, SCRIPT_SCHEMA_VERSION
            )));
        }
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Script(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn push(&mut self, entry: ScriptEntry) {
        self.entries.push(entry);
    }
}

/// Short digest of a slot map, used in miss diagnostics.
pub fn slot_digest(slots: &Slots) -> String {
    let mut hasher = Sha256::new();
    for (k, v) in slots {
        hasher.update(k.as_bytes());
        hasher.update([0]);
        hasher.update(v.as_bytes());
        hasher.update([0]);
    }
    hex::encode(&hasher.finalize()[..8])
}

/// Replaces `{{slot}}` references with slot values; unknown names stay verbatim.
pub fn interpolate(reply: &str, slots: &Slots) -> String {
    if !reply.contains("{{") {
        return reply.to_string();
    }
    let mut out = String::with_capacity(reply.len());
    let mut rest = reply;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let name = &after[..close];
                match slots.get(name) {
                    Some(value) => out.push_str(value),
                    None => {
                        out.push_str("{{");
                        out.push_str(name);
                        out.push_str("}}");
                    }
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str("{{");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    script: Script,
    by_template: BTreeMap<TemplateId, Vec<usize>>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        let mut by_template: BTreeMap<TemplateId, Vec<usize>> = BTreeMap::new();
        for (i, entry) in script.entries.iter().enumerate() {
            by_template.entry(entry.template).or_default().push(i);
        }
        Self {
            script,
            by_template,
        }
    }

    pub fn script(&self) -> &Script {
        &self.script
    }

    /// Pure lookup: the reply the script gives for `(template, slots)`.
    pub fn reply_for(&self, template: TemplateId, slots: &Slots) -> Result<String, GatewayError> {
        let candidates = self.by_template.get(&template).map(Vec::as_slice).unwrap_or(&[]);
        candidates
            .iter()
            .map(|&i| &self.script.entries[i])
            .find(|entry| entry.matches(slots))
            .map(|entry| interpolate(&entry.reply, slots))
            .ok_or_else(|| GatewayError::ScriptMiss {
                template,
                slot_digest: slot_digest(slots),
                slots: slots.keys().cloned().collect(),
            })
    }
}

impl Backend for ScriptedBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn complete(
        &mut self,
        template: TemplateId,
        _prompt: &str,
        slots: &Slots,
    ) -> Result<Completion, GatewayError> {
        self.reply_for(template, slots).map(|text| Completion {
            text,
            backend: BackendKind::Scripted,
            latency_ms: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slots;

    fn backend() -> ScriptedBackend {
        ScriptedBackend::new(Script::new(vec![
            ScriptEntry::new(TemplateId::Importance, "2")
                .when_contains("memory", "cleaning up the room"),
            ScriptEntry::new(TemplateId::Importance, "8")
                .when_contains("memory", "asking your crush out"),
            ScriptEntry::new(TemplateId::Emoji, "hello {{name}}").when_exact("name", "Eddy"),
            ScriptEntry::new(TemplateId::Importance, "1"),
        ]))
    }

    #[test]
    fn first_match_wins_in_file_order() {
        let b = backend();
        let reply = b
            .reply_for(TemplateId::Importance, &slots! {"memory" => "cleaning up the room"})
            .unwrap();
        assert_eq!(reply, "2");
        let reply = b
            .reply_for(TemplateId::Importance, &slots! {"memory" => "asking your crush out on a date"})
            .unwrap();
        assert_eq!(reply, "8");
        let reply = b
            .reply_for(TemplateId::Importance, &slots! {"memory" => "brushing teeth"})
            .unwrap();
        assert_eq!(reply, "1");
    }

    #[test]
    fn miss_names_template_and_digest() {
        let b = backend();
        let slots = slots! {"name" => "John"};
        let err = b.reply_for(TemplateId::Emoji, &slots).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("emoji"), "{text}");
        assert!(text.contains(&slot_digest(&slots)), "{text}");
    }

    #[test]
    fn replies_interpolate_slots() {
        let b = backend();
        let reply = b
            .reply_for(TemplateId::Emoji, &slots! {"name" => "Eddy"})
            .unwrap();
        assert_eq!(reply, "hello Eddy");
        assert_eq!(interpolate("{{missing}} x", &Slots::new()), "{{missing}} x");
    }

    #[test]
    fn script_json_round_trip() {
        let script = backend().script().clone();
        let json = serde_json::to_string_pretty(&script).unwrap();
        assert!(json.contains("\"contains\": \"cleaning up the room\""));
        assert_eq!(Script::from_json(&json).unwrap(), script);
    }

    #[test]
    fn rejects_unknown_schema_version() {
        let err = Script::from_json(r#"{"schema_version": 9, "entries": []}"#).unwrap_err();
        assert!(err.to_string().contains("schema_version 9"));
    }
}
