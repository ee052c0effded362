//! Event log records. One JSON object per line, fields in declaration order.

use serde::{Deserialize, Serialize};

use crate::environment::path::Tile;
use crate::gateway::ModelExchange;
use crate::planning::{PlanEntry, PlanLevel};
use crate::clock::GameTime;

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub tick: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptSource {
    Seed,
    Perception,
    Dialogue,
    InnerVoice,
    /// The agent's own decision to react.
    Intent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanCause {
    Day,
    Decompose,
    Reaction,
}

/// Compact plan entry as written to the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub id: u32,
    pub level: PlanLevel,
    pub start: GameTime,
    pub duration: i64,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<u32>,
}

impl From<&PlanEntry> for PlanRecord {
    fn from(e: &PlanEntry) -> Self {
        Self {
            id: e.id,
            level: e.level,
            start: e.start,
            duration: e.duration,
            description: e.description.clone(),
            location: e.location.clone(),
            parent: e.parent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    ActionStart {
        agent: u32,
        action: String,
        emoji: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        location: Option<String>,
    },
    ActionEnd {
        agent: u32,
        action: String,
    },
    Move {
        agent: u32,
        from: Tile,
        to: Tile,
    },
    Percept {
        agent: u32,
        source: PerceptSource,
        memory_id: u64,
        importance: u8,
        text: String,
    },
    DialogueTurn {
        dialogue: u64,
        speaker: u32,
        listener: u32,
        utterance: String,
        end: bool,
    },
    Reflection {
        agent: u32,
        memory_id: u64,
        text: String,
        citations: Vec<u64>,
    },
    Plan {
        agent: u32,
        cause: PlanCause,
        entries: Vec<PlanRecord>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        memory_ids: Vec<u64>,
    },
    UserCommand {
        command: crate::commands::UserCommand,
        accepted: bool,
        result: String,
    },
    ObjectStatus {
        object: String,
        status: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        agent: Option<u32>,
    },
    ModelExchangeRef {
        exchange: ModelExchange,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::ActionStart { .. } => "action_start",
            EventBody::ActionEnd { .. } => "action_end",
            EventBody::Move { .. } => "move",
            EventBody::Percept { .. } => "percept",
            EventBody::DialogueTurn { .. } => "dialogue_turn",
            EventBody::Reflection { .. } => "reflection",
            EventBody::Plan { .. } => "plan",
            EventBody::UserCommand { .. } => "user_command",
            EventBody::ObjectStatus { .. } => "object_status",
            EventBody::ModelExchangeRef { .. } => "model_exchange_ref",
        }
    }

    /// Agent the event is about, when there is one.
    pub fn agent(&self) -> Option<u32> {
        match self {
            EventBody::ActionStart { agent, .. }
            | EventBody::ActionEnd { agent, .. }
            | EventBody::Move { agent, .. }
            | EventBody::Percept { agent, .. }
            | EventBody::Reflection { agent, .. }
            | EventBody::Plan { agent, .. } => Some(*agent),
            EventBody::DialogueTurn { speaker, .. } => Some(*speaker),
            EventBody::ObjectStatus { agent, .. } => *agent,
            EventBody::ModelExchangeRef { exchange } => exchange.agent,
            EventBody::UserCommand { .. } => None,
        }
    }
}
