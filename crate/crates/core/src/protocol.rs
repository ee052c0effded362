//! Wire protocol between the engine and a UI client.
//!
//! Newline-delimited JSON; every message is one object tagged by `type`.
//! The server sends `state_snapshot` on connect, then per tick any
//! `command_ack`s, the tick's `event`s and one `state_delta`. Clients only
//! send `command`; commands queue and apply at the next tick boundary.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::commands::UserCommand;
use crate::engine::{Engine, Visitor};
use crate::environment::path::Tile;
use crate::events::{Event, EventBody};

/// Memories shown per agent in a snapshot.
pub const MEMORY_TAIL: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentView {
    pub id: u32,
    pub name: String,
    pub tile: Tile,
    pub action: String,
    pub emoji: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDetail {
    pub id: u32,
    pub memory_tail: Vec<String>,
    /// Today's schedule, one line per broad-strokes entry.
    pub plan: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectView {
    pub path: String,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateView {
    pub tick: u64,
    pub clock: String,
    pub map: Vec<String>,
    pub agents: Vec<AgentView>,
    pub details: Vec<AgentDetail>,
    pub objects: Vec<ObjectView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visitor: Option<Visitor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckStatus {
    Queued,
    Applied,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    StateSnapshot {
        state: StateView,
    },
    StateDelta {
        tick: u64,
        clock: String,
        /// Agents whose view changed since the previous message.
        agents: Vec<AgentView>,
        objects: Vec<ObjectView>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        visitor: Option<Visitor>,
    },
    Event {
        event: Event,
    },
    CommandAck {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        status: AckStatus,
        result: String,
        tick: u64,
    },
    Error {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Command {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        command: UserCommand,
    },
}

impl ServerMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }
}

impl ClientMessage {
    pub fn from_line(line: &str) -> Result<Self, ServerMessage> {
        serde_json::from_str(line.trim()).map_err(|e| ServerMessage::Error {
            message: format!("malformed message: {e}"),
        })
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }
}

fn agent_views(engine: &Engine) -> Vec<AgentView> {
    let w = &engine.world;
    w.agents
        .iter()
        .map(|a| AgentView {
            id: a.id,
            name: a.identity.name.clone(),
            tile: a.tile,
            action: a.action.clone(),
            emoji: a.emoji.clone(),
            location: a.object.map(|o| w.tree.path_string(o)),
        })
        .collect()
}

fn object_views(engine: &Engine) -> Vec<ObjectView> {
    let tree = &engine.world.tree;
    tree.objects()
        .map(|id| ObjectView {
            path: tree.path_string(id),
            status: tree.node(id).status.clone().unwrap_or_default(),
        })
        .collect()
}

pub fn state_view(engine: &Engine) -> StateView {
    let w = &engine.world;
    let details = w
        .agents
        .iter()
        .map(|a| AgentDetail {
            id: a.id,
            memory_tail: a.stream.recent(MEMORY_TAIL).iter().map(|m| m.description.clone()).collect(),
            plan: a
                .plan
                .as_ref()
                .map(|p| {
                    p.day_entries()
                        .map(|e| format!("{} {}", w.calendar.clock_time(e.start), e.description))
                        .collect()
                })
                .unwrap_or_default(),
        })
        .collect();
    StateView {
        tick: w.tick,
        clock: w.calendar.long_datetime(w.now),
        map: engine.scenario().map.clone(),
        agents: agent_views(engine),
        details,
        objects: object_views(engine),
        visitor: w.visitor.clone(),
    }
}

/// One connected simulation: the engine, queued commands and the last view
/// sent, from which deltas are computed.
pub struct Session {
    pub engine: Engine,
    queue: VecDeque<(Option<u64>, UserCommand)>,
    cursor: usize,
    agents: BTreeMap<u32, AgentView>,
    objects: BTreeMap<String, String>,
    visitor: Option<Visitor>,
    /// Forward model exchanges as events (they can be large).
    pub forward_exchanges: bool,
}

impl Session {
    pub fn new(mut engine: Engine) -> Self {
        engine.start();
        let mut s = Self {
            engine,
            queue: VecDeque::new(),
            cursor: 0,
            agents: BTreeMap::new(),
            objects: BTreeMap::new(),
            visitor: None,
            forward_exchanges: false,
        };
        s.cursor = s.engine.events().len();
        s.remember_view();
        s
    }

    fn remember_view(&mut self) {
        self.agents = agent_views(&self.engine).into_iter().map(|a| (a.id, a)).collect();
        self.objects = object_views(&self.engine).into_iter().map(|o| (o.path, o.status)).collect();
        self.visitor = self.engine.world.visitor.clone();
    }

    /// Full state, for a client that just connected or needs to resync.
    pub fn snapshot(&self) -> ServerMessage {
        ServerMessage::StateSnapshot {
            state: state_view(&self.engine),
        }
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Handles one client line; the reply is an immediate ack or error.
    pub fn receive(&mut self, line: &str) -> ServerMessage {
        match ClientMessage::from_line(line) {
            Ok(ClientMessage::Command { id, command }) => {
                self.queue.push_back((id, command));
                ServerMessage::CommandAck {
                    id,
                    status: AckStatus::Queued,
                    result: String::new(),
                    tick: self.engine.world.tick,
                }
            }
            Err(e) => e,
        }
    }

    /// Applies queued commands, steps one tick and returns what clients
    /// should receive, in order.
    pub fn tick(&mut self) -> Vec<ServerMessage> {
        let mut out = Vec::new();
        let mut acks = Vec::new();
        while let Some((id, command)) = self.queue.pop_front() {
            let outcome = self.engine.apply_command(command);
            acks.push(ServerMessage::CommandAck {
                id,
                status: if outcome.accepted { AckStatus::Applied } else { AckStatus::Rejected },
                result: outcome.result,
                tick: self.engine.world.tick,
            });
        }
        self.engine.step();
        out.extend(acks);
        out.extend(self.drain_events());
        out.push(self.delta());
        out
    }

    fn drain_events(&mut self) -> Vec<ServerMessage> {
        let events = &self.engine.events()[self.cursor..];
        let out = events
            .iter()
            .filter(|e| self.forward_exchanges || !matches!(e.body, EventBody::ModelExchangeRef { .. }))
            .map(|e| ServerMessage::Event { event: e.clone() })
            .collect();
        self.cursor = self.engine.events().len();
        out
    }

    fn delta(&mut self) -> ServerMessage {
        let agents: Vec<AgentView> = agent_views(&self.engine)
            .into_iter()
            .filter(|a| self.agents.get(&a.id) != Some(a))
            .collect();
        let objects: Vec<ObjectView> = object_views(&self.engine)
            .into_iter()
            .filter(|o| self.objects.get(&o.path) != Some(&o.status))
            .collect();
        let visitor = (self.engine.world.visitor != self.visitor)
            .then(|| self.engine.world.visitor.clone())
            .flatten();
        self.remember_view();
        let w = &self.engine.world;
        ServerMessage::StateDelta {
            tick: w.tick,
            clock: w.calendar.long_datetime(w.now),
            agents,
            objects,
            visitor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shapes() {
        let m = ClientMessage::from_line(r#"{"type":"command","id":3,"command":{"kind":"inner_voice","agent":"John Lin","text":"run for mayor"}}"#).unwrap();
        assert_eq!(
            m,
            ClientMessage::Command {
                id: Some(3),
                command: UserCommand::InnerVoice {
                    agent: "John Lin".into(),
                    text: "run for mayor".into()
                }
            }
        );
        assert!(matches!(ClientMessage::from_line("{\"type\":\"dance\"}"), Err(ServerMessage::Error { .. })));
        let ack = ServerMessage::CommandAck {
            id: None,
            status: AckStatus::Queued,
            result: String::new(),
            tick: 4,
        };
        assert_eq!(ack.to_line(), r#"{"type":"command_ack","status":"queued","result":"","tick":4}"#);
    }
}
