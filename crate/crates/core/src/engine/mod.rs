//! Authoritative world state and the deterministic tick loop.
//!
//! A tick runs in fixed phases: every awake agent perceives (ascending id),
//! then each agent plans, reflects, maybe reacts, follows its plan and takes
//! one step; finally objects reached this tick change state and the clock
//! advances. Every model exchange is appended to the event log right before
//! the event it led to.

pub mod log;
pub mod replay;

use std::collections::BTreeMap;

use ::log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, Ctx, ReactionPlan};
use crate::clock::{Calendar, GameTime};
use crate::commands::{UserCommand, DEFAULT_PERSONA};
use crate::config::{Diagnostic, EngineConfig};
use crate::dialogue::{decide_reaction, run_dialogue, Percept};
use crate::environment::path::{chebyshev, path_find, CollisionMap, Tile};
use crate::environment::{EnvironmentTree, NodeId};
use crate::eval::{fill_name, Condition, InterviewAnswer, InterviewQuestion, Interviewer};
use crate::events::{Event, EventBody, PerceptSource};
use crate::gateway::{Gateway, Script, TemplateId};
use crate::memory::{record, record_with_importance, Importance, MemoryKind, MemoryObject};
use crate::reflection::{reflection_due, run_reflection};
use crate::scenario::{Scenario, ScenarioError};
use crate::slots;

pub use self::log::{EventLog, LogError, LogHeader};
pub use self::replay::{replay, ReplayError, ReplayOutcome};

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;
pub const FALLBACK_EMOJI: &str = "💭";
pub const VISITOR_NAME: &str = "Visitor";
/// Minutes a non-conversational reaction occupies the plan.
pub const REACTION_MINUTES: i64 = 15;
pub const CONVERSATION_MINUTES: (i64, i64) = (5, 30);

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("invalid configuration: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Config(Vec<Diagnostic>),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("snapshot schema_version {found} is not supported (expected {expected})")]
    SnapshotSchema { found: u32, expected: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visitor {
    pub name: String,
    pub tile: Tile,
    #[serde(default)]
    pub path: Vec<Tile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EngineOptions {
    /// Run the scenario's measurement interviews at start and finish.
    pub measure: bool,
    /// Keep full prompt text on logged exchanges.
    pub keep_prompts: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandOutcome {
    pub accepted: bool,
    pub result: String,
}

impl CommandOutcome {
    fn ok(result: impl Into<String>) -> Self {
        Self {
            accepted: true,
            result: result.into(),
        }
    }

    fn rejected(result: impl Into<String>) -> Self {
        Self {
            accepted: false,
            result: result.into(),
        }
    }
}

pub struct World {
    pub tick: u64,
    pub now: GameTime,
    pub calendar: Calendar,
    pub map: CollisionMap,
    pub tree: EnvironmentTree,
    pub agents: Vec<Agent>,
    pub visitor: Option<Visitor>,
    /// Action text → emoji.
    pub emoji: BTreeMap<String, String>,
    /// Agent whose action last set each object's status.
    pub object_actor: BTreeMap<NodeId, u32>,
    pub next_dialogue: u64,
}

/// What a perceived entity is, for reaction handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Agent(usize),
    Object(NodeId),
    Other,
}

#[derive(Debug, Clone)]
struct Sensed {
    percept: Percept,
    target: Target,
    /// Change caused by the perceiver itself; remembered but never reacted to.
    own: bool,
}

/// Serializable world state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema_version: u32,
    pub seed: u64,
    pub tick: u64,
    pub now: GameTime,
    pub started: bool,
    pub event_cursor: u64,
    pub config: EngineConfig,
    pub scenario: Scenario,
    pub agents: Vec<Agent>,
    /// Object path → current status.
    pub objects: BTreeMap<String, String>,
    #[serde(default)]
    pub object_actor: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visitor: Option<Visitor>,
    pub emoji: BTreeMap<String, String>,
    pub next_dialogue: u64,
}

impl Snapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| EngineError::Snapshot(e.to_string()))?;
        let found = raw.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != SNAPSHOT_SCHEMA_VERSION {
            return Err(EngineError::SnapshotSchema {
                found,
                expected: SNAPSHOT_SCHEMA_VERSION,
            });
        }
        serde_json::from_value(raw).map_err(|e| EngineError::Snapshot(e.to_string()))
    }
}

/// Emoji replies are 1–3 symbols with no letters, digits or punctuation.
pub fn clean_emoji(reply: &str) -> Option<String> {
    let s: String = reply.chars().filter(|c| !c.is_whitespace()).collect();
    let visible = s.chars().filter(|&c| c != '\u{fe0f}' && c != '\u{200d}').count();
    let bad = s.chars().any(|c| c.is_alphanumeric() || c.is_ascii_punctuation());
    (1..=3).contains(&visible).then_some(s).filter(|_| !bad)
}

fn clean_status(reply: &str) -> Option<String> {
    let s = reply
        .lines()
        .next()
        .unwrap_or("")
        .trim()
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '.')
        .trim();
    (!s.is_empty() && s.len() <= 80).then(|| s.to_string())
}

fn mentions(text: &str, agent: &Agent) -> bool {
    let t = text.to_lowercase();
    t.contains(&agent.identity.first_name().to_lowercase())
}

pub struct Engine {
    pub world: World,
    config: EngineConfig,
    scenario: Scenario,
    seed: u64,
    options: EngineOptions,
    gateway: Gateway,
    events: Vec<Event>,
    /// Sequence number of `events[0]`; non-zero after a restore.
    seq_base: u64,
    started: bool,
}

impl Engine {
    pub fn new(
        scenario: Scenario,
        config: EngineConfig,
        mut gateway: Gateway,
        seed: u64,
        options: EngineOptions,
    ) -> Result<Self, EngineError> {
        let problems = config.validate();
        if !problems.is_empty() {
            return Err(EngineError::Config(problems));
        }
        let built = scenario.build()?;
        gateway.keep_prompts(options.keep_prompts);
        Ok(Self {
            world: World {
                tick: 0,
                now: GameTime::ZERO,
                calendar: built.calendar,
                map: built.map,
                tree: built.tree,
                agents: built.agents,
                visitor: None,
                emoji: BTreeMap::new(),
                object_actor: BTreeMap::new(),
                next_dialogue: 0,
            },
            config,
            scenario,
            seed,
            options,
            gateway,
            events: Vec::new(),
            seq_base: 0,
            started: false,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn options(&self) -> EngineOptions {
        self.options
    }

    /// Events produced by this engine instance (after a restore, only the
    /// ones since the snapshot).
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn gateway_mut(&mut self) -> &mut Gateway {
        &mut self.gateway
    }

    /// Swaps in another model backend, returning the previous gateway.
    pub fn set_gateway(&mut self, mut gateway: Gateway) -> Gateway {
        gateway.keep_prompts(self.options.keep_prompts);
        gateway.set_context(self.world.tick, None);
        std::mem::replace(&mut self.gateway, gateway)
    }

    pub fn is_started(&self) -> bool {
        self.started
    }

    pub fn agent_index(&self, name: &str) -> Option<usize> {
        let agents = &self.world.agents;
        if let Some(i) = agents.iter().position(|a| a.identity.name == name) {
            return Some(i);
        }
        let lower = name.to_lowercase();
        if let Some(i) = agents.iter().position(|a| a.identity.name.to_lowercase() == lower) {
            return Some(i);
        }
        let firsts: Vec<usize> = (0..agents.len())
            .filter(|&i| agents[i].identity.first_name().to_lowercase() == lower)
            .collect();
        (firsts.len() == 1).then(|| firsts[0])
    }

    pub fn header(&self, script: Option<Script>) -> LogHeader {
        LogHeader {
            schema_version: crate::events::LOG_SCHEMA_VERSION,
            seed: self.seed,
            ticks: self.world.tick,
            gateway: self.gateway.backend_kind(),
            measure: self.options.measure,
            keep_prompts: self.options.keep_prompts,
            config: self.config.clone(),
            scenario: self.scenario.clone(),
            script,
        }
    }

    /// The log so far, headed by the current tick count.
    pub fn to_log(&self, script: Option<Script>) -> EventLog {
        EventLog {
            header: self.header(script),
            events: self.events.clone(),
        }
    }

    fn flush_exchanges(&mut self) {
        for exchange in self.gateway.drain_exchanges() {
            self.push(EventBody::ModelExchangeRef { exchange });
        }
    }

    fn push(&mut self, body: EventBody) {
        self.events.push(Event {
            seq: self.seq_base + self.events.len() as u64,
            tick: self.world.tick,
            body,
        });
    }

    fn emit(&mut self, body: EventBody) {
        self.flush_exchanges();
        self.push(body);
    }

    fn emit_all(&mut self, bodies: Vec<EventBody>) {
        for b in bodies {
            self.emit(b);
        }
    }

    /// Seed memories, initial actions and start-of-run measurements.
    pub fn start(&mut self) {
        if self.started {
            return;
        }
        self.started = true;
        self.gateway.set_context(self.world.tick, None);
        for i in 0..self.world.agents.len() {
            let id = self.world.agents[i].id;
            self.gateway.set_agent(Some(id));
            for phrase in self.world.agents[i].identity.seed_phrases() {
                self.remember(i, &phrase, PerceptSource::Seed, None);
            }
            let action = self.world.agents[i].action.clone();
            let emoji = self.emoji_for(&action);
            self.world.agents[i].emoji = emoji.clone();
            let location = self.world.agents[i].object.map(|o| self.world.tree.path_string(o));
            self.emit(EventBody::ActionStart {
                agent: id,
                action,
                emoji,
                location,
            });
        }
        if self.options.measure {
            self.measure("start");
        }
        self.flush_exchanges();
    }

    /// End-of-run measurements.
    pub fn finish(&mut self) {
        if self.options.measure {
            self.measure("end");
        }
        self.flush_exchanges();
    }

    /// start, `ticks` steps, finish.
    pub fn run(&mut self, ticks: u64) {
        self.start();
        for _ in 0..ticks {
            self.step();
        }
        self.finish();
    }

    /// Records an observation and logs it as a percept.
    fn remember(&mut self, i: usize, text: &str, source: PerceptSource, importance: Option<u8>) -> Option<MemoryObject<f64>> {
        let now = self.world.now;
        let agent = &mut self.world.agents[i];
        let result = match importance {
            Some(value) => record_with_importance(
                &mut agent.stream,
                &mut self.gateway,
                MemoryKind::Observation,
                text,
                now,
                Importance { value, defaulted: false },
                Vec::new(),
            ),
            None => record(&mut agent.stream, &mut self.gateway, MemoryKind::Observation, text, now, Vec::new()),
        };
        match result {
            Ok(m) => {
                let id = agent.id;
                self.emit(EventBody::Percept {
                    agent: id,
                    source,
                    memory_id: m.id,
                    importance: m.importance,
                    text: m.description.clone(),
                });
                Some(m)
            }
            Err(e) => {
                warn!("{}: memory {text:?} dropped: {e}", agent.identity.name);
                None
            }
        }
    }

    /// Emoji for an action, cached per distinct text.
    pub fn emoji_for(&mut self, action: &str) -> String {
        if let Some(hit) = self.world.emoji.get(action) {
            return hit.clone();
        }
        match self.gateway.complete(TemplateId::Emoji, &slots! {"action" => action}) {
            Ok(reply) => {
                let e = clean_emoji(&reply).unwrap_or_else(|| FALLBACK_EMOJI.to_string());
                self.world.emoji.insert(action.to_string(), e.clone());
                e
            }
            Err(e) => {
                warn!("emoji for {action:?} failed: {e}");
                FALLBACK_EMOJI.to_string()
            }
        }
    }

    /// Advances the world by one tick.
    pub fn step(&mut self) {
        if !self.started {
            self.start();
        }
        let tick = self.world.tick;
        self.gateway.set_context(tick, None);
        let n = self.world.agents.len();

        let mut sensed = Vec::with_capacity(n);
        for i in 0..n {
            sensed.push(self.perceive(i));
        }

        let mut transitions = Vec::new();
        for (i, percepts) in sensed.into_iter().enumerate() {
            let id = self.world.agents[i].id;
            self.gateway.set_agent(Some(id));
            self.plan_and_reflect(i);
            self.react(i, percepts);
            let changed = self.follow_plan(i);
            let arrived = self.walk(i);
            let agent = &self.world.agents[i];
            if let Some(o) = agent.object {
                if arrived || (changed && agent.destination == Some(o)) {
                    transitions.push((i, o));
                }
            }
        }

        for (i, o) in transitions {
            self.transition(i, o);
        }
        self.walk_visitor();

        self.flush_exchanges();
        self.world.tick += 1;
        self.world.now = GameTime(self.world.tick as i64 * self.config.tick_minutes);
    }

    fn perceive(&mut self, i: usize) -> Vec<Sensed> {
        let now = self.world.now;
        let radius = self.config.radius;
        let w = &self.world;
        let me = &w.agents[i];
        if me.is_asleep() {
            self.world.agents[i].seen_agents.clear();
            return Vec::new();
        }
        let area = w.tree.area_at(me.tile);
        let visible = |t: Tile| chebyshev(t, me.tile) <= radius && w.tree.area_at(t) == area;

        let mut in_view = BTreeMap::new();
        let mut agents_seen = Vec::new();
        for (j, other) in w.agents.iter().enumerate() {
            if j == i || !visible(other.tile) {
                continue;
            }
            in_view.insert(other.id, other.action.clone());
            if me.seen_agents.get(&other.id) != Some(&other.action) {
                agents_seen.push((j, other.id, other.status_text(), other.identity.name.clone()));
            }
        }
        let mut objects_seen = Vec::new();
        let mut refreshed = Vec::new();
        if area.is_some() {
            for o in w.tree.objects() {
                let node = w.tree.node(o);
                let Some(tile) = node.tile else { continue };
                if !visible(tile) {
                    continue;
                }
                refreshed.push(o);
                let status = node.status.clone().unwrap_or_default();
                let known = me.view.contains(o);
                if known && me.view.remembered_status(o) == Some(status.as_str()) {
                    continue;
                }
                let own = w.object_actor.get(&o) == Some(&me.id);
                objects_seen.push((o, w.tree.describe_object(o, &status), node.name.clone(), own, known));
            }
        }

        let mut out = Vec::new();
        self.world.agents[i].seen_agents = in_view;
        for (j, id, text, name) in agents_seen {
            self.remember(i, &text, PerceptSource::Perception, None);
            out.push(Sensed {
                percept: Percept {
                    key: format!("agent:{id}"),
                    subject: name,
                    text,
                },
                target: Target::Agent(j),
                own: false,
            });
        }
        for &o in &refreshed {
            let tree = &self.world.tree;
            self.world.agents[i].view.learn(tree, o, now);
        }
        for (o, text, name, own, known) in objects_seen {
            // first sightings of unchanged objects are learned silently
            if !known && self.world.tree.node(o).default_status == self.world.tree.node(o).status {
                continue;
            }
            self.remember(i, &text, PerceptSource::Perception, None);
            out.push(Sensed {
                percept: Percept {
                    key: format!("object:{o}"),
                    subject: name,
                    text,
                },
                target: Target::Object(o),
                own,
            });
        }
        out
    }

    fn plan_and_reflect(&mut self, i: usize) {
        let now = self.world.now;
        let mut bodies = Vec::new();
        {
            let ctx = Ctx {
                tree: &self.world.tree,
                calendar: &self.world.calendar,
                config: &self.config,
            };
            let agent = &mut self.world.agents[i];
            if agent.plan.as_ref().is_none_or(|p| p.day_start != now.day_start()) {
                agent.plan_day(&mut self.gateway, &ctx, now, &mut bodies);
            }
            agent.ensure_decomposed(&mut self.gateway, &ctx, now, &mut bodies);
            if reflection_due(agent.stream.importance_accumulator, self.config.threshold) {
                let outcome = run_reflection(
                    &mut agent.stream,
                    &mut self.gateway,
                    &self.config.retrieval(),
                    &agent.identity.name,
                    now,
                    self.config.budget,
                );
                for m in outcome.memories {
                    bodies.push(EventBody::Reflection {
                        agent: agent.id,
                        memory_id: m.id,
                        text: m.description,
                        citations: m.citations,
                    });
                }
            }
        }
        self.emit_all(bodies);
    }

    fn react(&mut self, i: usize, sensed: Vec<Sensed>) {
        let now = self.world.now;
        {
            let a = &self.world.agents[i];
            if a.is_asleep() || a.in_conversation(now) {
                return;
            }
        }
        for s in sensed {
            if s.own {
                continue;
            }
            let agent = &mut self.world.agents[i];
            if let Some(&last) = agent.reaction_checks.get(&s.percept.key) {
                if now - last < self.config.reaction_cooldown {
                    continue;
                }
            }
            agent.reaction_checks.insert(s.percept.key.clone(), now);
            let decision = {
                let ctx = Ctx {
                    tree: &self.world.tree,
                    calendar: &self.world.calendar,
                    config: &self.config,
                };
                decide_reaction(agent, &mut self.gateway, &ctx, &s.percept, now)
            };
            if let Some(reaction) = decision.reaction.filter(|_| decision.should_react) {
                self.handle_reaction(i, &s, &reaction);
                return;
            }
        }
    }

    fn can_converse(&self, i: usize, j: usize) -> bool {
        let now = self.world.now;
        let (a, b) = (&self.world.agents[i], &self.world.agents[j]);
        let cooled = a
            .last_dialogue
            .get(&b.id)
            .is_none_or(|&t| now - t >= self.config.dialogue_cooldown);
        !b.is_asleep() && !a.in_conversation(now) && !b.in_conversation(now) && cooled
    }

    fn handle_reaction(&mut self, i: usize, s: &Sensed, reaction: &str) {
        let intent = format!("{} decided to {}", self.world.agents[i].identity.name, reaction);
        self.remember(i, &intent, PerceptSource::Intent, None);
        if let Target::Agent(j) = s.target {
            if mentions(reaction, &self.world.agents[j]) && self.can_converse(i, j) && self.converse(i, j, reaction, &s.percept.text) {
                return;
            }
        }
        let location = match s.target {
            Target::Object(o) => Some(self.world.tree.path_string(o)),
            _ => None,
        };
        self.replan(
            i,
            ReactionPlan {
                description: reaction.to_string(),
                duration: REACTION_MINUTES,
                location,
            },
        );
    }

    fn replan(&mut self, i: usize, reaction: ReactionPlan) {
        let now = self.world.now;
        let mut bodies = Vec::new();
        {
            let ctx = Ctx {
                tree: &self.world.tree,
                calendar: &self.world.calendar,
                config: &self.config,
            };
            let agent = &mut self.world.agents[i];
            self.gateway.set_agent(Some(agent.id));
            agent.regenerate_plan(&mut self.gateway, &ctx, now, reaction, &mut bodies);
        }
        self.emit_all(bodies);
    }

    /// Runs a conversation; false when nobody managed to speak.
    fn converse(&mut self, i: usize, j: usize, intent: &str, observation: &str) -> bool {
        let now = self.world.now;
        let dialogue = {
            let ctx = Ctx {
                tree: &self.world.tree,
                calendar: &self.world.calendar,
                config: &self.config,
            };
            run_dialogue(&mut self.world.agents, i, j, &mut self.gateway, &ctx, intent, observation, now)
        };
        self.gateway.set_agent(Some(self.world.agents[i].id));
        if dialogue.turns.is_empty() {
            return false;
        }
        let did = self.world.next_dialogue;
        self.world.next_dialogue += 1;
        let [pa, pb] = dialogue.participants;
        let last = dialogue.turns.len() - 1;
        for (k, t) in dialogue.turns.iter().enumerate() {
            self.emit(EventBody::DialogueTurn {
                dialogue: did,
                speaker: t.speaker,
                listener: if t.speaker == pa { pb } else { pa },
                utterance: t.utterance.clone(),
                end: k == last,
            });
        }
        let (na, nb) = (self.world.agents[i].identity.name.clone(), self.world.agents[j].identity.name.clone());
        let transcript = dialogue.transcript(|id| if id == pa { na.clone() } else { nb.clone() });
        let text = format!("Conversation between {na} and {nb}:\n{transcript}");
        let minutes = (dialogue.turns.len() as i64).clamp(CONVERSATION_MINUTES.0, CONVERSATION_MINUTES.1);
        for (me, other, other_name) in [(i, j, nb.clone()), (j, i, na.clone())] {
            self.gateway.set_agent(Some(self.world.agents[me].id));
            self.remember(me, &text, PerceptSource::Dialogue, None);
            let other_id = self.world.agents[other].id;
            let agent = &mut self.world.agents[me];
            agent.conversing_until = Some(now + minutes);
            agent.last_dialogue.insert(other_id, now);
            self.replan(
                me,
                ReactionPlan {
                    description: format!("conversing with {other_name}"),
                    duration: minutes,
                    location: None,
                },
            );
        }
        self.gateway.set_agent(Some(self.world.agents[i].id));
        true
    }

    /// Syncs the current action with the plan; true when the action text changed.
    fn follow_plan(&mut self, i: usize) -> bool {
        let now = self.world.now;
        let agent = &self.world.agents[i];
        let Some(leaf) = agent.plan.as_ref().and_then(|p| p.active_leaf(now)).cloned() else {
            return false;
        };
        if agent.action_entry == Some(leaf.id) {
            return false;
        }
        let id = agent.id;
        let changed = leaf.description != agent.action;
        self.world.agents[i].action_entry = Some(leaf.id);
        if changed {
            let old = std::mem::replace(&mut self.world.agents[i].action, leaf.description.clone());
            self.emit(EventBody::ActionEnd { agent: id, action: old });
            let emoji = self.emoji_for(&leaf.description);
            self.world.agents[i].emoji = emoji.clone();
            self.emit(EventBody::ActionStart {
                agent: id,
                action: leaf.description.clone(),
                emoji,
                location: leaf.location.clone(),
            });
        }
        let dest = leaf
            .location
            .as_deref()
            .and_then(|l| self.world.tree.resolve_object(l).ok());
        if dest != self.world.agents[i].destination {
            if self.world.agents[i].object.is_some() && self.world.agents[i].object != dest {
                self.release(i);
            }
            let from = self.world.agents[i].tile;
            let path = match dest.and_then(|d| self.world.tree.node(d).tile) {
                Some(to) => path_find(&self.world.map, from, to).unwrap_or_else(|e| {
                    warn!("{}: {e}", self.world.agents[i].identity.name);
                    Vec::new()
                }),
                None => Vec::new(),
            };
            let agent = &mut self.world.agents[i];
            agent.destination = dest;
            agent.path = path;
        }
        changed
    }

    fn release(&mut self, i: usize) {
        let Some(o) = self.world.agents[i].object.take() else { return };
        let me = self.world.agents[i].id;
        if self.world.agents.iter().any(|a| a.id != me && a.object == Some(o)) {
            return;
        }
        self.world.object_actor.remove(&o);
        let node = self.world.tree.node(o);
        if let Some(default) = node.default_status.clone() {
            if node.status.as_deref() != Some(default.as_str()) {
                self.world.tree.set_status(o, default.clone());
                let object = self.world.tree.path_string(o);
                self.emit(EventBody::ObjectStatus {
                    object,
                    status: default,
                    agent: None,
                });
            }
        }
    }

    /// One tile along the current path; true on arrival at the destination object.
    fn walk(&mut self, i: usize) -> bool {
        let agent = &self.world.agents[i];
        let id = agent.id;
        if let Some(&next) = agent.path.first() {
            let from = agent.tile;
            self.world.agents[i].path.remove(0);
            self.world.agents[i].tile = next;
            self.emit(EventBody::Move { agent: id, from, to: next });
        }
        let agent = &mut self.world.agents[i];
        match agent.destination {
            Some(d) if agent.object != Some(d) && agent.path.is_empty() && self.world.tree.node(d).tile == Some(agent.tile) => {
                agent.object = Some(d);
                true
            }
            _ => false,
        }
    }

    fn transition(&mut self, i: usize, o: NodeId) {
        let agent = &self.world.agents[i];
        let node = self.world.tree.node(o);
        let status = node.status.clone().unwrap_or_default();
        let location = node.parent.map(|p| self.world.tree.node(p).name.clone()).unwrap_or_default();
        let slots = slots! {
            "object" => node.name,
            "location" => location,
            "status" => status,
            "agent" => agent.identity.name,
            "action" => agent.action,
        };
        let id = agent.id;
        self.gateway.set_agent(Some(id));
        match self.gateway.complete(TemplateId::ObjectState, &slots) {
            Ok(reply) => {
                if let Some(next) = clean_status(&reply).filter(|s| *s != status) {
                    self.world.tree.set_status(o, next.clone());
                    self.world.object_actor.insert(o, id);
                    let object = self.world.tree.path_string(o);
                    self.emit(EventBody::ObjectStatus {
                        object,
                        status: next,
                        agent: Some(id),
                    });
                }
            }
            Err(e) => warn!("object state for {} failed: {e}", self.world.tree.path_string(o)),
        }
    }

    fn walk_visitor(&mut self) {
        if let Some(v) = &mut self.world.visitor {
            if !v.path.is_empty() {
                v.tile = v.path.remove(0);
            }
        }
    }

    /// Applies a user command at the current tick boundary and logs it.
    pub fn apply_command(&mut self, command: UserCommand) -> CommandOutcome {
        if !self.started {
            self.start();
        }
        self.gateway.set_context(self.world.tick, None);
        let outcome = match &command {
            UserCommand::Interview {
                agent,
                question,
                persona,
                condition,
            } => self.interview(agent, question, persona, *condition),
            UserCommand::InnerVoice { agent, text } => self.inner_voice(agent, text),
            UserCommand::ObjectRewrite { text } => match self.world.tree.apply_rewrite(text) {
                Ok((o, status)) => {
                    self.world.object_actor.remove(&o);
                    let object = self.world.tree.path_string(o);
                    self.emit(EventBody::ObjectStatus {
                        object: object.clone(),
                        status: status.clone(),
                        agent: None,
                    });
                    CommandOutcome::ok(format!("{object} is {status}"))
                }
                Err(e) => CommandOutcome::rejected(e.to_string()),
            },
            UserCommand::EmbodyMove { to } => self.embody_move(*to),
            UserCommand::EmbodySay { agent, text } => self.embody_say(agent, text),
        };
        self.emit(EventBody::UserCommand {
            command,
            accepted: outcome.accepted,
            result: outcome.result.clone(),
        });
        outcome
    }

    fn interview(&mut self, agent: &str, question: &str, persona: &str, condition: Condition) -> CommandOutcome {
        let Some(i) = self.agent_index(agent) else {
            return CommandOutcome::rejected(format!("unknown agent {agent:?}"));
        };
        let now = self.world.now;
        self.gateway.set_agent(Some(self.world.agents[i].id));
        let mut interviewer = Interviewer::new(&self.config, &self.world.calendar).annotate("source", "user");
        let answer = interviewer.ask(&self.world.agents[i], &mut self.gateway, question, persona, condition, now, &[]);
        if answer.failed {
            CommandOutcome::rejected("the model did not answer")
        } else {
            CommandOutcome::ok(answer.answer)
        }
    }

    fn inner_voice(&mut self, agent: &str, text: &str) -> CommandOutcome {
        let Some(i) = self.agent_index(agent) else {
            return CommandOutcome::rejected(format!("unknown agent {agent:?}"));
        };
        let text = text.trim();
        if text.is_empty() {
            return CommandOutcome::rejected("inner voice text is empty");
        }
        self.gateway.set_agent(Some(self.world.agents[i].id));
        let name = self.world.agents[i].identity.name.clone();
        let memory = format!("{}'s inner voice: {text}", self.world.agents[i].identity.first_name());
        let importance = self.config.inner_voice_importance;
        if self.remember(i, &memory, PerceptSource::InnerVoice, Some(importance)).is_none() {
            return CommandOutcome::rejected("memory could not be stored");
        }
        let sensed = Sensed {
            percept: Percept {
                key: "inner_voice".into(),
                subject: name,
                text: memory,
            },
            target: Target::Other,
            own: false,
        };
        self.forced_reaction(i, sensed)
    }

    fn forced_reaction(&mut self, i: usize, s: Sensed) -> CommandOutcome {
        let now = self.world.now;
        let decision = {
            let ctx = Ctx {
                tree: &self.world.tree,
                calendar: &self.world.calendar,
                config: &self.config,
            };
            decide_reaction(&mut self.world.agents[i], &mut self.gateway, &ctx, &s.percept, now)
        };
        match decision.reaction.filter(|_| decision.should_react) {
            Some(r) => {
                self.handle_reaction(i, &s, &r);
                CommandOutcome::ok(format!("recorded; {} decided to {r}", self.world.agents[i].identity.name))
            }
            None => CommandOutcome::ok("recorded; no reaction"),
        }
    }

    fn embody_move(&mut self, to: Tile) -> CommandOutcome {
        let map = &self.world.map;
        if !map.in_bounds(to) || map.is_blocked(to) {
            return CommandOutcome::rejected(format!("tile {to:?} is not walkable"));
        }
        match &mut self.world.visitor {
            None => {
                self.world.visitor = Some(Visitor {
                    name: VISITOR_NAME.into(),
                    tile: to,
                    path: Vec::new(),
                });
                CommandOutcome::ok(format!("visitor appears at {to:?}"))
            }
            Some(v) => match path_find(map, v.tile, to) {
                Ok(p) => {
                    let steps = p.len();
                    v.path = p;
                    CommandOutcome::ok(format!("walking to {to:?} ({steps} steps)"))
                }
                Err(e) => CommandOutcome::rejected(e.to_string()),
            },
        }
    }

    fn embody_say(&mut self, agent: &str, text: &str) -> CommandOutcome {
        let Some(i) = self.agent_index(agent) else {
            return CommandOutcome::rejected(format!("unknown agent {agent:?}"));
        };
        let Some(v) = self.world.visitor.clone() else {
            return CommandOutcome::rejected("no visitor in the world; send embody_move first");
        };
        if chebyshev(v.tile, self.world.agents[i].tile) > self.config.radius {
            return CommandOutcome::rejected(format!("{} is out of earshot", self.world.agents[i].identity.name));
        }
        self.gateway.set_agent(Some(self.world.agents[i].id));
        let memory = format!("{} said to {}: \"{}\"", v.name, self.world.agents[i].identity.name, text.trim());
        if self.remember(i, &memory, PerceptSource::Dialogue, None).is_none() {
            return CommandOutcome::rejected("memory could not be stored");
        }
        let sensed = Sensed {
            percept: Percept {
                key: "visitor".into(),
                subject: v.name,
                text: memory,
            },
            target: Target::Other,
            own: false,
        };
        self.forced_reaction(i, sensed)
    }

    /// Agents `i` has talked with, else has seen, else everyone else.
    fn acquaintances(&self, i: usize) -> Vec<String> {
        let me = &self.world.agents[i];
        let others: Vec<&str> = self
            .world
            .agents
            .iter()
            .filter(|a| a.id != me.id)
            .map(|a| a.identity.name.as_str())
            .collect();
        let named_in = |dialogue_only: bool| -> Vec<String> {
            others
                .iter()
                .filter(|n| {
                    me.stream.memories().iter().any(|m| {
                        m.kind == MemoryKind::Observation
                            && (!dialogue_only || m.description.starts_with("Conversation between"))
                            && m.description.contains(*n)
                    })
                })
                .map(|n| n.to_string())
                .collect()
        };
        let talked = named_in(true);
        if !talked.is_empty() {
            return talked;
        }
        let seen = named_in(false);
        if !seen.is_empty() {
            return seen;
        }
        others.into_iter().map(str::to_string).collect()
    }

    /// Asks `agent` every question under `condition`. Bracketed names are
    /// filled with someone the agent has interacted with, chosen by the
    /// engine seed. Exchanges are logged; the world is untouched.
    pub fn interview_battery(&mut self, agent: &str, questions: &[InterviewQuestion], condition: Condition) -> Option<Vec<InterviewAnswer>> {
        let i = self.agent_index(agent)?;
        let pool = self.acquaintances(i);
        let id = self.world.agents[i].id;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (u64::from(id) << 32) ^ self.world.tick);
        let now = self.world.now;
        self.gateway.set_agent(Some(id));
        let mut interviewer = Interviewer::new(&self.config, &self.world.calendar).annotate("source", "battery");
        let mut out = Vec::with_capacity(questions.len());
        for q in questions {
            let text = if q.text.contains('[') && !pool.is_empty() {
                fill_name(&q.text, &pool[rng.gen_range(0..pool.len())])
            } else {
                q.text.clone()
            };
            out.push(interviewer.ask(&self.world.agents[i], &mut self.gateway, &text, DEFAULT_PERSONA, condition, now, &[]));
        }
        self.flush_exchanges();
        Some(out)
    }

    /// Measurement interviews over every agent; answers land in the log as
    /// annotated exchanges.
    fn measure(&mut self, phase: &str) {
        let m = self.scenario.measurements.clone();
        let now = self.world.now;
        let mut interviewer = Interviewer::new(&self.config, &self.world.calendar).annotate("phase", phase);
        for a in &self.world.agents {
            self.gateway.set_agent(Some(a.id));
            if let Some(r) = &m.relationships {
                for b in &self.world.agents {
                    if b.id == a.id {
                        continue;
                    }
                    let q = r.question.replace("{name}", &b.identity.name);
                    interviewer.ask(
                        a,
                        &mut self.gateway,
                        &q,
                        DEFAULT_PERSONA,
                        Condition::Full,
                        now,
                        &[("measurement", "relationship".into()), ("subject", b.identity.name.clone())],
                    );
                }
            }
            for item in &m.items {
                interviewer.ask(
                    a,
                    &mut self.gateway,
                    &item.question,
                    DEFAULT_PERSONA,
                    Condition::Full,
                    now,
                    &[("measurement", "item".into()), ("item", item.key.clone())],
                );
            }
        }
        self.flush_exchanges();
    }

    pub fn snapshot(&self) -> Snapshot {
        let tree = &self.world.tree;
        Snapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            seed: self.seed,
            tick: self.world.tick,
            now: self.world.now,
            started: self.started,
            event_cursor: self.seq_base + self.events.len() as u64,
            config: self.config.clone(),
            scenario: self.scenario.clone(),
            agents: self.world.agents.clone(),
            objects: tree
                .objects()
                .map(|o| (tree.path_string(o), tree.node(o).status.clone().unwrap_or_default()))
                .collect(),
            object_actor: self
                .world
                .object_actor
                .iter()
                .map(|(&o, &a)| (tree.path_string(o), a))
                .collect(),
            visitor: self.world.visitor.clone(),
            emoji: self.world.emoji.clone(),
            next_dialogue: self.world.next_dialogue,
        }
    }

    /// Rebuilds an engine from a snapshot; memory embeddings are recomputed
    /// with `gateway` and those embedding exchanges are not logged.
    pub fn restore(snapshot: Snapshot, mut gateway: Gateway, options: EngineOptions) -> Result<Self, EngineError> {
        if snapshot.schema_version != SNAPSHOT_SCHEMA_VERSION {
            return Err(EngineError::SnapshotSchema {
                found: snapshot.schema_version,
                expected: SNAPSHOT_SCHEMA_VERSION,
            });
        }
        let embeddings: Vec<Vec<Vec<f64>>> = snapshot
            .agents
            .iter()
            .map(|a| a.stream.memories().iter().map(|m| gateway.embed(&m.description)).collect())
            .collect();
        gateway.drain_exchanges();
        let mut engine = Engine::new(snapshot.scenario, snapshot.config, gateway, snapshot.seed, options)?;
        for (path, status) in &snapshot.objects {
            let o = engine
                .world
                .tree
                .resolve_object(path)
                .map_err(|e| EngineError::Snapshot(e.to_string()))?;
            engine.world.tree.set_status(o, status.clone());
        }
        for (path, a) in &snapshot.object_actor {
            let o = engine
                .world
                .tree
                .resolve_object(path)
                .map_err(|e| EngineError::Snapshot(e.to_string()))?;
            engine.world.object_actor.insert(o, *a);
        }
        let mut agents = snapshot.agents;
        for (a, embs) in agents.iter_mut().zip(embeddings) {
            for (m, e) in a.stream.memories_mut().iter_mut().zip(embs) {
                m.embedding = e;
            }
        }
        engine.world.agents = agents;
        engine.world.tick = snapshot.tick;
        engine.world.now = snapshot.now;
        engine.world.visitor = snapshot.visitor;
        engine.world.emoji = snapshot.emoji;
        engine.world.next_dialogue = snapshot.next_dialogue;
        engine.started = snapshot.started;
        engine.seq_base = snapshot.event_cursor;
        Ok(engine)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emoji_validation() {
        assert_eq!(clean_emoji(" ✍️📓 ").as_deref(), Some("✍️📓"));
        assert_eq!(clean_emoji("pen"), None);
        assert_eq!(clean_emoji(""), None);
        assert_eq!(clean_emoji("😀😀😀😀"), None);
    }

    #[test]
    fn status_cleanup() {
        assert_eq!(clean_status("\"brewing coffee.\"\nextra"), Some("brewing coffee".into()));
        assert_eq!(clean_status("  "), None);
    }
}
