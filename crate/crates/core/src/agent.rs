//! Per-agent state: identity, memory, view of the world, plans and the
//! bookkeeping the engine needs between ticks.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::clock::{Calendar, GameTime};
use crate::config::EngineConfig;
use crate::environment::path::Tile;
use crate::environment::{choose_location, AgentEnvView, EnvironmentTree, LocationRequest, NodeId};
use crate::events::{EventBody, PlanCause, PlanRecord};
use crate::gateway::{CallMeta, Gateway, TemplateId};
use crate::memory::{cite, record, MemoryKind, MemoryObject, MemoryStream, RetrievalQuery};
use crate::planning::{
    decompose, decomposition_slots, fallback_items, request_day_items, revision_items, DayPlan, PlanEntry, PlanItem,
    PlanLevel,
};
use crate::slots;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentIdentity {
    pub name: String,
    pub age: u32,
    pub traits: String,
    /// Semicolon-delimited seed paragraph; each phrase becomes a memory.
    pub seed: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home: Option<String>,
    #[serde(default)]
    pub known_areas: Vec<String>,
}

impl AgentIdentity {
    pub fn first_name(&self) -> &str {
        self.name.split_whitespace().next().unwrap_or(&self.name)
    }

    pub fn seed_phrases(&self) -> Vec<String> {
        self.seed
            .split(';')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::to_string)
            .collect()
    }

    /// "Name: X (age: N)\nInnate traits: ..."
    pub fn header(&self) -> String {
        format!("Name: {} (age: {})\nInnate traits: {}", self.name, self.age, self.traits)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryCache {
    pub text: String,
    pub computed_at: GameTime,
}

mod stream_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::memory::{MemoryObject, MemoryStream};

    #[derive(Serialize, Deserialize)]
    struct Stored {
        agent_id: u32,
        importance_accumulator: u32,
        memories: Vec<MemoryObject<f64>>,
    }

    pub fn serialize<S: Serializer>(s: &MemoryStream<f64>, ser: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Borrowed<'a> {
            agent_id: u32,
            importance_accumulator: u32,
            memories: &'a [MemoryObject<f64>],
        }
        Borrowed {
            agent_id: s.agent_id,
            importance_accumulator: s.importance_accumulator,
            memories: s.memories(),
        }
        .serialize(ser)
    }

    /// Embeddings are left empty; the loader recomputes them.
    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<MemoryStream<f64>, D::Error> {
        let s = Stored::deserialize(de)?;
        Ok(MemoryStream::from_parts(s.agent_id, s.memories, s.importance_accumulator))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: u32,
    pub identity: AgentIdentity,
    #[serde(with = "stream_serde")]
    pub stream: MemoryStream<f64>,
    pub view: AgentEnvView,
    pub plan: Option<DayPlan>,
    /// Broad strokes of the previous day, for the next day's prompt.
    #[serde(default)]
    pub previous_day: String,
    pub tile: Tile,
    #[serde(default)]
    pub path: Vec<Tile>,
    #[serde(default)]
    pub destination: Option<NodeId>,
    pub action: String,
    #[serde(default)]
    pub action_entry: Option<u32>,
    pub emoji: String,
    /// Object the agent is interacting with.
    #[serde(default)]
    pub object: Option<NodeId>,
    #[serde(default)]
    pub summary: Option<SummaryCache>,
    /// Last reaction check per observed entity.
    #[serde(default)]
    pub reaction_checks: BTreeMap<String, GameTime>,
    /// Agents in view at the last perception, with what they were doing.
    #[serde(default)]
    pub seen_agents: BTreeMap<u32, String>,
    #[serde(default)]
    pub conversing_until: Option<GameTime>,
    #[serde(default)]
    pub last_dialogue: BTreeMap<u32, GameTime>,
}

/// What a reaction does to the plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactionPlan {
    pub description: String,
    pub duration: i64,
    pub location: Option<String>,
}

/// Shared read-only context for agent operations.
pub struct Ctx<'a> {
    pub tree: &'a EnvironmentTree,
    pub calendar: &'a Calendar,
    pub config: &'a EngineConfig,
}

impl Agent {
    pub fn new(id: u32, identity: AgentIdentity, tile: Tile) -> Self {
        Self {
            id,
            identity,
            stream: MemoryStream::new(id),
            view: AgentEnvView::default(),
            plan: None,
            previous_day: String::new(),
            tile,
            path: Vec::new(),
            destination: None,
            action: crate::planning::SLEEP_DESCRIPTION.to_string(),
            action_entry: None,
            emoji: "😴".to_string(),
            object: None,
            summary: None,
            reaction_checks: BTreeMap::new(),
            seen_agents: BTreeMap::new(),
            conversing_until: None,
            last_dialogue: BTreeMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.identity.name
    }

    pub fn is_asleep(&self) -> bool {
        self.action.contains("sleep")
    }

    pub fn in_conversation(&self, now: GameTime) -> bool {
        self.conversing_until.is_some_and(|t| now < t)
    }

    /// "Isabella Rodriguez is writing in her journal"
    pub fn status_text(&self) -> String {
        format!("{} is {}", self.identity.name, self.action)
    }

    /// Retrieval that refreshes access times of what it returns.
    pub fn recall(&mut self, gateway: &mut Gateway, config: &EngineConfig, text: &str, now: GameTime) -> Vec<MemoryObject<f64>> {
        let query = crate::memory::query_for(gateway, text, now).with_budget(config.budget);
        self.stream.retrieve(&query, &config.retrieval()).unwrap_or_else(|e| {
            warn!("retrieval for {} failed: {e}", self.identity.name);
            Vec::new()
        })
    }

    /// Retrieval that leaves the stream untouched, optionally restricted to `kinds`.
    pub fn peek(
        &self,
        gateway: &mut Gateway,
        config: &EngineConfig,
        text: &str,
        now: GameTime,
        kinds: Option<&BTreeSet<MemoryKind>>,
    ) -> Vec<MemoryObject<f64>> {
        let query: RetrievalQuery<f64> = crate::memory::query_for(gateway, text, now)
            .with_budget(config.budget)
            .with_filter(kinds.cloned());
        match self.stream.rank(&query, &config.retrieval()) {
            Ok(ids) => ids.into_iter().filter_map(|id| self.stream.get(id).cloned()).collect(),
            Err(e) => {
                warn!("retrieval for {} failed: {e}", self.identity.name);
                Vec::new()
            }
        }
    }

    fn summary_queries(&self) -> [(TemplateId, String); 3] {
        let n = &self.identity.name;
        [
            (TemplateId::SummaryCore, format!("{n}'s core characteristics")),
            (TemplateId::SummaryOccupation, format!("{n}'s current daily occupation")),
            (TemplateId::SummaryFeeling, format!("{n}'s feeling about their recent progress in life")),
        ]
    }

    fn summary_from_parts(&self, parts: &[String]) -> String {
        let mut text = self.identity.header();
        for p in parts {
            text.push('\n');
            text.push_str(p.trim());
        }
        text
    }

    fn summarize_part(
        &self,
        gateway: &mut Gateway,
        template: TemplateId,
        memories: &[MemoryObject<f64>],
        meta: CallMeta,
    ) -> Option<String> {
        let statements = memories
            .iter()
            .map(|m| format!("- {}", m.description))
            .collect::<Vec<_>>()
            .join("\n");
        let slots = slots! {"name" => self.identity.name, "statements" => statements};
        match gateway.complete_with(template, &slots, meta) {
            Ok(reply) => Some(reply),
            Err(e) => {
                warn!("summary for {} failed: {e}", self.identity.name);
                None
            }
        }
    }

    /// Fresh summary paragraph; retrieval refreshes access times.
    pub fn compose_summary(&mut self, gateway: &mut Gateway, config: &EngineConfig, now: GameTime) -> Option<String> {
        let mut parts = Vec::new();
        for (template, question) in self.summary_queries() {
            let memories = self.recall(gateway, config, &question, now);
            parts.push(self.summarize_part(gateway, template, &memories, cite(&memories))?);
        }
        Some(self.summary_from_parts(&parts))
    }

    /// Summary built without touching the stream, from memories of `kinds`
    /// only. Returns the text and the cited memory ids.
    pub fn peek_summary(
        &self,
        gateway: &mut Gateway,
        config: &EngineConfig,
        now: GameTime,
        kinds: &BTreeSet<MemoryKind>,
        meta: &CallMeta,
    ) -> Option<(String, Vec<u64>)> {
        let mut parts = Vec::new();
        let mut ids = Vec::new();
        for (template, question) in self.summary_queries() {
            let memories = self.peek(gateway, config, &question, now, Some(kinds));
            let mut m = meta.clone();
            m.memory_ids = memories.iter().map(|x| x.id).collect();
            ids.extend(m.memory_ids.iter().copied());
            parts.push(self.summarize_part(gateway, template, &memories, m)?);
        }
        ids.sort_unstable();
        ids.dedup();
        Some((self.summary_from_parts(&parts), ids))
    }

    /// Cached summary, rebuilt every `summary_refresh` minutes.
    pub fn summary(&mut self, gateway: &mut Gateway, config: &EngineConfig, now: GameTime) -> String {
        if let Some(c) = &self.summary {
            if now - c.computed_at < config.summary_refresh {
                return c.text.clone();
            }
        }
        match self.compose_summary(gateway, config, now) {
            Some(text) => {
                self.summary = Some(SummaryCache {
                    text: text.clone(),
                    computed_at: now,
                });
                text
            }
            None => match &self.summary {
                Some(c) => c.text.clone(),
                None => format!("{}\n{}", self.identity.header(), self.identity.seed),
            },
        }
    }

    /// Object the agent is standing on, if any.
    pub fn current_leaf(&self, tree: &EnvironmentTree) -> Option<NodeId> {
        self.object.or_else(|| {
            tree.objects().find(|&o| tree.node(o).tile == Some(self.tile))
        })
    }

    fn resolve_location(&mut self, gateway: &mut Gateway, ctx: &Ctx<'_>, summary: &str, item: &PlanItem) -> Option<String> {
        if let Some(loc) = &item.location {
            match ctx.tree.resolve_object(loc) {
                Ok(id) => return Some(ctx.tree.path_string(id)),
                Err(e) => warn!("{}: plan location {loc:?} unusable: {e}", self.identity.name),
            }
        }
        let req = LocationRequest {
            summary,
            name: &self.identity.name,
            action: &item.description,
            current: self.current_leaf(ctx.tree),
        };
        choose_location(gateway, ctx.tree, &self.view, &req).map(|id| ctx.tree.path_string(id))
    }

    fn plan_memory_text(&self, calendar: &Calendar, e: &PlanEntry) -> String {
        format!(
            "{} plans to be {} from {} to {} on {}",
            self.identity.name,
            e.description,
            calendar.clock_time(e.start),
            calendar.clock_time(e.end()),
            calendar.day_label(e.start)
        )
    }

    fn record_plans(&mut self, gateway: &mut Gateway, calendar: &Calendar, entries: &[PlanEntry], now: GameTime) -> Vec<u64> {
        let mut ids = Vec::new();
        for e in entries {
            let text = self.plan_memory_text(calendar, e);
            match record(&mut self.stream, gateway, MemoryKind::Plan, &text, now, Vec::new()) {
                Ok(m) => ids.push(m.id),
                Err(err) => warn!("plan memory for {} dropped: {err}", self.identity.name),
            }
        }
        ids
    }

    /// Broad-strokes plan for the day containing `now`.
    pub fn plan_day(&mut self, gateway: &mut Gateway, ctx: &Ctx<'_>, now: GameTime, events: &mut Vec<EventBody>) {
        let day_start = now.day_start();
        if let Some(old) = &self.plan {
            let text = old.broad_strokes(ctx.calendar, old.day_start);
            self.previous_day = format!("On {}, {} {}", ctx.calendar.day_label(old.day_start), self.identity.first_name(), text);
        }
        let summary = self.summary(gateway, ctx.config, now);
        let slots = slots! {
            "summary" => summary,
            "previous_day" => self.previous_day,
            "revision" => "",
            "today" => ctx.calendar.day_label(now),
            "first_name" => self.identity.first_name(),
            "name" => self.identity.name,
        };
        let home = self.identity.home.clone();
        let (items, _) = request_day_items(gateway, &slots, day_start, fallback_items(day_start, home.as_deref()));
        let mut resolved = Vec::with_capacity(items.len());
        for item in items {
            let location = self.resolve_location(gateway, ctx, &summary, &item);
            resolved.push(PlanItem { location, ..item });
        }
        let plan = DayPlan::from_items(day_start, &resolved, home.as_deref());
        let day: Vec<PlanEntry> = plan.day_entries().filter(|e| !e.carried).cloned().collect();
        let records: Vec<PlanRecord> = plan.day_entries().map(PlanRecord::from).collect();
        self.plan = Some(plan);
        self.action_entry = None;
        let memory_ids = self.record_plans(gateway, ctx.calendar, &day, now);
        events.push(EventBody::Plan {
            agent: self.id,
            cause: PlanCause::Day,
            entries: records,
            memory_ids,
        });
    }

    /// Decomposes the entries overlapping `[now, now + lookahead]` down to
    /// minute level.
    pub fn ensure_decomposed(&mut self, gateway: &mut Gateway, ctx: &Ctx<'_>, now: GameTime, events: &mut Vec<EventBody>) {
        let horizon = now + ctx.config.lookahead.max(1);
        loop {
            let Some(plan) = &self.plan else { return };
            let pending = plan
                .entries
                .iter()
                .filter(|e| e.level != PlanLevel::Minute && e.children.is_empty() && e.overlaps(now, horizon))
                .map(|e| e.id)
                .next();
            let Some(id) = pending else { return };
            let entry = plan.entry(id).expect("listed").clone();
            let day_start = plan.day_start;
            let summary = self.summary(gateway, ctx.config, now);
            let slots = decomposition_slots(&summary, ctx.calendar, self.identity.first_name(), &entry);
            let children = match decompose(gateway, &slots, &entry, day_start) {
                Ok(c) if !c.is_empty() => c,
                _ => return,
            };
            let plan = self.plan.as_mut().expect("checked");
            let ids = match plan.attach_children(id, children) {
                Ok(ids) => ids,
                Err(e) => {
                    warn!("{}: {e}", self.identity.name);
                    return;
                }
            };
            let kids: Vec<PlanEntry> = ids.iter().filter_map(|c| plan.entry(*c).cloned()).collect();
            // one memory per run of identical new descriptions
            let mut fresh: Vec<PlanEntry> = Vec::new();
            for k in &kids {
                if k.description == entry.description {
                    continue;
                }
                match fresh.last_mut() {
                    Some(last) if last.description == k.description && last.end() == k.start => last.duration += k.duration,
                    _ => fresh.push(k.clone()),
                }
            }
            let memory_ids = self.record_plans(gateway, ctx.calendar, &fresh, now);
            events.push(EventBody::Plan {
                agent: self.id,
                cause: PlanCause::Decompose,
                entries: kids.iter().map(PlanRecord::from).collect(),
                memory_ids,
            });
        }
    }

    /// Re-plans the rest of the day with `reaction` as the first entry at `now`.
    pub fn regenerate_plan(
        &mut self,
        gateway: &mut Gateway,
        ctx: &Ctx<'_>,
        now: GameTime,
        reaction: ReactionPlan,
        events: &mut Vec<EventBody>,
    ) {
        if self.plan.as_ref().is_none_or(|p| now >= p.day_end()) {
            self.plan_day(gateway, ctx, now, events);
        }
        let plan = self.plan.as_ref().expect("planned");
        let day_start = plan.day_start;
        let original: Vec<PlanEntry> = plan.day_entries().cloned().collect();
        let resume_at = now + reaction.duration.max(1);
        let mut resume: Vec<PlanItem> = Vec::new();
        if resume_at < plan.day_end() {
            if let Some(active) = original.iter().find(|e| e.contains(resume_at)) {
                resume.push(PlanItem {
                    description: active.description.clone(),
                    start: Some(resume_at),
                    duration: None,
                    location: active.location.clone(),
                });
            }
            for e in original.iter().filter(|e| e.start > resume_at) {
                resume.push(PlanItem {
                    description: e.description.clone(),
                    start: Some(e.start),
                    duration: None,
                    location: e.location.clone(),
                });
            }
        }
        let remaining = resume
            .iter()
            .enumerate()
            .map(|(i, r)| {
                format!(
                    "{}) {} at {}{}",
                    i + 2,
                    r.description,
                    ctx.calendar.clock_time(r.start.expect("timed")),
                    r.location.as_ref().map(|l| format!(" @ {l}")).unwrap_or_default()
                )
            })
            .collect::<Vec<_>>()
            .join(", ");
        let interrupted = original
            .iter()
            .find(|e| e.contains(now))
            .map(|e| e.description.clone())
            .unwrap_or_else(|| self.action.clone());
        let first = self.identity.first_name().to_string();
        let summary = self.summary(gateway, ctx.config, now);
        let revision = format!(
            "It is {}. {first} was {interrupted} and has decided to {} instead. Revise the rest of the day starting now.\n",
            ctx.calendar.clock_time(now),
            reaction.description
        );
        let slots = slots! {
            "summary" => summary,
            "previous_day" => self.previous_day,
            "revision" => revision,
            "today" => ctx.calendar.day_label(now),
            "first_name" => first,
            "name" => self.identity.name,
            "reaction" => reaction.description,
            "time" => ctx.calendar.clock_time(now),
            "remaining" => remaining,
        };
        let reply = gateway.complete(TemplateId::DayPlan, &slots);
        let reaction_item = PlanItem {
            description: reaction.description.clone(),
            start: Some(now),
            duration: None,
            location: reaction.location.clone(),
        };
        let mut items = revision_items(reply, now, day_start, &reaction_item, &resume);
        if let Some(first) = items.first_mut() {
            if first.description == reaction.description && first.location.is_none() {
                first.location = reaction.location.clone();
            }
        }
        for item in items.iter_mut().skip(1) {
            if let Some(loc) = &item.location {
                if ctx.tree.resolve_object(loc).is_err() {
                    item.location = None;
                }
            }
        }
        let plan = self.plan.as_mut().expect("planned");
        plan.truncate_at(now);
        let ids = plan.extend_day(&items);
        let added: Vec<PlanEntry> = ids.iter().filter_map(|id| plan.entry(*id).cloned()).collect();
        let known: BTreeSet<&str> = original.iter().map(|e| e.description.as_str()).collect();
        let fresh: Vec<PlanEntry> = added
            .iter()
            .filter(|e| !known.contains(e.description.as_str()))
            .cloned()
            .collect();
        self.action_entry = None;
        let memory_ids = self.record_plans(gateway, ctx.calendar, &fresh, now);
        events.push(EventBody::Plan {
            agent: self.id,
            cause: PlanCause::Reaction,
            entries: added.iter().map(PlanRecord::from).collect(),
            memory_ids,
        });
        self.ensure_decomposed(gateway, ctx, now, events);
    }

    /// Records an observation-kind memory and returns it.
    pub fn observe(&mut self, gateway: &mut Gateway, text: &str, now: GameTime) -> Option<MemoryObject<f64>> {
        match record(&mut self.stream, gateway, MemoryKind::Observation, text, now, Vec::new()) {
            Ok(m) => Some(m),
            Err(e) => {
                warn!("{}: observation {text:?} dropped: {e}", self.identity.name);
                None
            }
        }
    }

    /// Summarizes what the agent remembers about `observed` and their status,
    /// as used by reaction and dialogue prompts.
    pub fn relationship_context(
        &mut self,
        gateway: &mut Gateway,
        config: &EngineConfig,
        observed: &str,
        observed_status: &str,
        now: GameTime,
    ) -> String {
        let q1 = format!("What is {}'s relationship with {}?", self.identity.name, observed);
        let mut memories = self.recall(gateway, config, &q1, now);
        for m in self.recall(gateway, config, observed_status, now) {
            if !memories.iter().any(|x| x.id == m.id) {
                memories.push(m);
            }
        }
        let statements = memories
            .iter()
            .map(|m| format!("- {}", m.description))
            .collect::<Vec<_>>()
            .join("\n");
        let slots = slots! {
            "statements" => statements,
            "name" => self.identity.name,
            "observed" => observed,
            "observed_status" => observed_status,
        };
        gateway
            .complete_with(TemplateId::ContextRelationship, &slots, cite(&memories))
            .unwrap_or_else(|e| {
                warn!("context summary for {} failed: {e}", self.identity.name);
                String::new()
            })
    }

}
