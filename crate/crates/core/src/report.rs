//! Emergent-behavior measurements computed from a finished event log.
//!
//! Everything here reads the log alone: interview answers come from the
//! recorded measurement exchanges, evidence from percept events and
//! positions from move events.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::GameTime;
use crate::engine::EventLog;
use crate::environment::path::Tile;
use crate::eval::{classify_knowledge, mutual_edges, network_density, Condition, EvalError, Label, Matchers, Overrides};
use crate::events::EventBody;
use crate::memory::MemoryKind;
use crate::scenario::{ItemMeasure, ScenarioError};

pub const PHASES: [&str; 2] = ["start", "end"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("the scenario defines no {0} measurement")]
    NotDefined(&'static str),
    #[error("the log has no {0} measurement interviews (was the run recorded with measurements on?)")]
    NotMeasured(&'static str),
}

/// One recorded measurement interview.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasuredAnswer {
    pub seq: u64,
    pub phase: String,
    pub agent: String,
    /// `relationship` or `item`.
    pub measurement: String,
    /// Subject name for relationships, item key for items.
    pub target: String,
    pub answer: String,
}

pub fn measured_answers(log: &EventLog) -> Vec<MeasuredAnswer> {
    let mut out = Vec::new();
    for e in &log.events {
        let EventBody::ModelExchangeRef { exchange } = &e.body else { continue };
        let a = &exchange.annotations;
        let (Some(phase), Some(agent), Some(measurement)) = (a.get("phase"), a.get("agent"), a.get("measurement")) else {
            continue;
        };
        let target = match measurement.as_str() {
            "relationship" => a.get("subject"),
            _ => a.get("item"),
        };
        let Some(target) = target else { continue };
        out.push(MeasuredAnswer {
            seq: e.seq,
            phase: phase.clone(),
            agent: agent.clone(),
            measurement: measurement.clone(),
            target: target.clone(),
            answer: exchange.reply.clone().unwrap_or_default(),
        });
    }
    out
}

fn agent_ids(log: &EventLog) -> BTreeMap<String, u32> {
    log.header
        .scenario
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name.clone(), i as u32))
        .collect()
}

/// True iff one of `agent`'s percepts logged before `before_seq` contains an
/// evidence phrase (case-insensitive).
pub fn verify_not_hallucinated(log: &EventLog, agent: u32, evidence: &[String], before_seq: u64) -> bool {
    let needles: Vec<String> = evidence.iter().map(|e| e.to_lowercase()).collect();
    log.events
        .iter()
        .take_while(|e| e.seq < before_seq)
        .any(|e| match &e.body {
            EventBody::Percept { agent: a, text, .. } if *a == agent => {
                let text = text.to_lowercase();
                needles.iter().any(|n| text.contains(n.as_str()))
            }
            _ => false,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionReport {
    pub item: String,
    pub agents: usize,
    pub holders_start: BTreeSet<String>,
    pub holders_end: BTreeSet<String>,
    /// Per agent claiming the item at the end: true when no evidence backs the claim.
    pub hallucination_flags: BTreeMap<String, bool>,
    /// Answers where affirmation and negation both matched.
    pub needs_review: BTreeSet<String>,
}

impl DiffusionReport {
    pub fn start_fraction(&self) -> f64 {
        self.holders_start.len() as f64 / self.agents.max(1) as f64
    }

    pub fn end_fraction(&self) -> f64 {
        self.holders_end.len() as f64 / self.agents.max(1) as f64
    }
}

fn label(overrides: &Overrides, phase: &str, agent: &str, key: &str, answer: &str, matchers: &Matchers) -> Result<(Label, bool), EvalError> {
    if let Some(l) = overrides.lookup(phase, agent, key) {
        return Ok((l, false));
    }
    let c = classify_knowledge(answer, matchers)?;
    Ok((c.label, c.flagged))
}

pub fn diffusion_for(log: &EventLog, item: &ItemMeasure, overrides: &Overrides) -> Result<DiffusionReport, ReportError> {
    let ids = agent_ids(log);
    let answers: Vec<MeasuredAnswer> = measured_answers(log)
        .into_iter()
        .filter(|a| a.measurement == "item" && a.target == item.key)
        .collect();
    let mut report = DiffusionReport {
        item: item.key.clone(),
        agents: ids.len(),
        holders_start: BTreeSet::new(),
        holders_end: BTreeSet::new(),
        hallucination_flags: BTreeMap::new(),
        needs_review: BTreeSet::new(),
    };
    for phase in PHASES {
        if !answers.iter().any(|a| a.phase == phase) {
            return Err(ReportError::NotMeasured(phase));
        }
    }
    for a in &answers {
        let (l, flagged) = label(overrides, &a.phase, &a.agent, &item.key, &a.answer, &item.matchers)?;
        if flagged && a.phase == "end" {
            report.needs_review.insert(a.agent.clone());
        }
        if l != Label::Yes {
            continue;
        }
        let Some(&id) = ids.get(&a.agent) else { continue };
        let grounded = verify_not_hallucinated(log, id, &item.evidence, a.seq);
        if a.phase == "end" {
            report.hallucination_flags.insert(a.agent.clone(), !grounded);
        }
        if grounded {
            match a.phase.as_str() {
                "start" => report.holders_start.insert(a.agent.clone()),
                "end" => report.holders_end.insert(a.agent.clone()),
                _ => false,
            };
        }
    }
    Ok(report)
}

pub fn diffusion(log: &EventLog, overrides: &Overrides) -> Result<Vec<DiffusionReport>, ReportError> {
    let items = &log.header.scenario.measurements.items;
    if items.is_empty() {
        return Err(ReportError::NotDefined("item"));
    }
    items.iter().map(|i| diffusion_for(log, i, overrides)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub edges: usize,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub vertices: usize,
    pub start: DensityPoint,
    pub end: DensityPoint,
}

/// Mutual-knowledge density at both phases. Overrides use the subject's
/// name as the item key.
pub fn density(log: &EventLog, overrides: &Overrides) -> Result<DensityReport, ReportError> {
    let rel = log
        .header
        .scenario
        .measurements
        .relationships
        .as_ref()
        .ok_or(ReportError::NotDefined("relationship"))?;
    let vertices = log.header.scenario.agents.len();
    let answers = measured_answers(log);
    let mut points = Vec::new();
    for phase in PHASES {
        let mut knows = BTreeSet::new();
        let mut seen = false;
        for a in answers.iter().filter(|a| a.measurement == "relationship" && a.phase == phase) {
            seen = true;
            if label(overrides, phase, &a.agent, &a.target, &a.answer, &rel.matchers)?.0 == Label::Yes {
                knows.insert((a.agent.clone(), a.target.clone()));
            }
        }
        if !seen {
            return Err(ReportError::NotMeasured(phase));
        }
        let edges = mutual_edges(&knows).len();
        points.push(DensityPoint {
            edges,
            density: network_density(vertices, edges),
        });
    }
    let end = points.pop().expect("two phases");
    let start = points.pop().expect("two phases");
    Ok(DensityReport { vertices, start, end })
}

/// Per-tick agent positions rebuilt from move events.
struct Positions {
    tiles: Vec<Tile>,
}

/// Invited agents whose position lies in `location` at any tick whose
/// start time falls in `[from, to)`.
pub fn coordination_count(log: &EventLog, location: &str, from: GameTime, to: GameTime, invited: &BTreeSet<String>) -> Result<BTreeSet<String>, ReportError> {
    let scenario = &log.header.scenario;
    let built = scenario.build()?;
    let node = built
        .tree
        .resolve(location)
        .map_err(|_| EvalError::UnknownLocation(location.to_string()))?;
    let n = built.tree.node(node);
    let (rect, tile) = (n.rect, n.tile);
    let inside = |t: Tile| rect.is_some_and(|r| r.contains(t)) || tile == Some(t);
    let minutes = log.header.config.tick_minutes.max(1);
    let watch: Vec<(usize, &str)> = scenario
        .agents
        .iter()
        .enumerate()
        .filter(|(_, a)| invited.contains(&a.name))
        .map(|(i, a)| (i, a.name.as_str()))
        .collect();
    let mut pos = Positions {
        tiles: built.agents.iter().map(|a| a.tile).collect(),
    };
    let mut present = BTreeSet::new();
    let mut check = |tick: u64, pos: &Positions| {
        let t = GameTime(tick as i64 * minutes);
        if t >= from && t < to {
            for (i, name) in &watch {
                if inside(pos.tiles[*i]) {
                    present.insert(name.to_string());
                }
            }
        }
    };
    let mut tick = 0;
    for e in &log.events {
        while e.tick > tick {
            check(tick, &pos);
            tick += 1;
        }
        if let EventBody::Move { agent, to, .. } = &e.body {
            if let Some(slot) = pos.tiles.get_mut(*agent as usize) {
                *slot = *to;
            }
        }
    }
    while tick <= log.header.ticks {
        check(tick, &pos);
        tick += 1;
    }
    Ok(present)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinationReport {
    pub key: String,
    pub location: String,
    pub invited: usize,
    pub attended: BTreeSet<String>,
}

pub fn coordination(log: &EventLog) -> Result<Vec<CoordinationReport>, ReportError> {
    let scenario = &log.header.scenario;
    if scenario.measurements.coordination.is_empty() {
        return Err(ReportError::NotDefined("coordination"));
    }
    let calendar = scenario.calendar();
    scenario
        .measurements
        .coordination
        .iter()
        .map(|c| {
            let invited: BTreeSet<String> = c.invited.iter().cloned().collect();
            let attended = coordination_count(log, &c.location, calendar.at(c.from), calendar.at(c.to), &invited)?;
            Ok(CoordinationReport {
                key: c.key.clone(),
                location: c.location.clone(),
                invited: invited.len(),
                attended,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationViolation {
    pub seq: u64,
    pub agent: u32,
    pub condition: Condition,
    pub memory_id: u64,
    /// None when the id was never logged as a memory.
    pub kind: Option<MemoryKind>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationScan {
    /// Condition-tagged exchanges inspected, per condition.
    pub checked: BTreeMap<Condition, usize>,
    pub violations: Vec<AblationViolation>,
}

/// Memory kind of every memory the log records, keyed by (agent, id).
pub fn memory_kinds(log: &EventLog) -> BTreeMap<(u32, u64), MemoryKind> {
    let mut kinds = BTreeMap::new();
    for e in &log.events {
        match &e.body {
            EventBody::Percept { agent, memory_id, .. } => {
                kinds.insert((*agent, *memory_id), MemoryKind::Observation);
            }
            EventBody::Reflection { agent, memory_id, .. } => {
                kinds.insert((*agent, *memory_id), MemoryKind::Reflection);
            }
            EventBody::Plan { agent, memory_ids, .. } => {
                for id in memory_ids {
                    kinds.insert((*agent, *id), MemoryKind::Plan);
                }
            }
            _ => {}
        }
    }
    kinds
}

/// Checks every condition-tagged exchange: each memory it consulted must be
/// of a kind the condition allows.
pub fn ablation_scan(log: &EventLog) -> AblationScan {
    let kinds = memory_kinds(log);
    let mut scan = AblationScan::default();
    for e in &log.events {
        let EventBody::ModelExchangeRef { exchange } = &e.body else { continue };
        let Some(condition) = exchange.annotations.get("condition").and_then(|c| c.parse::<Condition>().ok()) else {
            continue;
        };
        let Some(agent) = exchange.agent else { continue };
        *scan.checked.entry(condition).or_default() += 1;
        let allowed = condition.allowed_kinds();
        for &id in &exchange.memory_ids {
            let kind = kinds.get(&(agent, id)).copied();
            if !kind.is_some_and(|k| allowed.contains(&k)) {
                scan.violations.push(AblationViolation {
                    seq: e.seq,
                    agent,
                    condition,
                    memory_id: id,
                    kind,
                });
            }
        }
    }
    scan
}

fn names(set: &BTreeSet<String>) -> String {
    if set.is_empty() {
        "-".into()
    } else {
        set.iter().cloned().collect::<Vec<_>>().join(", ")
    }
}

pub fn diffusion_table(reports: &[DiffusionReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:>14} {:>14} {:>13}", "item", "start", "end", "hallucinated");
    for r in reports {
        let halluc = r.hallucination_flags.values().filter(|f| **f).count();
        let _ = writeln!(
            s,
            "{:<12} {:>4}/{:<3} ({:>3.0}%) {:>4}/{:<3} ({:>3.0}%) {:>13}",
            r.item,
            r.holders_start.len(),
            r.agents,
            100.0 * r.start_fraction(),
            r.holders_end.len(),
            r.agents,
            100.0 * r.end_fraction(),
            halluc
        );
        let _ = writeln!(s, "  end holders: {}", names(&r.holders_end));
    }
    s
}

pub fn density_table(r: &DensityReport) -> String {
    format!(
        "{:<6} {:>6} {:>8}\n{:<6} {:>6} {:>8.3}\n{:<6} {:>6} {:>8.3}\n",
        "phase", "edges", "density", "start", r.start.edges, r.start.density, "end", r.end.edges, r.end.density
    )
}

pub fn coordination_table(reports: &[CoordinationReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let _ = writeln!(s, "{}: {} of {} invited at {}", r.key, r.attended.len(), r.invited, r.location);
        let _ = writeln!(s, "  attended: {}", names(&r.attended));
    }
    s
}
