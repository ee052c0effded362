//! Scenario files: map raster, environment tree, agents and measurements.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, AgentIdentity};
use crate::clock::{Calendar, GameTime};
use crate::environment::path::{CollisionMap, Tile};
use crate::environment::{EnvironmentTree, Rect};
use crate::eval::Matchers;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading scenario {path}: {message}")]
    Io { path: String, message: String },
    #[error("scenario JSON: {0}")]
    Json(String),
    #[error("scenario schema_version {found} is not supported (expected {expected})")]
    Schema { found: u32, expected: u32 },
    #[error("scenario is invalid:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub name: String,
    pub tile: Tile,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubareaSpec {
    pub name: String,
    pub rect: Rect,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaSpec {
    pub name: String,
    pub rect: Rect,
    #[serde(default)]
    pub subareas: Vec<SubareaSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub name: String,
    pub areas: Vec<AreaSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationshipMeasure {
    /// Asked of every agent about every other; `{name}` is replaced.
    pub question: String,
    #[serde(flatten)]
    pub matchers: Matchers,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemMeasure {
    pub key: String,
    pub question: String,
    #[serde(flatten)]
    pub matchers: Matchers,
    /// Case-insensitive phrases whose presence in an agent's percepts
    /// substantiates a claim of knowing the item.
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordinationMeasure {
    pub key: String,
    /// Area or subarea path.
    pub location: String,
    pub from: NaiveDateTime,
    pub to: NaiveDateTime,
    pub invited: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measurements {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relationships: Option<RelationshipMeasure>,
    #[serde(default)]
    pub items: Vec<ItemMeasure>,
    #[serde(default)]
    pub coordination: Vec<CoordinationMeasure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub epoch: NaiveDateTime,
    /// Collision raster, `#` blocked and `.` walkable.
    pub map: Vec<String>,
    pub world: WorldSpec,
    pub agents: Vec<AgentIdentity>,
    #[serde(default)]
    pub measurements: Measurements,
}

/// Everything the engine needs from a validated scenario.
pub struct Built {
    pub calendar: Calendar,
    pub map: CollisionMap,
    pub tree: EnvironmentTree,
    pub agents: Vec<Agent>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| ScenarioError::Json(e.to_string()))?;
        let found = v.get("schema_version").and_then(|s| s.as_u64()).unwrap_or(0) as u32;
        if found != SCENARIO_SCHEMA_VERSION {
            return Err(ScenarioError::Schema {
                found,
                expected: SCENARIO_SCHEMA_VERSION,
            });
        }
        let s: Scenario = serde_json::from_value(v).map_err(|e| ScenarioError::Json(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn calendar(&self) -> Calendar {
        Calendar::new(self.epoch)
    }

    pub fn agent_index(&self, name: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.name == name)
    }

    /// Every problem found, one message per problem.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let map = match CollisionMap::from_rows(&self.map) {
            Ok(m) => Some(m),
            Err(e) => {
                out.push(format!("map: {e}"));
                None
            }
        };
        if self.epoch.time().num_seconds_from_midnight() != 0 {
            out.push("epoch: must be at midnight".into());
        }
        let bounds = map.as_ref().map(|m| Rect {
            row: 0,
            col: 0,
            height: m.height,
            width: m.width,
        });
        let mut area_names = BTreeSet::new();
        for a in &self.world.areas {
            if !area_names.insert(a.name.to_lowercase()) {
                out.push(format!("world: duplicate area {:?}", a.name));
            }
            if a.name.contains(':') {
                out.push(format!("area {:?}: names may not contain ':'", a.name));
            }
            if let Some(b) = bounds {
                if !b.contains_rect(&a.rect) {
                    out.push(format!("area {:?}: rect lies outside the map", a.name));
                }
            }
            let mut sub_names = BTreeSet::new();
            for s in &a.subareas {
                if !sub_names.insert(s.name.to_lowercase()) {
                    out.push(format!("area {:?}: duplicate subarea {:?}", a.name, s.name));
                }
                if !a.rect.contains_rect(&s.rect) {
                    out.push(format!("{}: {}: rect lies outside its area", a.name, s.name));
                }
                let mut obj_names = BTreeSet::new();
                for o in &s.objects {
                    let path = format!("{}: {}: {}", a.name, s.name, o.name);
                    if !obj_names.insert(o.name.to_lowercase()) {
                        out.push(format!("{path}: duplicate object"));
                    }
                    if !s.rect.contains(o.tile) {
                        out.push(format!("{path}: tile {:?} lies outside its subarea", o.tile));
                    }
                    if map.as_ref().is_some_and(|m| m.is_blocked(o.tile)) {
                        out.push(format!("{path}: tile {:?} is blocked", o.tile));
                    }
                }
            }
        }
        for (i, a) in self.world.areas.iter().enumerate() {
            for b in &self.world.areas[i + 1..] {
                if overlaps(&a.rect, &b.rect) {
                    out.push(format!("areas {:?} and {:?} overlap", a.name, b.name));
                }
            }
        }
        if self.agents.is_empty() {
            out.push("agents: at least one agent is required".into());
        }
        let tree = self.tree();
        let mut names = BTreeSet::new();
        for a in &self.agents {
            if !names.insert(a.name.clone()) {
                out.push(format!("agents: duplicate name {:?}", a.name));
            }
            if a.seed_phrases().is_empty() {
                out.push(format!("agent {:?}: seed has no phrases", a.name));
            }
            match &a.home {
                None => out.push(format!("agent {:?}: home is required", a.name)),
                Some(h) => {
                    if let Err(e) = tree.resolve_object(h) {
                        out.push(format!("agent {:?}: home: {e}", a.name));
                    }
                }
            }
            for k in &a.known_areas {
                if let Err(e) = tree.resolve(k) {
                    out.push(format!("agent {:?}: known_areas: {e}", a.name));
                }
            }
        }
        let m = &self.measurements;
        if let Some(r) = &m.relationships {
            if let Err(e) = r.matchers.validate() {
                out.push(format!("measurements.relationships: {e}"));
            }
        }
        for item in &m.items {
            if let Err(e) = item.matchers.validate() {
                out.push(format!("measurements.items[{}]: {e}", item.key));
            }
        }
        for c in &m.coordination {
            if let Err(e) = tree.resolve(&c.location) {
                out.push(format!("measurements.coordination[{}]: {e}", c.key));
            }
            if c.to <= c.from {
                out.push(format!("measurements.coordination[{}]: window is empty", c.key));
            }
            for n in &c.invited {
                if !names.contains(n) {
                    out.push(format!("measurements.coordination[{}]: unknown agent {n:?}", c.key));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(p))
        }
    }

    /// The environment tree with initial statuses.
    pub fn tree(&self) -> EnvironmentTree {
        let mut tree = EnvironmentTree::new(self.world.name.clone());
        for a in &self.world.areas {
            let Ok(area) = tree.add_child(EnvironmentTree::ROOT, a.name.clone()) else { continue };
            tree.node_mut(area).rect = Some(a.rect);
            for s in &a.subareas {
                let Ok(sub) = tree.add_child(area, s.name.clone()) else { continue };
                tree.node_mut(sub).rect = Some(s.rect);
                for o in &s.objects {
                    let Ok(obj) = tree.add_child(sub, o.name.clone()) else { continue };
                    let n = tree.node_mut(obj);
                    n.tile = Some(o.tile);
                    n.status = Some(o.status.clone());
                    n.default_status = Some(o.status.clone());
                }
            }
        }
        tree
    }

    /// Builds the world for tick 0. Call only on a validated scenario.
    pub fn build(&self) -> Result<Built, ScenarioError> {
        self.validate()?;
        let map = CollisionMap::from_rows(&self.map).map_err(|e| ScenarioError::Invalid(vec![e.to_string()]))?;
        let tree = self.tree();
        let mut agents = Vec::with_capacity(self.agents.len());
        for (i, identity) in self.agents.iter().enumerate() {
            let home = tree
                .resolve_object(identity.home.as_deref().unwrap_or_default())
                .map_err(|e| ScenarioError::Invalid(vec![e.to_string()]))?;
            let tile = tree.node(home).tile.expect("objects have tiles");
            let mut agent = Agent::new(i as u32, identity.clone(), tile);
            let home_area = tree.lineage(home)[0];
            agent.view.learn_subtree(&tree, home_area, GameTime(0));
            for k in &identity.known_areas {
                let id = tree.resolve(k).map_err(|e| ScenarioError::Invalid(vec![e.to_string()]))?;
                agent.view.learn_subtree(&tree, id, GameTime(0));
            }
            agent.object = Some(home);
            agents.push(agent);
        }
        Ok(Built {
            calendar: self.calendar(),
            map,
            tree,
            agents,
        })
    }
}

fn overlaps(a: &Rect, b: &Rect) -> bool {
    a.row < b.row + b.height && b.row < a.row + a.height && a.col < b.col + b.width && b.col < a.col + a.width
}
