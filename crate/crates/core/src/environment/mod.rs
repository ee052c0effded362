//! Sandbox world as a containment tree (world → area → subarea → object),
//! per-agent remembered subviews, and location grounding.

pub mod path;

use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::GameTime;
use crate::gateway::{Gateway, TemplateId};
use crate::slots;

pub use path::{chebyshev, path_find, CollisionMap, PathError, Tile};

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("unknown location segment `{segment}` in `{path}`")]
    UnresolvedSegment { segment: String, path: String },
    #[error("location path `{0}` does not name an object")]
    NotAnObject(String),
    #[error("malformed object rewrite `{0}`: expected `<area: subarea: object> is <status>`")]
    MalformedRewrite(String),
    #[error("empty location path")]
    EmptyPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    World,
    Area,
    Subarea,
    Object,
}

impl NodeKind {
    pub fn child(self) -> Option<NodeKind> {
        match self {
            NodeKind::World => Some(NodeKind::Area),
            NodeKind::Area => Some(NodeKind::Subarea),
            NodeKind::Subarea => Some(NodeKind::Object),
            NodeKind::Object => None,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::World => "world",
            NodeKind::Area => "area",
            NodeKind::Subarea => "subarea",
            NodeKind::Object => "object",
        })
    }
}

/// Axis-aligned tile rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub row: i32,
    pub col: i32,
    pub height: i32,
    pub width: i32,
}

impl Rect {
    pub fn contains(&self, (r, c): Tile) -> bool {
        r >= self.row && c >= self.col && r < self.row + self.height && c < self.col + self.width
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains((other.row, other.col))
            && self.contains((other.row + other.height - 1, other.col + other.width - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvNode {
    pub name: String,
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Footprint of areas and subareas.
    pub rect: Option<Rect>,
    /// Tile of an object.
    pub tile: Option<Tile>,
    pub status: Option<String>,
    pub default_status: Option<String>,
}

/// Authoritative containment tree. Node 0 is the world root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvironmentTree {
    nodes: Vec<EnvNode>,
}

impl EnvironmentTree {
    pub fn new(world_name: impl Into<String>) -> Self {
        Self {
            nodes: vec![EnvNode {
                name: world_name.into(),
                kind: NodeKind::World,
                parent: None,
                children: Vec::new(),
                rect: None,
                tile: None,
                status: None,
                default_status: None,
            }],
        }
    }

    pub const ROOT: NodeId = 0;

    /// Adds a child of the kind one level below `parent`.
    pub fn add_child(&mut self, parent: NodeId, name: impl Into<String>) -> Result<NodeId, EnvError> {
        let name = name.into();
        let kind = self.nodes[parent]
            .kind
            .child()
            .ok_or_else(|| EnvError::NotAnObject(self.path_string(parent)))?;
        let id = self.nodes.len();
        self.nodes.push(EnvNode {
            name,
            kind,
            parent: Some(parent),
            children: Vec::new(),
            rect: None,
            tile: None,
            status: None,
            default_status: None,
        });
        self.nodes[parent].children.push(id);
        Ok(id)
    }

    pub fn node(&self, id: NodeId) -> &EnvNode {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut EnvNode {
        &mut self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        0..self.nodes.len()
    }

    pub fn objects(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().filter(|&i| self.nodes[i].kind == NodeKind::Object)
    }

    pub fn areas(&self) -> &[NodeId] {
        &self.nodes[Self::ROOT].children
    }

    pub fn child_named(&self, parent: NodeId, name: &str) -> Option<NodeId> {
        let want = name.trim();
        self.nodes[parent]
            .children
            .iter()
            .copied()
            .find(|&c| self.nodes[c].name.eq_ignore_ascii_case(want))
    }

    /// Resolves `"Area: subarea: object"` (any depth) to a node.
    pub fn resolve(&self, path: &str) -> Result<NodeId, EnvError> {
        let segments: Vec<&str> = path.split(':').map(str::trim).collect();
        if segments.iter().all(|s| s.is_empty()) {
            return Err(EnvError::EmptyPath);
        }
        let mut cur = Self::ROOT;
        for seg in segments {
            cur = self
                .child_named(cur, seg)
                .ok_or_else(|| EnvError::UnresolvedSegment {
                    segment: seg.to_string(),
                    path: path.to_string(),
                })?;
        }
        Ok(cur)
    }

    pub fn resolve_object(&self, path: &str) -> Result<NodeId, EnvError> {
        let id = self.resolve(path)?;
        if self.nodes[id].kind != NodeKind::Object {
            return Err(EnvError::NotAnObject(path.to_string()));
        }
        Ok(id)
    }

    /// Ancestors from the first area down to `id` (the world root excluded).
    pub fn lineage(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut cur = Some(id);
        while let Some(n) = cur {
            if n == Self::ROOT {
                break;
            }
            out.push(n);
            cur = self.nodes[n].parent;
        }
        out.reverse();
        out
    }

    /// Colon-joined path, e.g. `"The Lin family's house: garden: house garden"`.
    pub fn path_string(&self, id: NodeId) -> String {
        self.lineage(id)
            .iter()
            .map(|&n| self.nodes[n].name.as_str())
            .collect::<Vec<_>>()
            .join(": ")
    }

    pub fn ancestor_of_kind(&self, id: NodeId, kind: NodeKind) -> Option<NodeId> {
        let mut cur = Some(id);
        while let Some(n) = cur {
            if self.nodes[n].kind == kind {
                return Some(n);
            }
            cur = self.nodes[n].parent;
        }
        None
    }

    pub fn area_at(&self, tile: Tile) -> Option<NodeId> {
        self.areas()
            .iter()
            .copied()
            .find(|&a| self.nodes[a].rect.is_some_and(|r| r.contains(tile)))
    }

    pub fn subarea_at(&self, tile: Tile) -> Option<NodeId> {
        let area = self.area_at(tile)?;
        self.nodes[area]
            .children
            .iter()
            .copied()
            .find(|&s| self.nodes[s].rect.is_some_and(|r| r.contains(tile)))
    }

    /// Sentence describing `id`'s containment in its parent; empty for the root.
    pub fn render_containment(&self, id: NodeId) -> String {
        match self.nodes[id].parent {
            None => String::new(),
            Some(p) => format!("there is a {} in the {}", self.nodes[id].name, self.nodes[p].name),
        }
    }

    /// Depth-first containment sentences for every descendant of `id`.
    pub fn render_subtree(&self, id: NodeId) -> Vec<String> {
        let mut out = Vec::new();
        for &c in &self.nodes[id].children {
            out.push(self.render_containment(c));
            out.extend(self.render_subtree(c));
        }
        out
    }

    /// `"<object> in the <subarea> is <status>"`.
    pub fn describe_object(&self, id: NodeId, status: &str) -> String {
        let parent = self.nodes[id].parent.map_or("", |p| self.nodes[p].name.as_str());
        format!("{} in the {} is {}", self.nodes[id].name, parent, status)
    }

    pub fn set_status(&mut self, id: NodeId, status: impl Into<String>) {
        self.nodes[id].status = Some(status.into());
    }

    /// Parses and applies `"<area: subarea: object> is <status>"`.
    pub fn apply_rewrite(&mut self, text: &str) -> Result<(NodeId, String), EnvError> {
        let (path, status) = parse_rewrite(text)?;
        let id = self.resolve_object(&path)?;
        self.set_status(id, status.clone());
        Ok((id, status))
    }
}

/// Splits `"<area: subarea: object> is <status>"` into path and status.
pub fn parse_rewrite(text: &str) -> Result<(String, String), EnvError> {
    let malformed = || EnvError::MalformedRewrite(text.to_string());
    let rest = text.trim().strip_prefix('<').ok_or_else(malformed)?;
    let close = rest.find('>').ok_or_else(malformed)?;
    let path = rest[..close].trim();
    let status = rest[close + 1..]
        .trim_start()
        .strip_prefix("is ")
        .ok_or_else(malformed)?
        .trim();
    if path.is_empty() || status.is_empty() {
        return Err(malformed());
    }
    Ok((path.to_string(), status.to_string()))
}

/// What one agent remembers about a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub last_seen: GameTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
}

/// An agent's possibly-stale subgraph of the world tree.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AgentEnvView {
    pub nodes: BTreeMap<NodeId, ViewEntry>,
}

impl AgentEnvView {
    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    /// Adds `id` with its ancestors; objects remember their current status.
    pub fn learn(&mut self, tree: &EnvironmentTree, id: NodeId, now: GameTime) {
        self.nodes.entry(EnvironmentTree::ROOT).or_insert(ViewEntry {
            last_seen: now,
            status: None,
        });
        for n in tree.lineage(id) {
            let entry = self.nodes.entry(n).or_insert(ViewEntry {
                last_seen: now,
                status: None,
            });
            entry.last_seen = now;
            if n == id {
                entry.status = tree.node(n).status.clone();
            }
        }
    }

    /// Learns a whole subtree (known areas at start).
    pub fn learn_subtree(&mut self, tree: &EnvironmentTree, id: NodeId, now: GameTime) {
        self.learn(tree, id, now);
        for &c in &tree.node(id).children {
            self.learn_subtree(tree, c, now);
        }
    }

    pub fn remembered_status(&self, id: NodeId) -> Option<&str> {
        self.nodes.get(&id).and_then(|e| e.status.as_deref())
    }

    /// Known children of `id`, in tree order.
    pub fn known_children(&self, tree: &EnvironmentTree, id: NodeId) -> Vec<NodeId> {
        tree.node(id)
            .children
            .iter()
            .copied()
            .filter(|c| self.contains(*c))
            .collect()
    }
}

fn normalize_choice(reply: &str) -> String {
    reply
        .trim()
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c == '*')
        .trim()
        .to_lowercase()
}

/// Maps a model reply to one of `options` (exact name, else the single name it mentions).
fn match_option(tree: &EnvironmentTree, options: &[NodeId], reply: &str) -> Option<NodeId> {
    let want = normalize_choice(reply);
    if let Some(&hit) = options
        .iter()
        .find(|&&o| tree.node(o).name.to_lowercase() == want)
    {
        return Some(hit);
    }
    let mentioned: Vec<NodeId> = options
        .iter()
        .copied()
        .filter(|&o| want.contains(&tree.node(o).name.to_lowercase()))
        .collect();
    (mentioned.len() == 1).then(|| mentioned[0])
}

/// Inputs for [`choose_location`].
pub struct LocationRequest<'a> {
    pub summary: &'a str,
    pub name: &'a str,
    pub action: &'a str,
    /// Leaf the agent currently occupies, if any.
    pub current: Option<NodeId>,
}

/// Descends the agent's view one level at a time, asking the model to pick a
/// child by name. Returns `None` when the model keeps naming unknown places.
pub fn choose_location(
    gateway: &mut Gateway,
    tree: &EnvironmentTree,
    view: &AgentEnvView,
    req: &LocationRequest<'_>,
) -> Option<NodeId> {
    let current_lineage = req.current.map(|c| tree.lineage(c)).unwrap_or_default();
    let mut node = EnvironmentTree::ROOT;
    loop {
        let options = view.known_children(tree, node);
        let level = match tree.node(node).kind.child() {
            Some(level) => level,
            None => return Some(node),
        };
        let pick = match options.len() {
            0 => return None,
            1 => options[0],
            _ => {
                let depth = tree.lineage(node).len();
                let current = current_lineage.get(depth).copied();
                let current_name = current.map_or("the street".to_string(), |c| tree.node(c).name.clone());
                let current_children = current
                    .map(|c| {
                        view.known_children(tree, c)
                            .iter()
                            .map(|&k| tree.node(k).name.clone())
                            .collect::<Vec<_>>()
                            .join(", ")
                    })
                    .unwrap_or_default();
                let slots = slots! {
                    "summary" => req.summary,
                    "name" => req.name,
                    "current" => current_name,
                    "current_children" => if current_children.is_empty() { "nothing notable".to_string() } else { current_children },
                    "options" => options.iter().map(|&o| tree.node(o).name.clone()).collect::<Vec<_>>().join(", "),
                    "action" => req.action,
                    "level" => level.to_string(),
                };
                let mut chosen = None;
                for _ in 0..2 {
                    match gateway.complete(TemplateId::LocationChoose, &slots) {
                        Ok(reply) => {
                            chosen = match_option(tree, &options, &reply);
                            if chosen.is_some() {
                                break;
                            }
                            warn!("location reply {reply:?} names no known {level}");
                        }
                        Err(e) => warn!("location request failed: {e}"),
                    }
                }
                chosen?
            }
        };
        node = pick;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Script, ScriptEntry};

    fn lin_house() -> EnvironmentTree {
        let mut t = EnvironmentTree::new("Smallville");
        let house = t.add_child(0, "The Lin family's house").unwrap();
        let kitchen = t.add_child(house, "kitchen").unwrap();
        let stove = t.add_child(kitchen, "stove").unwrap();
        t.node_mut(stove).status = Some("off".into());
        let fridge = t.add_child(kitchen, "refrigerator").unwrap();
        t.node_mut(fridge).status = Some("idle".into());
        let garden = t.add_child(house, "garden").unwrap();
        t.add_child(garden, "house garden").unwrap();
        let cafe = t.add_child(0, "Hobbs Cafe").unwrap();
        let room = t.add_child(cafe, "cafe").unwrap();
        t.add_child(room, "coffee machine").unwrap();
        t
    }

    #[test]
    fn containment_sentences() {
        let t = lin_house();
        let stove = t.resolve("The Lin family's house: kitchen: stove").unwrap();
        assert_eq!(t.render_containment(stove), "there is a stove in the kitchen");
        assert_eq!(t.render_containment(EnvironmentTree::ROOT), "");
        let kitchen = t.resolve("The Lin family's house: kitchen").unwrap();
        assert_eq!(
            t.render_subtree(kitchen),
            vec!["there is a stove in the kitchen", "there is a refrigerator in the kitchen"]
        );
    }

    #[test]
    fn resolve_reports_first_bad_segment() {
        let t = lin_house();
        let err = t.resolve("The Lin family's house: attic: stove").unwrap_err();
        assert_eq!(
            err,
            EnvError::UnresolvedSegment {
                segment: "attic".into(),
                path: "The Lin family's house: attic: stove".into()
            }
        );
    }

    #[test]
    fn rewrite_syntax() {
        let mut t = lin_house();
        let (id, status) = t.apply_rewrite("<The Lin family's house: kitchen: stove> is burning").unwrap();
        assert_eq!(status, "burning");
        assert_eq!(t.node(id).status.as_deref(), Some("burning"));
        assert!(matches!(parse_rewrite("stove is burning"), Err(EnvError::MalformedRewrite(_))));
        assert!(matches!(parse_rewrite("<a: b: c> burning"), Err(EnvError::MalformedRewrite(_))));
        let before = t.clone();
        assert!(t.apply_rewrite("<The Lin family's house: attic: stove> is on").is_err());
        assert_eq!(t, before);
    }

    #[test]
    fn views_learn_ancestors_and_stay_stale() {
        let mut t = lin_house();
        let stove = t.resolve("The Lin family's house: kitchen: stove").unwrap();
        let mut v = AgentEnvView::default();
        v.learn(&t, stove, GameTime(0));
        assert!(v.contains(EnvironmentTree::ROOT));
        assert!(v.contains(t.resolve("The Lin family's house").unwrap()));
        t.set_status(stove, "burning");
        assert_eq!(v.remembered_status(stove), Some("off"));
        v.learn(&t, stove, GameTime(5));
        assert_eq!(v.remembered_status(stove), Some("burning"));
    }

    fn garden_gateway(reply_area: &str) -> Gateway {
        Gateway::scripted(Script::new(vec![
            ScriptEntry::new(TemplateId::LocationChoose, reply_area).when_exact("level", "area"),
            ScriptEntry::new(TemplateId::LocationChoose, "garden").when_exact("level", "subarea"),
        ]))
    }

    #[test]
    fn chooses_leaf_by_descent() {
        let t = lin_house();
        let mut v = AgentEnvView::default();
        v.learn_subtree(&t, EnvironmentTree::ROOT, GameTime(0));
        let mut g = garden_gateway("The Lin family's house");
        let req = LocationRequest {
            summary: "",
            name: "Eddy Lin",
            action: "take a short walk around his workspace",
            current: t.resolve("The Lin family's house: kitchen: stove").ok(),
        };
        let leaf = choose_location(&mut g, &t, &v, &req).unwrap();
        assert_eq!(t.path_string(leaf), "The Lin family's house: garden: house garden");
        // the garden has a single object, so only two model calls are made
        assert_eq!(g.exchanges().len(), 2);
    }

    #[test]
    fn forced_choice_makes_no_call() {
        let t = lin_house();
        let mut v = AgentEnvView::default();
        let leaf = t.resolve("Hobbs Cafe: cafe: coffee machine").unwrap();
        v.learn(&t, leaf, GameTime(0));
        let mut g = garden_gateway("x");
        let req = LocationRequest { summary: "", name: "Eddy Lin", action: "get coffee", current: None };
        assert_eq!(choose_location(&mut g, &t, &v, &req), Some(leaf));
        assert!(g.exchanges().is_empty());
    }

    #[test]
    fn unknown_reply_twice_gives_none() {
        let t = lin_house();
        let mut v = AgentEnvView::default();
        v.learn_subtree(&t, EnvironmentTree::ROOT, GameTime(0));
        let mut g = garden_gateway("The Moon");
        let req = LocationRequest { summary: "", name: "Eddy Lin", action: "walk", current: None };
        assert_eq!(choose_location(&mut g, &t, &v, &req), None);
        assert_eq!(g.exchanges().len(), 2);
    }
}
