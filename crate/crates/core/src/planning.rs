//! Day plans: broad-strokes entries decomposed into hour and 5–15 minute
//! chunks, plus plan regeneration after a reaction.

use std::sync::OnceLock;

use log::warn;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{minute_of_day, Calendar, GameTime, MINUTES_PER_DAY};
use crate::gateway::{CallMeta, Gateway, GatewayError, Slots, TemplateId};

pub const MIN_DAY_ENTRIES: usize = 5;
pub const MAX_DAY_ENTRIES: usize = 8;
pub const MIN_ACCEPTED_ENTRIES: usize = 3;
pub const MINUTE_CHUNK_MIN: i64 = 5;
pub const MINUTE_CHUNK_MAX: i64 = 15;
pub const HOUR_CHUNK_MAX: i64 = 60;
pub const SLEEP_DESCRIPTION: &str = "sleeping";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("plan entry {id}: {message}")]
    Tiling { id: u32, message: String },
    #[error("day plan does not cover the day: {0}")]
    Coverage(String),
    #[error("entry {0} cannot be decomposed further")]
    Leaf(u32),
    #[error("no plan entry with id {0}")]
    UnknownEntry(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanLevel {
    Day,
    Hour,
    Minute,
}

impl PlanLevel {
    pub fn child(self) -> Option<PlanLevel> {
        match self {
            PlanLevel::Day => Some(PlanLevel::Hour),
            PlanLevel::Hour => Some(PlanLevel::Minute),
            PlanLevel::Minute => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub id: u32,
    pub level: PlanLevel,
    pub start: GameTime,
    /// Minutes.
    pub duration: i64,
    pub description: String,
    /// Object path; `None` means "wherever the agent already is".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<u32>,
    /// Synthesized leading sleep carried over from the previous night.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub carried: bool,
}

impl PlanEntry {
    pub fn end(&self) -> GameTime {
        self.start + self.duration
    }

    pub fn contains(&self, t: GameTime) -> bool {
        self.start <= t && t < self.end()
    }

    pub fn overlaps(&self, from: GameTime, to: GameTime) -> bool {
        self.start < to && from < self.end()
    }
}

/// A proposed entry before it is placed in a plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanItem {
    pub description: String,
    pub start: Option<GameTime>,
    pub duration: Option<i64>,
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayPlan {
    pub day_start: GameTime,
    /// Every entry at every level, ordered by id.
    pub entries: Vec<PlanEntry>,
    /// Day-level entry ids in chronological order.
    pub day: Vec<u32>,
    pub next_id: u32,
}

impl DayPlan {
    pub fn day_end(&self) -> GameTime {
        self.day_start + MINUTES_PER_DAY
    }

    pub fn entry(&self, id: u32) -> Option<&PlanEntry> {
        self.entries
            .binary_search_by_key(&id, |e| e.id)
            .ok()
            .map(|i| &self.entries[i])
    }

    fn entry_mut(&mut self, id: u32) -> Option<&mut PlanEntry> {
        self.entries
            .binary_search_by_key(&id, |e| e.id)
            .ok()
            .map(move |i| &mut self.entries[i])
    }

    pub fn day_entries(&self) -> impl Iterator<Item = &PlanEntry> {
        self.day.iter().filter_map(|id| self.entry(*id))
    }

    pub fn children(&self, id: u32) -> Vec<&PlanEntry> {
        self.entry(id)
            .map(|e| e.children.iter().filter_map(|c| self.entry(*c)).collect())
            .unwrap_or_default()
    }

    fn push(&mut self, mut entry: PlanEntry) -> u32 {
        entry.id = self.next_id;
        self.next_id += 1;
        let id = entry.id;
        self.entries.push(entry);
        id
    }

    /// Builds a day plan from timed items; durations run to the next start and
    /// the last item runs to midnight. A leading gap becomes a carried-over
    /// sleep entry.
    pub fn from_items(day_start: GameTime, items: &[PlanItem], home: Option<&str>) -> Self {
        let mut plan = DayPlan {
            day_start,
            entries: Vec::new(),
            day: Vec::new(),
            next_id: 0,
        };
        let mut timed: Vec<&PlanItem> = items.iter().filter(|i| i.start.is_some()).collect();
        if timed.windows(2).any(|w| w[0].start > w[1].start) {
            warn!("day plan entries out of order; sorting by start time");
            timed.sort_by_key(|i| i.start);
        }
        timed.dedup_by_key(|i| i.start);
        let end = plan.day_end();
        let timed: Vec<&PlanItem> = timed
            .into_iter()
            .filter(|i| i.start.is_some_and(|s| s >= day_start && s < end))
            .collect();
        if let Some(first) = timed.first() {
            let first_start = first.start.expect("filtered");
            if first_start > day_start {
                let id = plan.push(PlanEntry {
                    id: 0,
                    level: PlanLevel::Day,
                    start: day_start,
                    duration: first_start - day_start,
                    description: SLEEP_DESCRIPTION.to_string(),
                    location: home.map(str::to_string),
                    parent: None,
                    children: Vec::new(),
                    carried: true,
                });
                plan.day.push(id);
            }
        }
        for (i, item) in timed.iter().enumerate() {
            let start = item.start.expect("filtered");
            let stop = timed.get(i + 1).and_then(|n| n.start).unwrap_or(end);
            let id = plan.push(PlanEntry {
                id: 0,
                level: PlanLevel::Day,
                start,
                duration: stop - start,
                description: item.description.clone(),
                location: item.location.clone(),
                parent: None,
                children: Vec::new(),
                carried: false,
            });
            plan.day.push(id);
        }
        plan
    }

    /// Day-level entries parsed from the model (the carried sleep excluded).
    pub fn parsed_len(&self) -> usize {
        self.day_entries().filter(|e| !e.carried).count()
    }

    /// Deepest entry active at `t`.
    pub fn active_leaf(&self, t: GameTime) -> Option<&PlanEntry> {
        let mut cur = self.day_entries().find(|e| e.contains(t))?;
        loop {
            match cur.children.iter().filter_map(|c| self.entry(*c)).find(|c| c.contains(t)) {
                Some(next) => cur = next,
                None => return Some(cur),
            }
        }
    }

    /// Active entry at each level, outermost first.
    pub fn active_chain(&self, t: GameTime) -> Vec<&PlanEntry> {
        let mut chain = Vec::new();
        let mut cur = match self.day_entries().find(|e| e.contains(t)) {
            Some(e) => e,
            None => return chain,
        };
        loop {
            chain.push(cur);
            match cur.children.iter().filter_map(|c| self.entry(*c)).find(|c| c.contains(t)) {
                Some(next) => cur = next,
                None => return chain,
            }
        }
    }

    /// Attaches `children` (already tiled) under `parent`.
    pub fn attach_children(&mut self, parent: u32, children: Vec<PlanEntry>) -> Result<Vec<u32>, PlanError> {
        let p = self.entry(parent).ok_or(PlanError::UnknownEntry(parent))?.clone();
        let level = p.level.child().ok_or(PlanError::Leaf(parent))?;
        let mut ids = Vec::new();
        for mut c in children {
            c.level = level;
            c.parent = Some(parent);
            ids.push(self.push(c));
        }
        self.entry_mut(parent).expect("checked").children = ids.clone();
        Ok(ids)
    }

    /// Cuts the plan at `now`: entries ending by `now` are kept verbatim,
    /// entries spanning `now` are shortened to end there, later entries are
    /// dropped. Returns the removed future entries.
    pub fn truncate_at(&mut self, now: GameTime) -> Vec<PlanEntry> {
        let mut removed = Vec::new();
        let mut kept = Vec::new();
        for e in std::mem::take(&mut self.entries) {
            if e.start >= now {
                removed.push(e);
            } else {
                kept.push(e);
            }
        }
        for e in kept.iter_mut() {
            if e.end() > now {
                e.duration = now - e.start;
            }
            e.children.retain(|c| !removed.iter().any(|r| r.id == *c));
        }
        self.entries = kept;
        self.day.retain(|id| !removed.iter().any(|r| r.id == *id));
        removed
    }

    /// Appends day-level entries starting at or after the current plan end.
    pub fn extend_day(&mut self, items: &[PlanItem]) -> Vec<u32> {
        let end = self.day_end();
        let mut ids = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let start = item.start.expect("extend_day needs timed items");
            let stop = items.get(i + 1).and_then(|n| n.start).unwrap_or(end);
            if stop <= start {
                continue;
            }
            let id = self.push(PlanEntry {
                id: 0,
                level: PlanLevel::Day,
                start,
                duration: stop - start,
                description: item.description.clone(),
                location: item.location.clone(),
                parent: None,
                children: Vec::new(),
                carried: false,
            });
            self.day.push(id);
            ids.push(id);
        }
        ids
    }

    /// Checks coverage of the day and exact tiling at every level.
    pub fn check(&self) -> Result<(), PlanError> {
        let mut cursor = self.day_start;
        for e in self.day_entries() {
            if e.start != cursor {
                return Err(PlanError::Coverage(format!(
                    "entry {} starts at {} but previous ended at {}",
                    e.id, e.start, cursor
                )));
            }
            cursor = e.end();
        }
        if cursor != self.day_end() {
            return Err(PlanError::Coverage(format!("plan ends at {cursor}, not at midnight")));
        }
        for e in &self.entries {
            if e.duration <= 0 {
                return Err(PlanError::Tiling {
                    id: e.id,
                    message: "non-positive duration".into(),
                });
            }
            let kids = self.children(e.id);
            if kids.is_empty() {
                continue;
            }
            let mut at = e.start;
            for (i, k) in kids.iter().enumerate() {
                if k.start != at {
                    return Err(PlanError::Tiling {
                        id: e.id,
                        message: format!("child {} starts at {}, expected {}", k.id, k.start, at),
                    });
                }
                if k.parent != Some(e.id) {
                    return Err(PlanError::Tiling {
                        id: k.id,
                        message: "parent link does not match".into(),
                    });
                }
                if k.level == PlanLevel::Minute
                    && i + 1 < kids.len()
                    && !(MINUTE_CHUNK_MIN..=MINUTE_CHUNK_MAX).contains(&k.duration)
                {
                    return Err(PlanError::Tiling {
                        id: k.id,
                        message: format!("minute chunk of {} minutes", k.duration),
                    });
                }
                at = k.end();
            }
            if at != e.end() {
                return Err(PlanError::Tiling {
                    id: e.id,
                    message: format!("children end at {at}, parent ends at {}", e.end()),
                });
            }
        }
        Ok(())
    }

    /// One line per leaf: start, duration, location, description.
    pub fn schedule_text(&self, calendar: &Calendar) -> String {
        let mut out = format!("# {}\n", calendar.day_label(self.day_start));
        let mut leaves: Vec<&PlanEntry> = self.entries.iter().filter(|e| e.children.is_empty()).collect();
        leaves.sort_by_key(|e| (e.start, e.level));
        for e in leaves {
            out.push_str(&format!(
                "{:>8}  {:>4} min  {}  {}\n",
                calendar.clock_time(e.start),
                e.duration,
                e.location.as_deref().unwrap_or("-"),
                e.description
            ));
        }
        out
    }

    /// "1) waking up at 7:00 am, 2) ..." for the day-level entries.
    pub fn broad_strokes(&self, calendar: &Calendar, from: GameTime) -> String {
        self.day_entries()
            .filter(|e| !e.carried && e.end() > from)
            .enumerate()
            .map(|(i, e)| {
                format!(
                    "{}) {} at {}{}",
                    i + 1,
                    e.description,
                    calendar.clock_time(e.start.max(from)),
                    e.location.as_ref().map(|l| format!(" @ {l}")).unwrap_or_default()
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

fn item_split_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:^|[\s,;.])(\d{1,2})\)\s*").expect("valid regex"))
}

fn time_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(?:\b(?:at|from|around|by)\s+)?\b(\d{1,2})(?::(\d{2}))?\s*([ap])\.?m\.?").expect("valid regex")
    })
}

fn parse_clock(h: &str, m: Option<&str>, ap: &str) -> Option<i64> {
    let h: u32 = h.parse().ok()?;
    let m: u32 = m.map_or(Some(0), |m| m.parse().ok())?;
    minute_of_day(h, m, ap.eq_ignore_ascii_case("p"))
}

fn clean_description(text: &str) -> String {
    text.trim()
        .trim_end_matches(|c: char| c == ',' || c == ';' || c == '.' || c.is_whitespace())
        .trim()
        .to_string()
}

/// Parses a broad-strokes reply ("1) wake up at 7:00 am, 2) ...").
///
/// Each item needs a clock time; `@ Area: subarea: object` after the time
/// names a location. Items without a time are dropped.
pub fn parse_day_items(reply: &str, day_start: GameTime) -> Vec<PlanItem> {
    let text = reply.trim();
    let text = if text.starts_with("1)") { text.to_string() } else { format!("1) {text}") };
    let re = item_split_re();
    let mut bounds: Vec<(usize, usize)> = re
        .find_iter(&text)
        .map(|m| (m.start(), m.end()))
        .collect();
    bounds.push((text.len(), text.len()));
    let mut items = Vec::new();
    for w in bounds.windows(2) {
        let segment = &text[w[0].1..w[1].0];
        let (body, location) = match segment.rfind('@') {
            Some(at) => (&segment[..at], Some(clean_description(&segment[at + 1..]))),
            None => (segment, None),
        };
        let Some(caps) = time_re().captures(body) else {
            continue;
        };
        let whole = caps.get(0).expect("match");
        let Some(minute) = parse_clock(&caps[1], caps.get(2).map(|m| m.as_str()), &caps[3]) else {
            continue;
        };
        let description = clean_description(&body[..whole.start()]);
        if description.is_empty() {
            continue;
        }
        items.push(PlanItem {
            description,
            start: Some(day_start + minute),
            duration: None,
            location: location.filter(|l| !l.is_empty()),
        });
    }
    items
}

fn duration_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\((\d+)\s*min(?:ute)?s?\)").expect("valid regex"))
}

fn list_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\d+[.)]\s+").expect("valid regex"))
}

/// Parses decomposition lines: `[<time>:] <activity> [(N minutes)]`.
pub fn parse_chunks(reply: &str, day_start: GameTime) -> Vec<PlanItem> {
    let mut items = Vec::new();
    for line in reply.lines() {
        let mut line = line.trim().trim_start_matches(['-', '*', '•']).trim();
        if let Some(m) = list_marker().find(line) {
            line = &line[m.end()..];
        }
        if line.is_empty() {
            continue;
        }
        let mut start = None;
        if let Some(caps) = time_re().captures(line) {
            let whole = caps.get(0).expect("match");
            if whole.start() == 0 {
                start = parse_clock(&caps[1], caps.get(2).map(|m| m.as_str()), &caps[3]).map(|m| day_start + m);
                line = line[whole.end()..].trim_start_matches([':', '-', ' ']).trim();
            }
        }
        let mut duration = None;
        let mut description = line.to_string();
        if let Some(caps) = duration_re().captures(line) {
            duration = caps[1].parse().ok();
            description = line[..caps.get(0).expect("match").start()].to_string();
        }
        let description = clean_description(&description);
        if !description.is_empty() {
            items.push(PlanItem {
                description,
                start,
                duration,
                location: None,
            });
        }
    }
    items
}

/// Splits `total` into `parts` near-equal positive integers (larger first).
fn near_equal(total: i64, parts: i64) -> Vec<i64> {
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|i| base + i64::from(i < extra)).collect()
}

/// Proportionally rescales raw durations to sum exactly to `total`
/// (floor, remainder to the last child).
pub fn rescale(raw: &[i64], total: i64) -> Vec<i64> {
    let sum: i64 = raw.iter().sum();
    if raw.is_empty() {
        return Vec::new();
    }
    if sum == total {
        return raw.to_vec();
    }
    if sum <= 0 {
        return near_equal(total, raw.len() as i64);
    }
    let mut out: Vec<i64> = raw
        .iter()
        .map(|&d| ((i128::from(d) * i128::from(total)) / i128::from(sum)) as i64)
        .collect();
    let used: i64 = out.iter().sum();
    *out.last_mut().expect("non-empty") += total - used;
    out
}

/// Turns model chunks into children that tile `[start, start + total)` and
/// respect the level's chunk size rules.
pub fn tile_children(items: &[PlanItem], start: GameTime, total: i64, level: PlanLevel, location: Option<&str>) -> Vec<PlanEntry> {
    if total <= 0 {
        return Vec::new();
    }
    let items: Vec<PlanItem> = if items.is_empty() {
        vec![PlanItem {
            description: String::new(),
            start: None,
            duration: None,
            location: None,
        }]
    } else {
        items.to_vec()
    };
    let end = start + total;
    let raw: Vec<i64> = if items.iter().all(|i| i.duration.is_some()) {
        items.iter().map(|i| i.duration.unwrap_or(0).max(0)).collect()
    } else if items.iter().all(|i| i.start.is_some()) && items.windows(2).all(|w| w[0].start < w[1].start) {
        items
            .iter()
            .enumerate()
            .map(|(k, i)| {
                let s = i.start.expect("checked").max(start).min(end);
                let next = items.get(k + 1).and_then(|n| n.start).unwrap_or(end).max(start).min(end);
                let s = if k == 0 { start } else { s };
                (next - s).max(0)
            })
            .collect()
    } else {
        vec![1; items.len()]
    };
    let durations = rescale(&raw, total);
    let mut pieces: Vec<(String, i64)> = items
        .iter()
        .zip(durations)
        .filter(|(_, d)| *d > 0)
        .map(|(i, d)| (i.description.clone(), d))
        .collect();
    let (lo, hi) = match level {
        PlanLevel::Minute => (MINUTE_CHUNK_MIN, MINUTE_CHUNK_MAX),
        PlanLevel::Hour => (1, HOUR_CHUNK_MAX),
        PlanLevel::Day => (1, MINUTES_PER_DAY),
    };
    // fold undersized chunks into a neighbour
    let mut merged: Vec<(String, i64)> = Vec::new();
    for (desc, d) in pieces.drain(..) {
        match merged.last_mut() {
            Some(last) if d < lo => last.1 += d,
            Some(last) if last.1 < lo => {
                last.1 += d;
                last.0 = desc;
            }
            _ => merged.push((desc, d)),
        }
    }
    let mut out = Vec::new();
    let mut at = start;
    for (desc, d) in merged {
        let parts = (d + hi - 1) / hi;
        for part in near_equal(d, parts.max(1)) {
            out.push(PlanEntry {
                id: 0,
                level,
                start: at,
                duration: part,
                description: desc.clone(),
                location: location.map(str::to_string),
                parent: None,
                children: Vec::new(),
                carried: false,
            });
            at = at + part;
        }
    }
    out
}

/// Slots shared by the decomposition templates.
pub fn decomposition_slots(summary: &str, calendar: &Calendar, first_name: &str, entry: &PlanEntry) -> Slots {
    crate::slots! {
        "summary" => summary,
        "today" => calendar.day_label(entry.start),
        "first_name" => first_name,
        "task" => entry.description,
        "start" => calendar.clock_time(entry.start),
        "end" => calendar.clock_time(entry.end()),
        "duration" => entry.duration,
    }
}

/// Asks the model for the children of `entry` and tiles them.
pub fn decompose(gateway: &mut Gateway, slots: &Slots, entry: &PlanEntry, day_start: GameTime) -> Result<Vec<PlanEntry>, PlanError> {
    let level = entry.level.child().ok_or(PlanError::Leaf(entry.id))?;
    let template = match level {
        PlanLevel::Hour => TemplateId::DecomposeHour,
        _ => TemplateId::DecomposeMinute,
    };
    let items = match gateway.complete_with(template, slots, CallMeta::default()) {
        Ok(reply) => parse_chunks(&reply, day_start),
        Err(e) => {
            warn!("decomposition of entry {} failed: {e}", entry.id);
            Vec::new()
        }
    };
    let mut items = items;
    for item in items.iter_mut().filter(|i| i.description.is_empty()) {
        item.description = entry.description.clone();
    }
    if items.is_empty() {
        items.push(PlanItem {
            description: entry.description.clone(),
            start: None,
            duration: None,
            location: None,
        });
    }
    Ok(tile_children(&items, entry.start, entry.duration, level, entry.location.as_deref()))
}

/// Outcome of a broad-strokes request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DayPlanSource {
    Model,
    /// Accepted after a re-prompt with an out-of-range entry count.
    Partial,
    Fallback,
}

/// Requests a day plan with one re-prompt; falls back to `fallback` items.
pub fn request_day_items(
    gateway: &mut Gateway,
    slots: &Slots,
    day_start: GameTime,
    fallback: Vec<PlanItem>,
) -> (Vec<PlanItem>, DayPlanSource) {
    let mut last: Vec<PlanItem> = Vec::new();
    for _ in 0..2 {
        match gateway.complete(TemplateId::DayPlan, slots) {
            Ok(reply) => {
                last = parse_day_items(&reply, day_start);
                if (MIN_DAY_ENTRIES..=MAX_DAY_ENTRIES).contains(&last.len()) {
                    return (last, DayPlanSource::Model);
                }
                warn!("day plan reply parsed into {} entries", last.len());
            }
            Err(e) => warn!("day plan request failed: {e}"),
        }
    }
    if last.len() >= MIN_ACCEPTED_ENTRIES {
        if last.len() > MAX_DAY_ENTRIES {
            last.truncate(MAX_DAY_ENTRIES);
        }
        return (last, DayPlanSource::Partial);
    }
    (fallback, DayPlanSource::Fallback)
}

/// Fixed wake/work/eat/sleep template.
pub fn fallback_items(day_start: GameTime, home: Option<&str>) -> Vec<PlanItem> {
    [
        ("waking up and completing the morning routine", 7 * 60, true),
        ("working", 9 * 60, false),
        ("having dinner", 18 * 60, true),
        (SLEEP_DESCRIPTION, 22 * 60, true),
    ]
    .into_iter()
    .map(|(d, m, at_home)| PlanItem {
        description: d.to_string(),
        start: Some(day_start + m),
        duration: None,
        location: if at_home { home.map(str::to_string) } else { None },
    })
    .collect()
}

/// Items for the remainder of the day after a reaction at `now`, from a
/// revision reply. The reaction is forced to be the first entry at `now`.
pub fn revision_items(reply: Result<String, GatewayError>, now: GameTime, day_start: GameTime, reaction: &PlanItem, resume: &[PlanItem]) -> Vec<PlanItem> {
    let mut items = match reply {
        Ok(text) => parse_day_items(&text, day_start),
        Err(e) => {
            warn!("plan revision failed: {e}; keeping the remaining schedule");
            Vec::new()
        }
    };
    if items.is_empty() {
        items.push(reaction.clone());
        items.extend(resume.iter().cloned());
    }
    items.sort_by_key(|i| i.start);
    items.retain(|i| i.start.is_some_and(|s| s >= now));
    if items.first().and_then(|i| i.start) != Some(now) {
        items.insert(0, reaction.clone());
    }
    items.dedup_by_key(|i| i.start);
    items
}
