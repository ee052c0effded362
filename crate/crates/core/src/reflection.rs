//! Periodic synthesis of recent memories into cited reflection memories.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use log::warn;
use regex::Regex;

use crate::clock::GameTime;
use crate::gateway::{Gateway, TemplateId};
use crate::memory::{cite, numbered_statements, query_for, record, MemoryKind, MemoryObject, MemoryStream, RetrievalConfig};
use crate::scalar::Real;
use crate::slots;

pub const DEFAULT_THRESHOLD: u32 = 150;
pub const RECENT_WINDOW: usize = 100;
pub const QUESTIONS_PER_CYCLE: usize = 3;
pub const INSIGHTS_PER_QUESTION: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Insight {
    pub statement: String,
    pub evidence: Vec<u64>,
}

/// Strictly greater than the threshold.
pub fn reflection_due(accumulator: u32, threshold: u32) -> bool {
    accumulator > threshold
}

fn strip_marker(line: &str) -> &str {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"^\s*(?:[-*•]|\d+[.)]|Q\d*[:.)])\s*").expect("valid regex"));
    match re.find(line) {
        Some(m) => &line[m.end()..],
        None => line,
    }
}

/// One question per line; list markers are stripped and text after the
/// question mark is dropped.
pub fn parse_questions(reply: &str) -> Vec<String> {
    reply
        .lines()
        .filter_map(|line| {
            let q = strip_marker(line.trim()).trim();
            let q = match q.find('?') {
                Some(i) => &q[..=i],
                None => return None,
            };
            (q.len() > 1).then(|| q.to_string())
        })
        .collect()
}

/// Parses "insight (because of 1, 5, 3)" lines into statements and 1-based
/// statement indices.
pub fn parse_insights(reply: &str) -> Vec<(String, Vec<usize>)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?i)^(.*?)[\s,.]*\((?:because of|because|based on|from)\s*(?:statements?\s*)?([0-9,;\s&and]*)\)\s*\.?\s*$")
            .expect("valid regex")
    });
    let mut out = Vec::new();
    for line in reply.lines() {
        let line = strip_marker(line.trim()).trim();
        let Some(caps) = re.captures(line) else {
            continue;
        };
        let statement = caps[1].trim().trim_end_matches(['.', ',']).to_string();
        if statement.is_empty() {
            continue;
        }
        let indices: Vec<usize> = caps[2]
            .split(|c: char| !c.is_ascii_digit())
            .filter_map(|s| s.parse().ok())
            .collect();
        out.push((statement, indices));
    }
    out
}

/// Asks for the salient questions over the 100 most recent memories; one
/// retry when fewer than three parse.
pub fn salient_questions<F: Real>(stream: &MemoryStream<F>, gateway: &mut Gateway) -> Vec<String> {
    let recent = stream.recent(RECENT_WINDOW);
    if recent.is_empty() {
        return Vec::new();
    }
    let slots = slots! {"statements" => recent.iter().map(|m| m.description.as_str()).collect::<Vec<_>>().join("\n")};
    let mut best: Vec<String> = Vec::new();
    for _ in 0..2 {
        match gateway.complete_with(TemplateId::ReflectionQuestions, &slots, cite(recent)) {
            Ok(reply) => {
                let qs = parse_questions(&reply);
                if qs.len() >= QUESTIONS_PER_CYCLE {
                    return qs.into_iter().take(QUESTIONS_PER_CYCLE).collect();
                }
                if qs.len() > best.len() {
                    best = qs;
                }
            }
            Err(e) => warn!("reflection question request failed: {e}"),
        }
    }
    best
}

/// Retrieves evidence for `question` and asks for insights citing it.
///
/// Evidence is drawn from observations and earlier reflections so every
/// citation chain bottoms out in an observation.
pub fn synthesize_insights<F: Real>(
    stream: &mut MemoryStream<F>,
    gateway: &mut Gateway,
    config: &RetrievalConfig<F>,
    name: &str,
    question: &str,
    now: GameTime,
    budget: usize,
) -> Vec<Insight> {
    if question.trim().is_empty() {
        return Vec::new();
    }
    let kinds: BTreeSet<MemoryKind> = [MemoryKind::Observation, MemoryKind::Reflection].into_iter().collect();
    let query = query_for(gateway, question, now).with_budget(budget).with_filter(Some(kinds));
    let evidence: Vec<MemoryObject<F>> = match stream.retrieve(&query, config) {
        Ok(m) => m,
        Err(e) => {
            warn!("reflection retrieval failed: {e}");
            return Vec::new();
        }
    };
    if evidence.is_empty() {
        return Vec::new();
    }
    let slots = slots! {"name" => name, "statements" => numbered_statements(&evidence)};
    let reply = match gateway.complete_with(TemplateId::ReflectionInsights, &slots, cite(&evidence)) {
        Ok(r) => r,
        Err(e) => {
            warn!("insight request failed: {e}");
            return Vec::new();
        }
    };
    parse_insights(&reply)
        .into_iter()
        .filter_map(|(statement, indices)| {
            let mut ids: Vec<u64> = indices
                .into_iter()
                .filter(|&i| i >= 1 && i <= evidence.len())
                .map(|i| evidence[i - 1].id)
                .collect();
            ids.sort_unstable();
            ids.dedup();
            (!ids.is_empty()).then_some(Insight { statement, evidence: ids })
        })
        .take(INSIGHTS_PER_QUESTION)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionOutcome<F = f64> {
    pub questions: Vec<String>,
    pub memories: Vec<MemoryObject<F>>,
}

/// One reflection cycle. The accumulator is reset whatever the outcome.
pub fn run_reflection<F: Real>(
    stream: &mut MemoryStream<F>,
    gateway: &mut Gateway,
    config: &RetrievalConfig<F>,
    name: &str,
    now: GameTime,
    budget: usize,
) -> ReflectionOutcome<F> {
    let questions = salient_questions(stream, gateway);
    let mut memories = Vec::new();
    for q in &questions {
        for insight in synthesize_insights(stream, gateway, config, name, q, now, budget) {
            if memories.iter().any(|m: &MemoryObject<F>| m.description == insight.statement) {
                continue;
            }
            match record(stream, gateway, MemoryKind::Reflection, &insight.statement, now, insight.evidence) {
                Ok(m) => memories.push(m),
                Err(e) => warn!("dropping insight {:?}: {e}", insight.statement),
            }
        }
    }
    stream.reset_accumulator();
    ReflectionOutcome { questions, memories }
}

/// True when every citation chain from `id` ends at an observation and only
/// points to earlier ids.
pub fn well_founded<F>(memories: &[MemoryObject<F>], id: u64) -> bool {
    let mut stack = vec![id];
    while let Some(cur) = stack.pop() {
        let Some(m) = memories.get(cur as usize) else {
            return false;
        };
        match m.kind {
            MemoryKind::Observation => {}
            MemoryKind::Reflection => {
                if m.citations.is_empty() || m.citations.iter().any(|&c| c >= m.id) {
                    return false;
                }
                stack.extend(m.citations.iter().copied());
            }
            MemoryKind::Plan => return false,
        }
    }
    true
}
