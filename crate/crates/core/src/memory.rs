//! Memory stream: append-only natural-language records with scored retrieval.

use std::collections::BTreeSet;
use std::fmt;

use log::warn;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

use crate::clock::GameTime;
use crate::gateway::{CallMeta, Gateway, TemplateId};
use crate::scalar::Real;
use crate::slots;

pub const DEFAULT_IMPORTANCE: u8 = 3;
pub const DEFAULT_BUDGET: usize = 1200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MemoryError {
    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("memory description must not be empty")]
    EmptyDescription,
    #[error("memory {id} cites {citation}, which is not an earlier memory")]
    InvalidCitation { id: u64, citation: u64 },
    #[error("importance {0} is outside 1..=10")]
    InvalidImportance(u8),
    #[error("memory log line {line}: {message}")]
    Log { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    Observation,
    Reflection,
    Plan,
}

impl fmt::Display for MemoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MemoryKind::Observation => "observation",
            MemoryKind::Reflection => "reflection",
            MemoryKind::Plan => "plan",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryObject<F = f64> {
    pub id: u64,
    pub kind: MemoryKind,
    pub description: String,
    pub created_at: GameTime,
    pub last_accessed: GameTime,
    pub importance: u8,
    #[serde(skip)]
    pub embedding: Vec<F>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub citations: Vec<u64>,
    /// Importance came from the fallback rather than the model.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub importance_defaulted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig<F = f64> {
    pub decay: F,
    pub alpha_recency: F,
    pub alpha_importance: F,
    pub alpha_relevance: F,
}

impl<F: Real> Default for RetrievalConfig<F> {
    fn default() -> Self {
        Self {
            decay: F::of(0.995),
            alpha_recency: F::one(),
            alpha_importance: F::one(),
            alpha_relevance: F::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalQuery<F = f64> {
    pub text: String,
    pub embedding: Vec<F>,
    pub now: GameTime,
    /// Approximate token budget (words × 1.3).
    pub budget: usize,
    pub kind_filter: Option<BTreeSet<MemoryKind>>,
}

impl<F: Real> RetrievalQuery<F> {
    pub fn new(text: impl Into<String>, embedding: Vec<F>, now: GameTime) -> Self {
        Self {
            text: text.into(),
            embedding,
            now,
            budget: DEFAULT_BUDGET,
            kind_filter: None,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_filter(mut self, kinds: Option<BTreeSet<MemoryKind>>) -> Self {
        self.kind_filter = kinds;
        self
    }
}

pub fn recency_score<F: Real>(now: GameTime, last_accessed: GameTime, decay: F) -> F {
    let hours = now.hours_since(last_accessed).max(0.0);
    decay.powf(F::of(hours))
}

pub fn relevance_score<F: Real>(query: &[F], memory: &[F]) -> Result<F, MemoryError> {
    if query.len() != memory.len() {
        return Err(MemoryError::DimensionMismatch {
            expected: query.len(),
            found: memory.len(),
        });
    }
    Ok(query
        .iter()
        .zip(memory)
        .fold(F::zero(), |acc, (a, b)| acc + *a * *b))
}

/// Approximate token count of a description: whitespace words × 1.3, in tenths.
fn token_tenths(text: &str) -> usize {
    text.split_whitespace().count() * 13
}

/// Min-max scales `values` into [0,1]; a degenerate range maps to 0.5.
pub fn min_max<F: Real>(values: &[F]) -> Vec<F> {
    let Some(first) = values.first() else {
        return Vec::new();
    };
    let (lo, hi) = values
        .iter()
        .fold((*first, *first), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let span = hi - lo;
    if span <= F::zero() {
        return vec![F::of(0.5); values.len()];
    }
    values.iter().map(|v| (*v - lo) / span).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredMemory<F = f64> {
    pub id: u64,
    pub recency: F,
    pub importance: F,
    pub relevance: F,
    pub score: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryStream<F = f64> {
    pub agent_id: u32,
    memories: Vec<MemoryObject<F>>,
    pub importance_accumulator: u32,
}

impl<F: Real> MemoryStream<F> {
    pub fn new(agent_id: u32) -> Self {
        Self {
            agent_id,
            memories: Vec::new(),
            importance_accumulator: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.memories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memories.is_empty()
    }

    pub fn memories(&self) -> &[MemoryObject<F>] {
        &self.memories
    }

    pub fn get(&self, id: u64) -> Option<&MemoryObject<F>> {
        // ids are dense from 0
        self.memories.get(usize::try_from(id).ok()?)
    }

    pub fn next_id(&self) -> u64 {
        self.memories.len() as u64
    }

    /// The `n` most recently created memories, oldest first.
    pub fn recent(&self, n: usize) -> &[MemoryObject<F>] {
        &self.memories[self.memories.len().saturating_sub(n)..]
    }

    /// Appends a memory whose importance and embedding are already known.
    pub fn append(
        &mut self,
        kind: MemoryKind,
        description: impl Into<String>,
        now: GameTime,
        importance: u8,
        embedding: Vec<F>,
        citations: Vec<u64>,
    ) -> Result<&MemoryObject<F>, MemoryError> {
        let description = description.into();
        if description.trim().is_empty() {
            return Err(MemoryError::EmptyDescription);
        }
        if !(1..=10).contains(&importance) {
            return Err(MemoryError::InvalidImportance(importance));
        }
        if let Some(first) = self.memories.first() {
            if first.embedding.len() != embedding.len() {
                return Err(MemoryError::DimensionMismatch {
                    expected: first.embedding.len(),
                    found: embedding.len(),
                });
            }
        }
        let id = self.next_id();
        if let Some(&bad) = citations.iter().find(|&&c| c >= id) {
            return Err(MemoryError::InvalidCitation { id, citation: bad });
        }
        if kind == MemoryKind::Observation {
            self.importance_accumulator += u32::from(importance);
        }
        self.memories.push(MemoryObject {
            id,
            kind,
            description,
            created_at: now,
            last_accessed: now,
            importance,
            embedding,
            citations,
            importance_defaulted: false,
        });
        Ok(self.memories.last().expect("just pushed"))
    }

    pub fn reset_accumulator(&mut self) {
        self.importance_accumulator = 0;
    }

    /// Scores every candidate (after the kind filter), unsorted.
    pub fn score_all(
        &self,
        query: &RetrievalQuery<F>,
        config: &RetrievalConfig<F>,
    ) -> Result<Vec<ScoredMemory<F>>, MemoryError> {
        let candidates: Vec<&MemoryObject<F>> = self
            .memories
            .iter()
            .filter(|m| query.kind_filter.as_ref().is_none_or(|k| k.contains(&m.kind)))
            .collect();
        let mut recency = Vec::with_capacity(candidates.len());
        let mut importance = Vec::with_capacity(candidates.len());
        let mut relevance = Vec::with_capacity(candidates.len());
        for m in &candidates {
            recency.push(recency_score(query.now, m.last_accessed, config.decay));
            importance.push(F::of(f64::from(m.importance)));
            relevance.push(relevance_score(&query.embedding, &m.embedding)?);
        }
        let (recency, importance, relevance) =
            (min_max(&recency), min_max(&importance), min_max(&relevance));
        Ok(candidates
            .iter()
            .enumerate()
            .map(|(i, m)| ScoredMemory {
                id: m.id,
                recency: recency[i],
                importance: importance[i],
                relevance: relevance[i],
                score: config.alpha_recency * recency[i]
                    + config.alpha_importance * importance[i]
                    + config.alpha_relevance * relevance[i],
            })
            .collect())
    }

    /// Ids of the memories `retrieve` would return, without touching access times.
    pub fn rank(
        &self,
        query: &RetrievalQuery<F>,
        config: &RetrievalConfig<F>,
    ) -> Result<Vec<u64>, MemoryError> {
        let mut scored = self.score_all(query, config)?;
        scored.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.id.cmp(&a.id))
        });
        let mut remaining = query.budget * 10;
        let mut picked = Vec::new();
        for s in scored {
            let cost = token_tenths(&self.memories[s.id as usize].description);
            if cost <= remaining {
                remaining -= cost;
                picked.push(s.id);
            }
        }
        Ok(picked)
    }

    /// Top-scoring memories that fit the budget; refreshes their `last_accessed`.
    pub fn retrieve(
        &mut self,
        query: &RetrievalQuery<F>,
        config: &RetrievalConfig<F>,
    ) -> Result<Vec<MemoryObject<F>>, MemoryError> {
        let ids = self.rank(query, config)?;
        Ok(ids
            .into_iter()
            .map(|id| {
                let m = &mut self.memories[id as usize];
                m.last_accessed = m.last_accessed.max(query.now);
                m.clone()
            })
            .collect())
    }

    /// One JSON object per line; embeddings are omitted.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for m in &self.memories {
            out.push_str(&serde_json::to_string(m).expect("memory objects serialize"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a stream from [`to_ndjson`](Self::to_ndjson) output, recomputing embeddings.
    pub fn from_ndjson(
        agent_id: u32,
        text: &str,
        mut embed: impl FnMut(&str) -> Vec<F>,
    ) -> Result<Self, MemoryError> {
        let mut stream = Self::new(agent_id);
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut m: MemoryObject<F> = serde_json::from_str(line).map_err(|e| MemoryError::Log {
                line: i + 1,
                message: e.to_string(),
            })?;
            if m.id != stream.next_id() {
                return Err(MemoryError::Log {
                    line: i + 1,
                    message: format!("expected id {}, found {}", stream.next_id(), m.id),
                });
            }
            if let Some(&bad) = m.citations.iter().find(|&&c| c >= m.id) {
                return Err(MemoryError::InvalidCitation { id: m.id, citation: bad });
            }
            m.embedding = embed(&m.description);
            stream.memories.push(m);
        }
        Ok(stream)
    }

    /// Restores memories verbatim (used by world snapshots).
    pub(crate) fn from_parts(agent_id: u32, memories: Vec<MemoryObject<F>>, accumulator: u32) -> Self {
        Self {
            agent_id,
            memories,
            importance_accumulator: accumulator,
        }
    }

    pub(crate) fn memories_mut(&mut self) -> &mut [MemoryObject<F>] {
        &mut self.memories
    }
}

fn first_integer(reply: &str) -> Option<i64> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"-?\d+").expect("valid regex"));
    re.find(reply)?.as_str().parse().ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Importance {
    pub value: u8,
    pub defaulted: bool,
}

/// Parses a poignancy reply: first integer, clamped to 1..=10.
pub fn parse_importance(reply: &str) -> Option<u8> {
    first_integer(reply).map(|v| v.clamp(1, 10) as u8)
}

/// Asks the gateway to rate `description`; one retry, then [`DEFAULT_IMPORTANCE`].
pub fn score_importance(gateway: &mut Gateway, description: &str) -> Importance {
    let slots = slots! {"memory" => description};
    for _ in 0..2 {
        match gateway.complete(TemplateId::Importance, &slots) {
            Ok(reply) => {
                if let Some(value) = parse_importance(&reply) {
                    return Importance {
                        value,
                        defaulted: false,
                    };
                }
                warn!("unparseable importance reply {reply:?} for {description:?}");
            }
            Err(e) => warn!("importance request failed: {e}"),
        }
    }
    Importance {
        value: DEFAULT_IMPORTANCE,
        defaulted: true,
    }
}

/// Scores, embeds and appends a new memory.
pub fn record<F: Real>(
    stream: &mut MemoryStream<F>,
    gateway: &mut Gateway,
    kind: MemoryKind,
    description: &str,
    now: GameTime,
    citations: Vec<u64>,
) -> Result<MemoryObject<F>, MemoryError> {
    if description.trim().is_empty() {
        return Err(MemoryError::EmptyDescription);
    }
    let importance = score_importance(gateway, description);
    record_with_importance(stream, gateway, kind, description, now, importance, citations)
}

pub fn record_with_importance<F: Real>(
    stream: &mut MemoryStream<F>,
    gateway: &mut Gateway,
    kind: MemoryKind,
    description: &str,
    now: GameTime,
    importance: Importance,
    citations: Vec<u64>,
) -> Result<MemoryObject<F>, MemoryError> {
    let embedding = gateway.embed(description);
    stream.append(kind, description, now, importance.value, embedding, citations)?;
    let m = stream.memories.last_mut().expect("just appended");
    m.importance_defaulted = importance.defaulted;
    Ok(m.clone())
}

/// Renders retrieved memories as numbered statements ("1. ...").
pub fn numbered_statements<F>(memories: &[MemoryObject<F>]) -> String {
    memories
        .iter()
        .enumerate()
        .map(|(i, m)| format!("{}. {}", i + 1, m.description))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Builds a query for `text` using the gateway embedder.
pub fn query_for<F: Real>(gateway: &mut Gateway, text: &str, now: GameTime) -> RetrievalQuery<F> {
    RetrievalQuery::new(text, gateway.embed(text), now)
}

/// Joins retrieved memory ids for exchange bookkeeping.
pub fn cite<F>(memories: &[MemoryObject<F>]) -> CallMeta {
    CallMeta::citing(memories.iter().map(|m| m.id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{hash_embedding, Script, ScriptEntry};

    fn unit(x: f64, y: f64) -> Vec<f64> {
        let n = (x * x + y * y).sqrt();
        vec![x / n, y / n]
    }

    fn stream_of(entries: &[(u8, i64, Vec<f64>)]) -> MemoryStream<f64> {
        let mut s = MemoryStream::new(0);
        for (i, (imp, t, e)) in entries.iter().enumerate() {
            s.append(MemoryKind::Observation, format!("m{i}"), GameTime(*t), *imp, e.clone(), vec![])
                .unwrap();
        }
        s
    }

    #[test]
    fn ids_follow_append_order() {
        let s = stream_of(&[(1, 5, unit(1.0, 0.0)), (1, 5, unit(0.0, 1.0))]);
        assert_eq!(s.memories()[0].id, 0);
        assert_eq!(s.memories()[1].id, 1);
        assert_eq!(s.importance_accumulator, 2);
    }

    #[test]
    fn recency_boundaries() {
        assert_eq!(recency_score(GameTime(600), GameTime(600), 0.995), 1.0);
        assert!(recency_score(GameTime(6000), GameTime(0), 0.995) < 1.0);
    }

    #[test]
    fn relevance_examples() {
        let a = unit(1.0, 0.0);
        assert!((relevance_score(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(relevance_score(&a, &unit(0.0, 1.0)).unwrap(), 0.0);
        let r = relevance_score(&a, &unit(1.0, 1.0)).unwrap();
        assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(
            relevance_score(&a, &[1.0, 0.0, 0.0]),
            Err(MemoryError::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn min_max_degenerate_is_half() {
        assert_eq!(min_max(&[3.0, 3.0]), vec![0.5, 0.5]);
        assert_eq!(min_max(&[1.0, 3.0, 2.0]), vec![0.0, 1.0, 0.5]);
        assert!(min_max::<f64>(&[]).is_empty());
    }

    #[test]
    fn empty_and_singleton_retrieval() {
        let mut s = MemoryStream::<f64>::new(0);
        let q = RetrievalQuery::new("x", unit(1.0, 0.0), GameTime(10));
        assert!(s.retrieve(&q, &RetrievalConfig::default()).unwrap().is_empty());
        let mut s = stream_of(&[(4, 0, unit(0.0, 1.0))]);
        let got = s.retrieve(&q, &RetrievalConfig::default()).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(s.memories()[0].last_accessed, GameTime(10));
    }

    #[test]
    fn budget_skips_long_memories_and_continues() {
        let mut s = MemoryStream::<f64>::new(0);
        let e = unit(1.0, 0.0);
        s.append(MemoryKind::Observation, "a b c d e f g h i j", GameTime(0), 9, e.clone(), vec![])
            .unwrap();
        s.append(MemoryKind::Observation, "short one", GameTime(0), 1, e.clone(), vec![])
            .unwrap();
        // 10 words cost 13 tokens, 2 words cost 2.6
        let q = RetrievalQuery::new("q", e, GameTime(0)).with_budget(5);
        assert_eq!(s.rank(&q, &RetrievalConfig::default()).unwrap(), vec![1]);
    }

    #[test]
    fn kind_filter_restricts_candidates() {
        let mut s = MemoryStream::<f64>::new(0);
        let e = unit(1.0, 0.0);
        s.append(MemoryKind::Observation, "seen", GameTime(0), 1, e.clone(), vec![])
            .unwrap();
        s.append(MemoryKind::Reflection, "thought", GameTime(0), 9, e.clone(), vec![0])
            .unwrap();
        let q = RetrievalQuery::new("q", e, GameTime(0))
            .with_filter(Some([MemoryKind::Observation].into_iter().collect()));
        assert_eq!(s.rank(&q, &RetrievalConfig::default()).unwrap(), vec![0]);
    }

    #[test]
    fn append_validates() {
        let mut s = MemoryStream::<f64>::new(0);
        let e = unit(1.0, 0.0);
        assert_eq!(
            s.append(MemoryKind::Observation, " ", GameTime(0), 1, e.clone(), vec![]).unwrap_err(),
            MemoryError::EmptyDescription
        );
        assert_eq!(
            s.append(MemoryKind::Reflection, "r", GameTime(0), 1, e.clone(), vec![0]).unwrap_err(),
            MemoryError::InvalidCitation { id: 0, citation: 0 }
        );
        assert!(s.append(MemoryKind::Observation, "o", GameTime(0), 11, e, vec![]).is_err());
    }

    #[test]
    fn accumulator_ignores_reflections_and_plans() {
        let mut s = MemoryStream::<f64>::new(0);
        let e = unit(1.0, 0.0);
        s.append(MemoryKind::Observation, "o", GameTime(0), 5, e.clone(), vec![]).unwrap();
        s.append(MemoryKind::Plan, "p", GameTime(0), 7, e.clone(), vec![]).unwrap();
        s.append(MemoryKind::Reflection, "r", GameTime(0), 8, e, vec![0]).unwrap();
        assert_eq!(s.importance_accumulator, 5);
    }

    #[test]
    fn importance_parsing() {
        assert_eq!(parse_importance("2"), Some(2));
        assert_eq!(parse_importance("Rating: 8"), Some(8));
        assert_eq!(parse_importance("15"), Some(10));
        assert_eq!(parse_importance("0"), Some(1));
        assert_eq!(parse_importance("meh"), None);
    }

    #[test]
    fn junk_importance_falls_back_after_one_retry() {
        let mut g = Gateway::scripted(Script::new(vec![ScriptEntry::new(TemplateId::Importance, "junk")]));
        let imp = score_importance(&mut g, "anything");
        assert_eq!(imp, Importance { value: 3, defaulted: true });
        assert_eq!(g.exchanges().len(), 2);
    }

    #[test]
    fn ndjson_round_trip_recomputes_embeddings() {
        let mut s = MemoryStream::<f64>::new(2);
        for (i, text) in ["Isabella Rodriguez is setting out the pastries", "the stove is off"].iter().enumerate() {
            s.append(MemoryKind::Observation, *text, GameTime(i as i64), 2, hash_embedding(text), vec![])
                .unwrap();
        }
        let text = s.to_ndjson();
        assert!(!text.contains("embedding"));
        let back = MemoryStream::from_ndjson(2, &text, hash_embedding).unwrap();
        assert_eq!(back.memories(), s.memories());
        assert_eq!(back.to_ndjson(), text);
    }
}
