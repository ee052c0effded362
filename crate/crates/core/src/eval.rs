//! Interviews under ablation conditions and the emergent-behavior measures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Agent;
use crate::clock::{Calendar, GameTime};
use crate::config::EngineConfig;
use crate::gateway::{CallMeta, Gateway, TemplateId};
use crate::memory::MemoryKind;
use crate::slots;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unknown condition {0:?}")]
    UnknownCondition(String),
    #[error("invalid matcher pattern {pattern:?}: {message}")]
    Pattern { pattern: String, message: String },
    #[error("unknown location {0:?}")]
    UnknownLocation(String),
    #[error("no agent named {0:?}")]
    UnknownAgent(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    #[default]
    Full,
    NoReflection,
    NoReflectionNoPlanning,
    #[serde(alias = "ablated")]
    FullyAblated,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Full,
        Condition::NoReflection,
        Condition::NoReflectionNoPlanning,
        Condition::FullyAblated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Full => "full",
            Condition::NoReflection => "no_reflection",
            Condition::NoReflectionNoPlanning => "no_reflection_no_planning",
            Condition::FullyAblated => "fully_ablated",
        }
    }

    /// Memory kinds an interview under this condition may consult.
    pub fn allowed_kinds(self) -> BTreeSet<MemoryKind> {
        let kinds: &[MemoryKind] = match self {
            Condition::Full => &[MemoryKind::Observation, MemoryKind::Reflection, MemoryKind::Plan],
            Condition::NoReflection => &[MemoryKind::Observation, MemoryKind::Plan],
            Condition::NoReflectionNoPlanning => &[MemoryKind::Observation],
            Condition::FullyAblated => &[],
        };
        kinds.iter().copied().collect()
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Condition::Full),
            "no_reflection" => Ok(Condition::NoReflection),
            "no_reflection_no_planning" => Ok(Condition::NoReflectionNoPlanning),
            "fully_ablated" | "ablated" => Ok(Condition::FullyAblated),
            other => Err(EvalError::UnknownCondition(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SelfKnowledge,
    Memory,
    Plans,
    Reactions,
    Reflections,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterviewQuestion {
    pub category: Category,
    /// May contain `[name]`, filled with another agent's name.
    pub text: String,
}

/// The 25-question battery, five per category.
pub fn battery() -> Vec<InterviewQuestion> {
    let q = |category, text: &str| InterviewQuestion {
        category,
        text: text.to_string(),
    };
    use Category::*;
    vec![
        q(SelfKnowledge, "Give an introduction of yourself."),
        q(SelfKnowledge, "What's your occupation?"),
        q(SelfKnowledge, "What is your interest?"),
        q(SelfKnowledge, "Who do you live with?"),
        q(SelfKnowledge, "Describe your typical weekday schedule in broad strokes."),
        q(Memory, "Who is [name]?"),
        q(Memory, "Who is Kane Martinez?"),
        q(Memory, "Who is running for the election?"),
        q(Memory, "Was there a Valentine's day party?"),
        q(Memory, "Who is [name]?"),
        q(Plans, "What will you be doing at 6am today?"),
        q(Plans, "What will you be doing at 6pm today?"),
        q(Plans, "What will you have just finished doing at 1pm today?"),
        q(Plans, "What will you have just finished doing at 12pm today?"),
        q(Plans, "What will you be doing at 10pm today?"),
        q(Reactions, "Your breakfast is burning! What would you do?"),
        q(Reactions, "The bathroom is occupied. What would you do?"),
        q(Reactions, "You need to cook dinner but your refrigerator is empty. What would you do?"),
        q(Reactions, "You see your friend walking by the street. What would you do or say to your friend?"),
        q(Reactions, "You see fire on the street. What would you do?"),
        q(Reflections, "What inspires you in life the most right now, and why?"),
        q(Reflections, "If you had to guess given what you know about [name], what book do you think they will like and why?"),
        q(Reflections, "If you had to get something [name] likes for their birthday, what would you get them?"),
        q(Reflections, "What would you say to [name] to compliment them?"),
        q(Reflections, "If you could spend time with someone you talked to recently, who would it be and why?"),
    ]
}

/// Replaces `[name]` (or any bracketed placeholder) with `name`.
pub fn fill_name(text: &str, name: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\[[^\]]+\]").expect("valid regex"));
    re.replace_all(text, regex::NoExpand(name)).into_owned()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterviewAnswer {
    pub question: String,
    pub answer: String,
    pub failed: bool,
    pub memory_ids: Vec<u64>,
}

/// Runs interviews without touching any agent's memory. Condition-filtered
/// summaries are cached per (agent, condition) for the interviewer's lifetime.
pub struct Interviewer<'a> {
    pub config: &'a EngineConfig,
    pub calendar: &'a Calendar,
    pub annotations: BTreeMap<String, String>,
    summaries: BTreeMap<(u32, Condition), (String, Vec<u64>)>,
}

impl<'a> Interviewer<'a> {
    pub fn new(config: &'a EngineConfig, calendar: &'a Calendar) -> Self {
        Self {
            config,
            calendar,
            annotations: BTreeMap::new(),
            summaries: BTreeMap::new(),
        }
    }

    pub fn annotate(mut self, key: &str, value: impl Into<String>) -> Self {
        self.annotations.insert(key.to_string(), value.into());
        self
    }

    fn meta(&self, agent: &Agent, condition: Condition) -> CallMeta {
        let mut meta = CallMeta {
            annotations: self.annotations.clone(),
            ..Default::default()
        };
        meta.annotations.insert("condition".into(), condition.as_str().into());
        meta.annotations.insert("agent".into(), agent.identity.name.clone());
        meta
    }

    fn summary_for(&mut self, agent: &Agent, gateway: &mut Gateway, condition: Condition, now: GameTime) -> (String, Vec<u64>) {
        let key = (agent.id, condition);
        if let Some(hit) = self.summaries.get(&key) {
            return hit.clone();
        }
        let fallback = (format!("{}\n{}", agent.identity.header(), agent.identity.seed), Vec::new());
        let out = if condition == Condition::FullyAblated {
            fallback
        } else {
            let meta = self.meta(agent, condition).annotate("purpose", "summary");
            agent
                .peek_summary(gateway, self.config, now, &condition.allowed_kinds(), &meta)
                .unwrap_or(fallback)
        };
        self.summaries.insert(key, out.clone());
        out
    }

    /// Answers `question` as `agent` under `condition`.
    pub fn ask(
        &mut self,
        agent: &Agent,
        gateway: &mut Gateway,
        question: &str,
        persona: &str,
        condition: Condition,
        now: GameTime,
        extra: &[(&str, String)],
    ) -> InterviewAnswer {
        let (summary, mut ids) = self.summary_for(agent, gateway, condition, now);
        let memories_text;
        if condition == Condition::FullyAblated {
            memories_text = agent.identity.seed.clone();
        } else {
            let memories = agent.peek(gateway, self.config, question, now, Some(&condition.allowed_kinds()));
            memories_text = memories
                .iter()
                .map(|m| format!("- {}", m.description))
                .collect::<Vec<_>>()
                .join("\n");
            ids.extend(memories.iter().map(|m| m.id));
        }
        ids.sort_unstable();
        ids.dedup();
        let slots = slots! {
            "summary" => summary,
            "now" => self.calendar.long_datetime(now),
            "name" => agent.identity.name,
            "persona" => persona,
            "first_name" => agent.identity.first_name(),
            "memories" => memories_text,
            "question" => question,
        };
        let mut meta = self.meta(agent, condition);
        meta.memory_ids = ids.clone();
        for (k, v) in extra {
            meta.annotations.insert((*k).to_string(), v.clone());
        }
        match gateway.complete_with(TemplateId::InterviewAnswer, &slots, meta) {
            Ok(answer) => InterviewAnswer {
                question: question.to_string(),
                answer: answer.trim().to_string(),
                failed: false,
                memory_ids: ids,
            },
            Err(e) => {
                log::warn!("interview of {} failed: {e}", agent.identity.name);
                InterviewAnswer {
                    question: question.to_string(),
                    answer: String::new(),
                    failed: true,
                    memory_ids: ids,
                }
            }
        }
    }
}

/// Affirmation and negation patterns for one measured item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matchers {
    pub affirm: Vec<String>,
    pub negate: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub label: Label,
    /// Both kinds of pattern matched; needs a human look.
    pub flagged: bool,
}

fn compile(patterns: &[String]) -> Result<Vec<Regex>, EvalError> {
    patterns
        .iter()
        .map(|p| {
            RegexBuilder::new(p)
                .case_insensitive(true)
                .build()
                .map_err(|e| EvalError::Pattern {
                    pattern: p.clone(),
                    message: e.to_string(),
                })
        })
        .collect()
}

impl Matchers {
    pub fn validate(&self) -> Result<(), EvalError> {
        compile(&self.affirm)?;
        compile(&self.negate)?;
        Ok(())
    }
}

/// Rule-based yes/no label for an interview answer.
pub fn classify_knowledge(answer: &str, matchers: &Matchers) -> Result<Classification, EvalError> {
    let affirm = compile(&matchers.affirm)?.iter().any(|r| r.is_match(answer));
    let negate = compile(&matchers.negate)?.iter().any(|r| r.is_match(answer));
    Ok(match (affirm, negate) {
        (true, false) => Classification {
            label: Label::Yes,
            flagged: false,
        },
        (true, true) => Classification {
            label: Label::No,
            flagged: true,
        },
        _ => Classification {
            label: Label::No,
            flagged: false,
        },
    })
}

/// Manual corrections keyed by (phase, agent, item).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overrides {
    pub overrides: Vec<Override>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Override {
    pub phase: String,
    pub agent: String,
    pub item: String,
    pub label: Label,
}

impl Overrides {
    pub fn lookup(&self, phase: &str, agent: &str, item: &str) -> Option<Label> {
        self.overrides
            .iter()
            .rev()
            .find(|o| o.phase == phase && o.agent == agent && o.item == item)
            .map(|o| o.label)
    }
}

/// η = 2|E| / (|V|(|V|−1)); 0 for fewer than two vertices.
pub fn network_density(vertices: usize, edges: usize) -> f64 {
    if vertices < 2 {
        return 0.0;
    }
    2.0 * edges as f64 / (vertices as f64 * (vertices as f64 - 1.0))
}

/// Undirected edges where both endpoints claim to know each other.
pub fn mutual_edges(knows: &BTreeSet<(String, String)>) -> BTreeSet<(String, String)> {
    knows
        .iter()
        .filter(|(a, b)| a < b && knows.contains(&(b.clone(), a.clone())))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn party() -> Matchers {
        Matchers {
            affirm: vec![r"\byes\b".into(), r"invited me".into()],
            negate: vec![r"\bno\b".into(), r"did not know|didn't know|not aware".into()],
        }
    }

    #[test]
    fn classifies_answers() {
        let m = party();
        let no = classify_knowledge("No, I did not know there was a Valentine's day party", &m).unwrap();
        assert_eq!(no.label, Label::No);
        let yes = classify_knowledge("Yes, Isabella Rodriguez invited me to a Valentine's Day party", &m).unwrap();
        assert_eq!(yes, Classification { label: Label::Yes, flagged: false });
        assert_eq!(classify_knowledge("", &m).unwrap().label, Label::No);
        let both = classify_knowledge("Yes... no, I'm not aware", &m).unwrap();
        assert_eq!(both, Classification { label: Label::No, flagged: true });
    }

    #[test]
    fn density_formula() {
        assert_eq!(network_density(25, 300), 1.0);
        assert_eq!(network_density(25, 0), 0.0);
        assert_eq!(network_density(1, 0), 0.0);
        assert!((network_density(25, 50) - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn conditions_nest() {
        for w in Condition::ALL.windows(2) {
            assert!(w[1].allowed_kinds().is_subset(&w[0].allowed_kinds()));
        }
        assert_eq!("ablated".parse::<Condition>().unwrap(), Condition::FullyAblated);
    }

    #[test]
    fn battery_shape() {
        let b = battery();
        assert_eq!(b.len(), 25);
        for c in [Category::SelfKnowledge, Category::Memory, Category::Plans, Category::Reactions, Category::Reflections] {
            assert_eq!(b.iter().filter(|q| q.category == c).count(), 5);
        }
        assert_eq!(fill_name("Who is [name]?", "Ayesha Khan"), "Who is Ayesha Khan?");
    }
}
