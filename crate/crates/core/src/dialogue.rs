//! Reaction decisions and two-party dialogue generation.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, Ctx};
use crate::clock::GameTime;
use crate::gateway::{Gateway, TemplateId};
use crate::slots;

pub const END_MARKER: &str = "[END]";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactionDecision {
    pub should_react: bool,
    pub reaction: Option<String>,
    pub starts_dialogue: bool,
}

impl ReactionDecision {
    pub fn continue_plan() -> Self {
        Self {
            should_react: false,
            reaction: None,
            starts_dialogue: false,
        }
    }
}

/// "Yes: <reaction>" reacts; anything else continues the plan.
pub fn parse_reaction(reply: &str) -> Option<String> {
    let t = reply.trim();
    let lower = t.to_lowercase();
    if !lower.starts_with("yes") {
        return None;
    }
    let rest = t[3..].trim_start_matches([':', ',', '.', '-', '!', ' ']).trim();
    let rest = rest.trim_end_matches('.').trim();
    (!rest.is_empty()).then(|| rest.to_string())
}

/// Perceived entity the agent might react to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Percept {
    /// Stable key for rate limiting ("agent:3", "object:17").
    pub key: String,
    /// Name of the observed entity.
    pub subject: String,
    pub text: String,
}

/// Asks whether `agent` should react to `percept`.
pub fn decide_reaction(agent: &mut Agent, gateway: &mut Gateway, ctx: &Ctx<'_>, percept: &Percept, now: GameTime) -> ReactionDecision {
    let context = agent.relationship_context(gateway, ctx.config, &percept.subject, &percept.text, now);
    let summary = agent.summary(gateway, ctx.config, now);
    let slots = slots! {
        "summary" => summary,
        "now" => ctx.calendar.long_datetime(now),
        "name" => agent.identity.name,
        "status" => agent.action,
        "observation" => percept.text,
        "first_name" => agent.identity.first_name(),
        "context" => context,
        "observed" => percept.subject,
    };
    match gateway.complete(TemplateId::ShouldReact, &slots) {
        Ok(reply) => match parse_reaction(&reply) {
            Some(r) => ReactionDecision {
                should_react: true,
                reaction: Some(r),
                starts_dialogue: false,
            },
            None => ReactionDecision::continue_plan(),
        },
        Err(e) => {
            warn!("reaction check for {} failed: {e}", agent.identity.name);
            ReactionDecision::continue_plan()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: u32,
    pub utterance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub participants: [u32; 2],
    pub turns: Vec<Turn>,
    pub ended: bool,
}

impl Dialogue {
    pub fn turns_by(&self, speaker: u32) -> usize {
        self.turns.iter().filter(|t| t.speaker == speaker).count()
    }

    /// Speakers alternate, starting with the initiator.
    pub fn alternates(&self) -> bool {
        self.turns
            .iter()
            .enumerate()
            .all(|(i, t)| t.speaker == self.participants[i % 2])
    }

    pub fn transcript(&self, names: impl Fn(u32) -> String) -> String {
        self.turns
            .iter()
            .map(|t| format!("{}: {}", names(t.speaker), t.utterance))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Cleans a model utterance; returns the text (if any) and whether the
/// speaker ended the conversation.
pub fn parse_utterance(reply: &str, speaker: &str, first_name: &str) -> (Option<String>, bool) {
    let mut text = reply.trim();
    let end = text.contains(END_MARKER);
    if let Some(i) = text.find(END_MARKER) {
        text = text[..i].trim();
    }
    for prefix in [speaker, first_name] {
        if let Some(rest) = text.strip_prefix(prefix).and_then(|r| r.strip_prefix(':')) {
            text = rest.trim();
        }
    }
    let text = text.trim_matches('"').trim();
    ((!text.is_empty()).then(|| text.to_string()), end)
}

fn pair_mut(agents: &mut [Agent], a: usize, b: usize) -> (&mut Agent, &mut Agent) {
    assert_ne!(a, b, "an agent cannot talk to itself");
    if a < b {
        let (lo, hi) = agents.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = agents.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

/// Generates a conversation opened by `agents[a]` with `agents[b]`.
///
/// Each turn retrieves the speaker's memories about the listener and about
/// the last utterance, summarizes them and asks for the next line. A speaker
/// who has spoken `turn_cap` times ends the conversation.
pub fn run_dialogue(
    agents: &mut [Agent],
    a: usize,
    b: usize,
    gateway: &mut Gateway,
    ctx: &Ctx<'_>,
    intent: &str,
    observation: &str,
    now: GameTime,
) -> Dialogue {
    let mut dialogue = Dialogue {
        participants: [agents[a].id, agents[b].id],
        turns: Vec::new(),
        ended: false,
    };
    let names: Vec<String> = vec![agents[a].identity.name.clone(), agents[b].identity.name.clone()];
    let mut speaker_idx = 0usize;
    while !dialogue.ended {
        let (s, l) = if speaker_idx == 0 { pair_mut(agents, a, b) } else { pair_mut(agents, b, a) };
        if dialogue.turns_by(s.id) >= ctx.config.dialogue_turn_cap {
            dialogue.ended = true;
            break;
        }
        gateway.set_agent(Some(s.id));
        let last = dialogue
            .turns
            .last()
            .map(|t| t.utterance.clone())
            .unwrap_or_else(|| observation.to_string());
        let context = s.relationship_context(gateway, ctx.config, &l.identity.name, &last, now);
        let summary = s.summary(gateway, ctx.config, now);
        let seen = if dialogue.turns.is_empty() { observation.to_string() } else { l.status_text() };
        let mut slots = slots! {
            "summary" => summary,
            "now" => ctx.calendar.long_datetime(now),
            "name" => s.identity.name,
            "status" => s.action,
            "observation" => seen,
            "first_name" => s.identity.first_name(),
            "context" => context,
            "listener" => l.identity.name,
            "listener_first_name" => l.identity.first_name(),
        };
        let template = if dialogue.turns.is_empty() {
            slots.insert("intent".into(), intent.to_string());
            TemplateId::DialogueFirst
        } else {
            let history = dialogue.transcript(|id| if id == dialogue.participants[0] { names[0].clone() } else { names[1].clone() });
            slots.insert("history".into(), history);
            TemplateId::DialogueNext
        };
        match gateway.complete(template, &slots) {
            Ok(reply) => {
                let (text, end) = parse_utterance(&reply, &s.identity.name, s.identity.first_name());
                if let Some(utterance) = text {
                    dialogue.turns.push(Turn {
                        speaker: s.id,
                        utterance,
                    });
                } else if !end {
                    warn!("{} produced an empty utterance; ending conversation", s.identity.name);
                    dialogue.ended = true;
                }
                if end {
                    dialogue.ended = true;
                }
            }
            Err(e) => {
                warn!("dialogue turn for {} failed: {e}", s.identity.name);
                dialogue.ended = true;
            }
        }
        speaker_idx ^= 1;
    }
    dialogue
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reaction_replies() {
        assert_eq!(parse_reaction("Yes: ask Eddy about his music composition project").as_deref(), Some("ask Eddy about his music composition project"));
        assert_eq!(parse_reaction("yes, turn off the stove."), Some("turn off the stove".into()));
        assert_eq!(parse_reaction("No"), None);
        assert_eq!(parse_reaction("Yes"), None);
        assert_eq!(parse_reaction("perhaps"), None);
    }

    #[test]
    fn utterance_cleanup() {
        assert_eq!(parse_utterance("Eddy Lin: \"Hey Dad, it's going well.\"", "Eddy Lin", "Eddy"), (Some("Hey Dad, it's going well.".into()), false));
        assert_eq!(parse_utterance("Bye! [END]", "A", "A"), (Some("Bye!".into()), true));
        assert_eq!(parse_utterance("[END]", "A", "A"), (None, true));
    }
}
