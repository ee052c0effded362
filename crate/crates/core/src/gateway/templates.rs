//! Prompt template registry.
//!
//! Every language-model call in the engine goes through one of these
//! templates. Bodies use `{slot}` placeholders; rendering fails if any
//! placeholder is left unfilled.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GatewayError;

/// Named slot values for a template. Extra entries are allowed: script
/// matchers may inspect slots that the body does not print.
pub type Slots = BTreeMap<String, String>;

/// Builds a [`Slots`] map from `key => value` pairs.
#[macro_export]
macro_rules! slots {
    ($($key:expr => $value:expr),* $(,)?) => {{
        let mut map = $crate::gateway::Slots::new();
        $( map.insert(String::from($key), ::std::string::ToString::to_string(&$value)); )*
        map
    }};
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Importance,
    ReflectionQuestions,
    ReflectionInsights,
    DayPlan,
    DecomposeHour,
    DecomposeMinute,
    ShouldReact,
    DialogueFirst,
    DialogueNext,
    SummaryCore,
    SummaryOccupation,
    SummaryFeeling,
    ContextRelationship,
    LocationChoose,
    ObjectState,
    Emoji,
    InterviewAnswer,
}

impl TemplateId {
    pub const ALL: [TemplateId; 17] = [
        TemplateId::Importance,
        TemplateId::ReflectionQuestions,
        TemplateId::ReflectionInsights,
        TemplateId::DayPlan,
        TemplateId::DecomposeHour,
        TemplateId::DecomposeMinute,
        TemplateId::ShouldReact,
        TemplateId::DialogueFirst,
        TemplateId::DialogueNext,
        TemplateId::SummaryCore,
        TemplateId::SummaryOccupation,
        TemplateId::SummaryFeeling,
        TemplateId::ContextRelationship,
        TemplateId::LocationChoose,
        TemplateId::ObjectState,
        TemplateId::Emoji,
        TemplateId::InterviewAnswer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Importance => "importance",
            TemplateId::ReflectionQuestions => "reflection_questions",
            TemplateId::ReflectionInsights => "reflection_insights",
            TemplateId::DayPlan => "day_plan",
            TemplateId::DecomposeHour => "decompose_hour",
            TemplateId::DecomposeMinute => "decompose_minute",
            TemplateId::ShouldReact => "should_react",
            TemplateId::DialogueFirst => "dialogue_first",
            TemplateId::DialogueNext => "dialogue_next",
            TemplateId::SummaryCore => "summary_core",
            TemplateId::SummaryOccupation => "summary_occupation",
            TemplateId::SummaryFeeling => "summary_feeling",
            TemplateId::ContextRelationship => "context_relationship",
            TemplateId::LocationChoose => "location_choose",
            TemplateId::ObjectState => "object_state",
            TemplateId::Emoji => "emoji",
            TemplateId::InterviewAnswer => "interview_answer",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| GatewayError::UnknownTemplate(s.to_string()))
    }
}

const IMPORTANCE: &str = "On the scale of 1 to 10, where 1 is purely mundane (e.g., brushing teeth, making bed) and 10 is extremely poignant (e.g., a break up, college acceptance), rate the likely poignancy of the following piece of memory.
Memory: {memory}
Rating: <fill in>";

const REFLECTION_QUESTIONS: &str = "{statements}
Given only the information above, what are 3 most salient high-level questions we can answer about the subjects in the statements?";

const REFLECTION_INSIGHTS: &str = "Statements about {name}
{statements}
What 5 high-level insights can you infer from the above statements? (example format: insight (because of 1, 5, 3))";

const DAY_PLAN: &str = "{summary}
{previous_day}
{revision}Today is {today}. Here is {first_name}'s plan today in broad strokes: 1)";

const DECOMPOSE_HOUR: &str = "{summary}
Today is {today}. {first_name} plans to {task} from {start} to {end} ({duration} minutes).
Break this plan into hour-long chunks of activity, one per line, in the form \"<time>: <activity>\".";

const DECOMPOSE_MINUTE: &str = "{summary}
Today is {today}. {first_name} plans to {task} from {start} to {end} ({duration} minutes).
Break this plan into 5 to 15 minute chunks of activity, one per line, in the form \"<time>: <activity>\".";

const SHOULD_REACT: &str = "{summary}
It is {now}.
{name}'s status: {status}
Observation: {observation}
Summary of relevant context from {first_name}'s memory: {context}
Should {first_name} react to the observation, and if so, what would be an appropriate reaction?";

const DIALOGUE_FIRST: &str = "{summary}
It is {now}.
{name}'s status: {status}
Observation: {observation}
Summary of relevant context from {first_name}'s memory: {context}
{first_name} is planning to {intent}. What would {first_name} say to {listener_first_name}?";

const DIALOGUE_NEXT: &str = "{summary}
It is {now}.
{name}'s status: {status}
Observation: {observation}
Summary of relevant context from {first_name}'s memory: {context}
Here is the dialogue history:
{history}
How would {first_name} respond to {listener_first_name}? (Reply [END] if {first_name} would end the conversation.)";

const SUMMARY_CORE: &str = "How would one describe {name}'s core characteristics given the following statements?
{statements}";

const SUMMARY_OCCUPATION: &str = "How would one describe {name}'s current daily occupation given the following statements?
{statements}";

const SUMMARY_FEELING: &str = "How would one describe {name}'s feeling about their recent progress in life given the following statements?
{statements}";

const CONTEXT_RELATIONSHIP: &str = "{statements}
Given the statements above, summarize the relevant context from {name}'s memory about {observed}: what is {name}'s relationship with {observed}, and what is relevant to \"{observed_status}\"?";

const LOCATION_CHOOSE: &str = "{summary}
{name} is currently in {current} that has {current_children}.
{name} knows of the following areas: {options}.
* Prefer to stay in the current area if the activity can be done there.
{name} is planning to {action}. Which {level} should {name} go to?";

const OBJECT_STATE: &str = "The {object} in {location} is currently {status}.
{agent} is {action}.
What is the state of the {object} now? Reply with a short phrase.";

const EMOJI: &str = "Convert the following action into one to three emoji.
Action: {action}
Emoji:";

const INTERVIEW_ANSWER: &str = "{summary}
It is {now}.
{name} is being interviewed by {persona}.
Relevant memories of {first_name}:
{memories}
{persona}: {question}
How would {first_name} answer?";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub body: &'static str,
}

impl PromptTemplate {
    /// Placeholder names in order of first appearance.
    pub fn slot_names(&self) -> Vec<&'static str> {
        let mut names: Vec<&'static str> = Vec::new();
        let mut rest = self.body;
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(close) => {
                    let name = &after[..close];
                    if is_slot_name(name) && !names.contains(&name) {
                        names.push(name);
                    }
                    rest = &after[close + 1..];
                }
                None => break,
            }
        }
        names
    }

    pub fn render(&self, slots: &Slots) -> Result<String, GatewayError> {
        let mut out = String::with_capacity(self.body.len() + 256);
        let mut rest = self.body;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let close = match after.find('}') {
                Some(close) if is_slot_name(&after[..close]) => close,
                _ => {
                    out.push('{');
                    rest = after;
                    continue;
                }
            };
            let name = &after[..close];
            let value = slots.get(name).ok_or_else(|| GatewayError::MissingSlot {
                template: self.id,
                slot: name.to_string(),
            })?;
            out.push_str(value);
            rest = &after[close + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

fn is_slot_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c == '_')
}

#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl TemplateRegistry {
    pub fn standard() -> Self {
        let bodies = [
            (TemplateId::Importance, IMPORTANCE),
            (TemplateId::ReflectionQuestions, REFLECTION_QUESTIONS),
            (TemplateId::ReflectionInsights, REFLECTION_INSIGHTS),
            (TemplateId::DayPlan, DAY_PLAN),
            (TemplateId::DecomposeHour, DECOMPOSE_HOUR),
            (TemplateId::DecomposeMinute, DECOMPOSE_MINUTE),
            (TemplateId::ShouldReact, SHOULD_REACT),
            (TemplateId::DialogueFirst, DIALOGUE_FIRST),
            (TemplateId::DialogueNext, DIALOGUE_NEXT),
            (TemplateId::SummaryCore, SUMMARY_CORE),
            (TemplateId::SummaryOccupation, SUMMARY_OCCUPATION),
            (TemplateId::SummaryFeeling, SUMMARY_FEELING),
            (TemplateId::ContextRelationship, CONTEXT_RELATIONSHIP),
            (TemplateId::LocationChoose, LOCATION_CHOOSE),
            (TemplateId::ObjectState, OBJECT_STATE),
            (TemplateId::Emoji, EMOJI),
            (TemplateId::InterviewAnswer, INTERVIEW_ANSWER),
        ];
        let templates = bodies
            .into_iter()
            .map(|(id, body)| (id, PromptTemplate { id, body }))
            .collect();
        Self { templates }
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        // standard() registers every id
        &self.templates[&id]
    }

    pub fn render(&self, id: TemplateId, slots: &Slots) -> Result<String, GatewayError> {
        self.get(id).render(slots)
    }
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_template_is_registered() {
        let reg = TemplateRegistry::standard();
        for id in TemplateId::ALL {
            assert_eq!(reg.get(id).id, id);
            assert_eq!(id.as_str().parse::<TemplateId>().unwrap(), id);
        }
    }

    #[test]
    fn importance_prompt_is_the_poignancy_prompt() {
        let prompt = TemplateRegistry::standard()
            .render(
                TemplateId::Importance,
                &slots! {"memory" => "buying groceries at The Willows Market and Pharmacy"},
            )
            .unwrap();
        assert!(prompt.starts_with("On the scale of 1 to 10, where 1 is purely mundane"));
        assert!(prompt.contains("rate the likely poignancy of the following piece of memory."));
        assert!(prompt.contains("Memory: buying groceries at The Willows Market and Pharmacy\nRating: <fill in>"));
    }

    #[test]
    fn missing_slot_is_an_error() {
        let err = TemplateRegistry::standard()
            .render(TemplateId::ReflectionInsights, &slots! {"name" => "Klaus Mueller"})
            .unwrap_err();
        match err {
            GatewayError::MissingSlot { template, slot } => {
                assert_eq!(template, TemplateId::ReflectionInsights);
                assert_eq!(slot, "statements");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slot_names_are_listed_once() {
        let reg = TemplateRegistry::standard();
        let names = reg.get(TemplateId::ShouldReact).slot_names();
        assert_eq!(
            names,
            vec!["summary", "now", "name", "status", "observation", "first_name", "context"]
        );
    }

    #[test]
    fn insight_prompt_keeps_example_format() {
        let prompt = TemplateRegistry::standard()
            .render(
                TemplateId::ReflectionInsights,
                &slots! {"name" => "Klaus Mueller", "statements" => "1. Klaus Mueller is writing a research paper"},
            )
            .unwrap();
        assert!(prompt.ends_with(
            "What 5 high-level insights can you infer from the above statements? (example format: insight (because of 1, 5, 3))"
        ));
    }
}
