//! User commands, applied by the engine at tick boundaries.

use serde::{Deserialize, Serialize};

use crate::environment::path::Tile;
use crate::eval::Condition;

pub const DEFAULT_PERSONA: &str = "an interviewer";

fn default_persona() -> String {
    DEFAULT_PERSONA.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UserCommand {
    /// Ask an agent a question; never advances the clock or changes memory.
    Interview {
        agent: String,
        question: String,
        #[serde(default = "default_persona")]
        persona: String,
        #[serde(default)]
        condition: Condition,
    },
    /// A directive the agent hears as its own inner voice.
    InnerVoice { agent: String, text: String },
    /// `<area: subarea: object> is <status>`
    ObjectRewrite { text: String },
    /// Walk the visitor avatar one path toward `to`.
    EmbodyMove { to: Tile },
    /// The visitor says something to a nearby agent.
    EmbodySay { agent: String, text: String },
}

impl UserCommand {
    pub fn kind(&self) -> &'static str {
        match self {
            UserCommand::Interview { .. } => "interview",
            UserCommand::InnerVoice { .. } => "inner_voice",
            UserCommand::ObjectRewrite { .. } => "object_rewrite",
            UserCommand::EmbodyMove { .. } => "embody_move",
            UserCommand::EmbodySay { .. } => "embody_say",
        }
    }

    /// Interviews are answered immediately and do not alter the world.
    pub fn is_read_only(&self) -> bool {
        matches!(self, UserCommand::Interview { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_wire_form() {
        let c: UserCommand = serde_json::from_str(r#"{"kind":"interview","agent":"John Lin","question":"Who is running for office?"}"#).unwrap();
        assert_eq!(
            c,
            UserCommand::Interview {
                agent: "John Lin".into(),
                question: "Who is running for office?".into(),
                persona: DEFAULT_PERSONA.into(),
                condition: Condition::Full,
            }
        );
        assert!(serde_json::from_str::<UserCommand>(r#"{"kind":"teleport"}"#).is_err());
    }
}
