//! Engine parameters and run configuration validation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::memory::{RetrievalConfig, DEFAULT_BUDGET};
use crate::reflection::DEFAULT_THRESHOLD;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Recency decay per game hour since last access.
    pub decay: f64,
    pub alpha_recency: f64,
    pub alpha_importance: f64,
    pub alpha_relevance: f64,
    /// Reflect once observation importance since the last reflection exceeds this.
    pub threshold: u32,
    /// Chebyshev perception radius in tiles.
    pub radius: i32,
    /// Retrieval token budget.
    pub budget: usize,
    pub tick_minutes: i64,
    /// Minutes ahead of now that get decomposed to minute level.
    pub lookahead: i64,
    pub summary_refresh: i64,
    pub dialogue_turn_cap: usize,
    /// Minimum minutes between reaction checks on the same entity.
    pub reaction_cooldown: i64,
    /// Minimum minutes between two conversations of the same pair.
    pub dialogue_cooldown: i64,
    pub inner_voice_importance: u8,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            decay: 0.995,
            alpha_recency: 1.0,
            alpha_importance: 1.0,
            alpha_relevance: 1.0,
            threshold: DEFAULT_THRESHOLD,
            radius: 4,
            budget: DEFAULT_BUDGET,
            tick_minutes: 1,
            lookahead: 120,
            summary_refresh: 120,
            dialogue_turn_cap: 8,
            reaction_cooldown: 10,
            dialogue_cooldown: 180,
            inner_voice_importance: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn diag(field: &'static str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        field,
        message: message.into(),
    }
}

impl EngineConfig {
    pub fn retrieval(&self) -> RetrievalConfig<f64> {
        RetrievalConfig {
            decay: self.decay,
            alpha_recency: self.alpha_recency,
            alpha_importance: self.alpha_importance,
            alpha_relevance: self.alpha_relevance,
        }
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            out.push(diag("decay", "decay must be in (0,1]"));
        }
        for (field, v) in [
            ("alpha_recency", self.alpha_recency),
            ("alpha_importance", self.alpha_importance),
            ("alpha_relevance", self.alpha_relevance),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(diag(field, format!("{field} must be a finite number >= 0")));
            }
        }
        if self.threshold == 0 {
            out.push(diag("threshold", "threshold must be >= 1"));
        }
        if !(0..=64).contains(&self.radius) {
            out.push(diag("radius", "radius must be in [0,64]"));
        }
        if self.budget == 0 {
            out.push(diag("budget", "budget must be >= 1"));
        }
        if !(1..=60).contains(&self.tick_minutes) {
            out.push(diag("tick_minutes", "tick_minutes must be in [1,60]"));
        }
        if self.lookahead < 0 {
            out.push(diag("lookahead", "lookahead must be >= 0"));
        }
        if self.summary_refresh < 1 {
            out.push(diag("summary_refresh", "summary_refresh must be >= 1"));
        }
        if self.dialogue_turn_cap == 0 {
            out.push(diag("dialogue_turn_cap", "dialogue_turn_cap must be >= 1"));
        }
        if self.reaction_cooldown < 0 {
            out.push(diag("reaction_cooldown", "reaction_cooldown must be >= 0"));
        }
        if self.dialogue_cooldown < 0 {
            out.push(diag("dialogue_cooldown", "dialogue_cooldown must be >= 0"));
        }
        if !(1..=10).contains(&self.inner_voice_importance) {
            out.push(diag("inner_voice_importance", "inner_voice_importance must be in [1,10]"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayMode {
    Scripted,
    Live,
}

impl std::str::FromStr for GatewayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scripted" => Ok(GatewayMode::Scripted),
            "live" => Ok(GatewayMode::Live),
            other => Err(format!("unknown gateway mode {other:?} (expected scripted or live)")),
        }
    }
}
