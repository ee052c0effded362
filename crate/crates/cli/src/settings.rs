//! Configuration file plus command-line overrides (flags > file > defaults).

use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use agentsim::config::GatewayMode;
use agentsim::gateway::{Gateway, LiveBackend, LiveConfig, Script};
use agentsim::EngineConfig;

static DEFAULTS: LazyLock<EngineConfig> = LazyLock::new(EngineConfig::default);

fn with_default(what: &str, value: impl std::fmt::Display) -> String {
    format!("{what} [default: {value}]")
}

/// `--config` file layout; every table and key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub engine: EngineConfig,
    pub live: LiveConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with [engine] and [live] tables
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, help = with_default("Recency decay per game hour", DEFAULTS.decay))]
    pub decay: Option<f64>,
    #[arg(long, help = with_default("Recency weight in retrieval", DEFAULTS.alpha_recency))]
    pub alpha_recency: Option<f64>,
    #[arg(long, help = with_default("Importance weight in retrieval", DEFAULTS.alpha_importance))]
    pub alpha_importance: Option<f64>,
    #[arg(long, help = with_default("Relevance weight in retrieval", DEFAULTS.alpha_relevance))]
    pub alpha_relevance: Option<f64>,
    #[arg(long, help = with_default("Importance sum that triggers reflection", DEFAULTS.threshold))]
    pub threshold: Option<u32>,
    #[arg(long, help = with_default("Perception radius in tiles", DEFAULTS.radius))]
    pub radius: Option<i32>,
    #[arg(long, help = with_default("Retrieval token budget", DEFAULTS.budget))]
    pub budget: Option<usize>,
}

pub struct Effective {
    pub engine: EngineConfig,
    pub live: LiveConfig,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<Effective> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut engine = file.engine;
        if let Some(v) = self.decay {
            engine.decay = v;
        }
        if let Some(v) = self.alpha_recency {
            engine.alpha_recency = v;
        }
        if let Some(v) = self.alpha_importance {
            engine.alpha_importance = v;
        }
        if let Some(v) = self.alpha_relevance {
            engine.alpha_relevance = v;
        }
        if let Some(v) = self.threshold {
            engine.threshold = v;
        }
        if let Some(v) = self.radius {
            engine.radius = v;
        }
        if let Some(v) = self.budget {
            engine.budget = v;
        }
        let problems = engine.validate();
        if !problems.is_empty() {
            let lines: Vec<String> = problems.iter().map(|d| format!("  {d}")).collect();
            bail!("invalid configuration:\n{}", lines.join("\n"));
        }
        Ok(Effective { engine, live: file.live })
    }
}

/// The script next to a scenario file, used when `--script` is not given.
pub fn sibling_script(scenario: &Path) -> PathBuf {
    scenario.with_file_name("script.json")
}

pub fn gateway(mode: GatewayMode, script: Option<&Script>, live: &LiveConfig) -> Result<Gateway> {
    match mode {
        GatewayMode::Scripted => match script {
            Some(s) => Ok(Gateway::scripted(s.clone())),
            None => bail!("the scripted gateway needs a script (pass --script)"),
        },
        GatewayMode::Live => {
            if std::env::var(&live.api_key_env).is_err() {
                log::warn!("{} is not set; live requests will be sent without credentials", live.api_key_env);
            }
            Ok(Gateway::new(Box::new(LiveBackend::new(live.clone()))))
        }
    }
}
