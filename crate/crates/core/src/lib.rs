//! Deterministic generative-agent town: memory streams, reflection,
//! recursive planning, dialogue and a tick-based world with a replayable
//! event log.
//!
//! The numeric kernels (retrieval scoring, embeddings) are generic over
//! [`Real`]; the engine itself runs on `f64`.

pub mod agent;
pub mod clock;
pub mod commands;
pub mod config;
pub mod dialogue;
pub mod engine;
pub mod environment;
pub mod eval;
pub mod events;
pub mod gateway;
pub mod memory;
pub mod planning;
pub mod protocol;
pub mod reflection;
pub mod report;
pub mod scalar;
pub mod scenario;

pub use config::EngineConfig;
pub use engine::{replay, Engine, EngineError, EngineOptions, EventLog, Snapshot};
pub use gateway::{Gateway, Script, ScriptedBackend};
pub use scalar::Real;
pub use scenario::Scenario;

pub type MemoryStream32 = memory::MemoryStream<f32>;
pub type MemoryStream64 = memory::MemoryStream<f64>;
pub type MemoryObject32 = memory::MemoryObject<f32>;
pub type MemoryObject64 = memory::MemoryObject<f64>;
