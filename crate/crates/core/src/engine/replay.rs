//! Re-simulation of a recorded run from its log alone.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{Engine, EngineError, EngineOptions, EventLog};
use crate::commands::UserCommand;
use crate::events::{Event, EventBody};
use crate::gateway::{Gateway, ReplayBackend};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("log ends before sequence number {seq}; the log is truncated or incomplete")]
    Missing { seq: u64 },
    #[error("replay diverged at sequence number {seq}:\n  recorded: {recorded}\n  replayed: {replayed}")]
    Diverged { seq: u64, recorded: String, replayed: String },
    #[error("log holds {extra} events past the end of the replay (first unmatched seq {seq})")]
    Trailing { seq: u64, extra: usize },
}

pub struct ReplayOutcome {
    pub engine: Engine,
    /// Recorded events reproduced.
    pub matched: usize,
}

fn commands_by_tick(log: &EventLog) -> BTreeMap<u64, Vec<UserCommand>> {
    let mut out: BTreeMap<u64, Vec<UserCommand>> = BTreeMap::new();
    for e in &log.events {
        if let EventBody::UserCommand { command, .. } = &e.body {
            out.entry(e.tick).or_default().push(command.clone());
        }
    }
    out
}

struct Checker<'a> {
    recorded: &'a [Event],
    matched: usize,
}

impl Checker<'_> {
    fn check(&mut self, produced: &[Event]) -> Result<(), ReplayError> {
        for e in &produced[self.matched..] {
            let Some(r) = self.recorded.get(e.seq as usize) else {
                return Err(ReplayError::Missing { seq: e.seq });
            };
            let a = serde_json::to_string(r).expect("events serialize");
            let b = serde_json::to_string(e).expect("events serialize");
            if a != b {
                return Err(ReplayError::Diverged {
                    seq: e.seq,
                    recorded: a,
                    replayed: b,
                });
            }
            self.matched += 1;
        }
        Ok(())
    }
}

/// Replays `log` through tick `until` (exclusive; default: the whole run),
/// serving every model reply from the recorded exchanges.
pub fn replay(log: &EventLog, until: Option<u64>) -> Result<ReplayOutcome, ReplayError> {
    let h = &log.header;
    let backend = ReplayBackend::new(log.exchanges().cloned(), h.gateway);
    let options = EngineOptions {
        measure: h.measure,
        keep_prompts: h.keep_prompts,
    };
    let mut engine = Engine::new(h.scenario.clone(), h.config.clone(), Gateway::new(Box::new(backend)), h.seed, options)?;
    let mut commands = commands_by_tick(log);
    let mut checker = Checker {
        recorded: &log.events,
        matched: 0,
    };
    let stop = until.map_or(h.ticks, |u| u.min(h.ticks));

    engine.start();
    checker.check(engine.events())?;
    for tick in 0..stop {
        for c in commands.remove(&tick).unwrap_or_default() {
            engine.apply_command(c);
        }
        engine.step();
        checker.check(engine.events())?;
    }
    if stop == h.ticks {
        for c in commands.remove(&stop).unwrap_or_default() {
            engine.apply_command(c);
        }
        engine.finish();
        checker.check(engine.events())?;
        if checker.matched < log.events.len() {
            return Err(ReplayError::Trailing {
                seq: checker.matched as u64,
                extra: log.events.len() - checker.matched,
            });
        }
    }
    Ok(ReplayOutcome {
        matched: checker.matched,
        engine,
    })
}
