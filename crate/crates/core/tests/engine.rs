mod common;

use agentsim::commands::UserCommand;
use agentsim::engine::{replay, Engine, EngineOptions, EventLog, LogError, ReplayError, Snapshot};
use agentsim::environment::chebyshev;
use agentsim::events::{EventBody, PerceptSource};
use agentsim::gateway::Gateway;
use agentsim::protocol::{AckStatus, ServerMessage, Session};

const SHORT: u64 = 600;

fn short_run() -> Engine {
    let mut e = common::engine(common::SEED);
    e.run(SHORT);
    e
}

#[test]
fn same_seed_same_log() {
    let a = short_run().to_log(None).to_ndjson();
    let b = short_run().to_log(None).to_ndjson();
    assert_eq!(a, b);
}

#[test]
fn every_agent_always_has_an_action() {
    let mut e = common::engine(common::SEED);
    e.start();
    for _ in 0..300 {
        e.step();
        for a in &e.world.agents {
            assert!(!a.action.trim().is_empty(), "{} has no action at tick {}", a.identity.name, e.world.tick);
        }
    }
}

#[test]
fn snapshot_round_trip_continues_identically() {
    let mut a = common::engine(common::SEED);
    a.start();
    for _ in 0..300 {
        a.step();
    }
    let json = a.snapshot().to_json();
    let snap = Snapshot::from_json(&json).unwrap();
    let mut b = Engine::restore(snap, Gateway::scripted(common::script()), a.options()).unwrap();
    assert_eq!(b.snapshot().to_json(), json);
    let (na, nb) = (a.events().len(), b.events().len());
    for _ in 0..120 {
        a.step();
        b.step();
    }
    let tail = |e: &Engine, from: usize| -> Vec<String> { e.events()[from..].iter().map(|x| serde_json::to_string(x).unwrap()).collect() };
    assert_eq!(tail(&a, na), tail(&b, nb));
    assert_eq!(a.snapshot().to_json(), b.snapshot().to_json());
}

#[test]
fn snapshot_rejects_other_schema_versions() {
    let json = common::engine(1).snapshot().to_json().replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
    assert!(Snapshot::from_json(&json).is_err());
}

#[test]
fn truncated_log_is_an_error() {
    let text = short_run().to_log(None).to_ndjson();
    let cut = &text[..text.len() - 40];
    assert!(matches!(EventLog::parse(cut), Err(LogError::Json { .. })));
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(10);
    assert!(matches!(EventLog::parse(&lines.join("\n")), Err(LogError::MissingSeq { .. })));
    // a log that stops early on a line boundary replays only as far as it goes
    let lines: Vec<&str> = text.lines().collect();
    let shorter = lines[..lines.len() / 2].join("\n");
    let log = EventLog::parse(&shorter).unwrap();
    assert!(matches!(replay(&log, None), Err(ReplayError::Missing { .. }) | Err(ReplayError::Diverged { .. })));
}

#[test]
fn replay_until_stops_early() {
    let log = short_run().to_log(None);
    let r = replay(&log, Some(100)).unwrap();
    assert_eq!(r.engine.world.tick, 100);
    assert!(r.matched < log.events.len());
}

fn first_stove_watch(e: &mut Engine) -> (String, String) {
    for _ in 0..1440 {
        e.step();
        let w = &e.world;
        for o in w.tree.objects() {
            let node = w.tree.node(o);
            if node.name != "stove" {
                continue;
            }
            let tile = node.tile.unwrap();
            let area = w.tree.area_at(tile);
            if let Some(a) = w.agents.iter().find(|a| {
                !a.is_asleep() && !a.in_conversation(w.now) && chebyshev(a.tile, tile) <= 2 && w.tree.area_at(a.tile) == area
            }) {
                return (w.tree.path_string(o), a.identity.name.clone());
            }
        }
    }
    panic!("nobody came near a stove");
}

#[test]
fn burning_stove_gets_a_reaction_within_five_ticks() {
    let mut e = common::engine(common::SEED);
    e.start();
    let (stove, _) = first_stove_watch(&mut e);
    let outcome = e.apply_command(UserCommand::ObjectRewrite {
        text: format!("<{stove}> is burning"),
    });
    assert!(outcome.accepted, "{}", outcome.result);
    let from = e.events().len();
    for _ in 0..5 {
        e.step();
    }
    let reacted = e.events()[from..].iter().any(|ev| {
        matches!(&ev.body, EventBody::Percept { source: PerceptSource::Intent, text, .. } if text.contains("turn off the burning stove"))
    });
    assert!(reacted, "no reaction to the burning {stove}");
}

#[test]
fn malformed_rewrite_is_rejected_and_changes_nothing() {
    let mut e = common::engine(common::SEED);
    e.start();
    let before = e.snapshot();
    for text in ["<Hobbs Cafe: kitchen: stove> burning", "<Hobbs Cafe: attic: stove> is burning", "Hobbs Cafe: kitchen: stove is burning"] {
        let out = e.apply_command(UserCommand::ObjectRewrite { text: text.into() });
        assert!(!out.accepted, "{text} accepted");
    }
    let after = e.snapshot();
    assert_eq!(before.objects, after.objects);
    assert_eq!(serde_json::to_string(&before.agents).unwrap(), serde_json::to_string(&after.agents).unwrap());
    assert!(matches!(e.events().last().unwrap().body, EventBody::UserCommand { accepted: false, .. }));
}

#[test]
fn inner_voice_is_remembered_with_high_importance() {
    let mut e = common::engine(common::SEED);
    e.start();
    for _ in 0..480 {
        e.step();
    }
    let out = e.apply_command(UserCommand::InnerVoice {
        agent: "Klaus Mueller".into(),
        text: "you should visit the library".into(),
    });
    assert!(out.accepted);
    let i = e.agent_index("Klaus Mueller").unwrap();
    let m = e.world.agents[i].stream.memories().iter().rev().find(|m| m.description.contains("inner voice")).unwrap();
    assert_eq!(m.importance, e.config().inner_voice_importance);
    let bad = e.apply_command(UserCommand::InnerVoice {
        agent: "Nobody".into(),
        text: "hello".into(),
    });
    assert!(!bad.accepted);
}

#[test]
fn interviews_leave_memory_untouched() {
    let mut e = short_run();
    let before = serde_json::to_string(&e.snapshot().agents).unwrap();
    let out = e.apply_command(UserCommand::Interview {
        agent: "Klaus Mueller".into(),
        question: "Give an introduction of yourself.".into(),
        persona: "a reporter".into(),
        condition: Default::default(),
    });
    assert!(out.accepted);
    assert!(out.result.contains("Oak Hill College") && out.result.contains("sociology"), "{}", out.result);
    assert_eq!(serde_json::to_string(&e.snapshot().agents).unwrap(), before);
}

#[test]
fn session_queues_commands_until_the_next_tick() {
    let mut s = Session::new(common::engine(common::SEED));
    let ServerMessage::StateSnapshot { state } = s.snapshot() else { panic!() };
    assert_eq!(state.agents.len(), 25);
    let ack = s.receive(r#"{"type":"command","id":7,"command":{"kind":"inner_voice","agent":"Isabella Rodriguez","text":"bake something new"}}"#);
    assert!(matches!(ack, ServerMessage::CommandAck { id: Some(7), status: AckStatus::Queued, .. }));
    assert_eq!(s.pending(), 1);
    assert!(matches!(s.receive("not json"), ServerMessage::Error { .. }));
    let out = s.tick();
    assert_eq!(s.pending(), 0);
    assert!(matches!(out.first(), Some(ServerMessage::CommandAck { id: Some(7), status: AckStatus::Applied, .. })));
    assert!(matches!(out.last(), Some(ServerMessage::StateDelta { tick: 1, .. })));
    assert!(out.iter().any(|m| matches!(m, ServerMessage::Event { .. })));
    // a quiet tick only reports what changed
    let out = s.tick();
    let ServerMessage::StateDelta { agents, .. } = out.last().unwrap() else { panic!() };
    assert!(agents.len() < 25);
}

#[test]
fn measurement_can_be_switched_off() {
    let options = EngineOptions {
        measure: false,
        keep_prompts: false,
    };
    let mut e = Engine::new(common::scenario(), Default::default(), Gateway::scripted(common::script()), 1, options).unwrap();
    e.run(10);
    let log = e.to_log(None);
    assert!(agentsim::report::measured_answers(&log).is_empty());
    assert!(agentsim::report::diffusion(&log, &Default::default()).is_err());
}
