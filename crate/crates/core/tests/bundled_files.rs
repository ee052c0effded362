mod common;

use agentsim::eval::{battery, InterviewQuestion};
use agentsim::gateway::TemplateId;

#[test]
fn scenario_validates_with_25_agents() {
    let s = common::scenario();
    assert!(s.problems().is_empty(), "{:?}", s.problems());
    assert_eq!(s.agents.len(), 25);
}

#[test]
fn questions_file_is_the_battery() {
    let text = std::fs::read_to_string(common::valentine_dir().join("questions.json")).unwrap();
    let qs: Vec<InterviewQuestion> = serde_json::from_str(&text).unwrap();
    assert_eq!(qs, battery());
}

#[test]
fn script_covers_every_template_the_engine_uses() {
    let script = common::script();
    for t in TemplateId::ALL {
        // every scripted plan names its location
        if matches!(t, TemplateId::LocationChoose) {
            continue;
        }
        assert!(script.entries.iter().any(|e| e.template == t), "no entry for {t}");
    }
}

#[test]
fn full_run_has_no_script_misses() {
    let log = &common::full_run().log;
    let misses = log.exchanges().filter(|x| x.error.is_some()).count();
    assert_eq!(misses, 0);
}
