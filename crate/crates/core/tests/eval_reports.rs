mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use agentsim::engine::EventLog;
use agentsim::eval::{classify_knowledge, mutual_edges, network_density, Condition, Label, Matchers, Override, Overrides};
use agentsim::events::EventBody;
use agentsim::report::{self, ReportError};

fn log() -> &'static EventLog {
    &common::full_run().log
}

fn agent_id(name: &str) -> u32 {
    log().header.scenario.agents.iter().position(|a| a.name == name).unwrap() as u32
}

fn end_of_log() -> u64 {
    log().events.len() as u64
}

proptest! {
    #[test]
    fn density_stays_in_bounds_and_grows_with_edges(v in 0usize..60, frac in 0.0f64..1.0) {
        let max = if v < 2 { 0 } else { v * (v - 1) / 2 };
        let e = ((max as f64) * frac) as usize;
        let d = network_density(v, e);
        prop_assert!((0.0..=1.0).contains(&d));
        if e < max {
            prop_assert!(network_density(v, e + 1) > d);
        }
    }

    #[test]
    fn mutual_edges_need_both_directions(pairs in prop::collection::btree_set((0u8..8, 0u8..8), 0..40)) {
        let knows: BTreeSet<(String, String)> = pairs.iter().filter(|(a, b)| a != b).map(|(a, b)| (a.to_string(), b.to_string())).collect();
        let edges = mutual_edges(&knows);
        for (a, b) in &edges {
            prop_assert!(a < b);
            prop_assert!(knows.contains(&(a.clone(), b.clone())) && knows.contains(&(b.clone(), a.clone())));
        }
        let expected = knows.iter().filter(|(a, b)| knows.contains(&(b.clone(), a.clone()))).count() / 2;
        prop_assert_eq!(edges.len(), expected);
    }
}

#[test]
fn classification_examples() {
    let party = &log().header.scenario.measurements.items[0];
    assert_eq!(party.key, "party");
    let m = &party.matchers;
    assert_eq!(classify_knowledge("No, I did not know there was a Valentine's day party.", m).unwrap().label, Label::No);
    assert_eq!(
        classify_knowledge("Yes, Isabella Rodriguez invited me to a Valentine's Day party at Hobbs Cafe.", m).unwrap().label,
        Label::Yes
    );
    assert_eq!(classify_knowledge("", m).unwrap().label, Label::No);
    let bad = Matchers {
        affirm: vec!["(".into()],
        negate: vec![],
    };
    assert!(classify_knowledge("x", &bad).is_err());
}

#[test]
fn hallucination_check_needs_prior_evidence() {
    let party = &log().header.scenario.measurements.items[0].evidence;
    // Klaus heard about the party from Isabella
    assert!(report::verify_not_hallucinated(log(), agent_id("Klaus Mueller"), party, end_of_log()));
    // the host holds it from her seed memory, before anything happened
    let first_tick = log().events.iter().find(|e| e.tick > 0).unwrap().seq;
    assert!(report::verify_not_hallucinated(log(), agent_id("Isabella Rodriguez"), party, first_tick));
    // nothing before the first event
    assert!(!report::verify_not_hallucinated(log(), agent_id("Klaus Mueller"), party, 0));
    // an agent that never heard of it
    let d = report::diffusion(log(), &Overrides::default()).unwrap();
    let outsider = log().header.scenario.agents.iter().find(|a| !d[0].holders_end.contains(&a.name)).unwrap();
    assert!(!report::verify_not_hallucinated(log(), agent_id(&outsider.name), party, end_of_log()));
}

#[test]
fn overriding_a_yes_without_evidence_flags_a_hallucination() {
    let d = report::diffusion(log(), &Overrides::default()).unwrap();
    let outsider = log().header.scenario.agents.iter().find(|a| !d[0].holders_end.contains(&a.name)).unwrap().name.clone();
    let o = Overrides {
        overrides: vec![Override {
            phase: "end".into(),
            agent: outsider.clone(),
            item: "party".into(),
            label: Label::Yes,
        }],
    };
    let d = report::diffusion(log(), &o).unwrap();
    assert_eq!(d[0].hallucination_flags.get(&outsider), Some(&true));
    assert!(!d[0].holders_end.contains(&outsider));
}

#[test]
fn holders_are_originators_plus_those_told() {
    let items = &log().header.scenario.measurements.items;
    let d = report::diffusion(log(), &Overrides::default()).unwrap();
    let names = &log().header.scenario.agents;
    for (item, r) in items.iter().zip(&d) {
        let needles: Vec<String> = item.evidence.iter().map(|e| e.to_lowercase()).collect();
        let mut told = BTreeSet::new();
        for e in &log().events {
            if let EventBody::Percept { agent, text, .. } = &e.body {
                if needles.iter().any(|n| text.to_lowercase().contains(n)) {
                    told.insert(names[*agent as usize].name.clone());
                }
            }
        }
        assert_eq!(r.holders_end, told, "{}", item.key);
        assert!(r.holders_start.is_subset(&r.holders_end));
    }
}

#[test]
fn coordination_edge_cases() {
    let c = &log().header.scenario.measurements.coordination[0];
    let cal = log().header.scenario.calendar();
    let (from, to) = (cal.at(c.from), cal.at(c.to));
    let none = report::coordination_count(log(), &c.location, from, to, &BTreeSet::new()).unwrap();
    assert!(none.is_empty());
    let all: BTreeSet<String> = c.invited.iter().cloned().collect();
    let attended = report::coordination_count(log(), &c.location, from, to, &all).unwrap();
    assert_eq!(attended.len(), 5);
    // the host is present throughout but only counts when invited
    let host: BTreeSet<String> = ["Isabella Rodriguez".to_string()].into();
    assert!(!all.contains("Isabella Rodriguez"));
    assert_eq!(report::coordination_count(log(), &c.location, from, to, &host).unwrap(), host);
    assert!(matches!(
        report::coordination_count(log(), "Atlantis", from, to, &all),
        Err(ReportError::Eval(_))
    ));
}

#[test]
fn relationship_override_changes_density() {
    let base = report::density(log(), &Overrides::default()).unwrap();
    assert_eq!(base.start.edges, 50);
    let o = Overrides {
        overrides: vec![Override {
            phase: "end".into(),
            agent: "Klaus Mueller".into(),
            item: "Maria Lopez".into(),
            label: Label::No,
        }],
    };
    let changed = report::density(log(), &o).unwrap();
    assert_eq!(changed.end.edges, base.end.edges - 1);
}

#[test]
fn report_tables_render() {
    let o = Overrides::default();
    let d = report::diffusion_table(&report::diffusion(log(), &o).unwrap());
    assert!(d.contains("party") && d.contains("candidacy"));
    let c = report::coordination_table(&report::coordination(log()).unwrap());
    assert!(c.contains("5/12") || c.contains("5 of 12"), "{c}");
}

#[test]
fn measurement_interviews_are_tagged_full() {
    let scan = report::ablation_scan(log());
    assert!(scan.violations.is_empty());
    assert!(scan.checked.get(&Condition::Full).copied().unwrap_or(0) > 0);
    let answers = report::measured_answers(log());
    assert!(answers.iter().any(|a| a.phase == "start") && answers.iter().any(|a| a.phase == "end"));
}
