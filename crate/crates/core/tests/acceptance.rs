//! Headline acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

mod common;

use std::collections::BTreeMap;
use std::collections::{BTreeSet, VecDeque};
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use agentsim::clock::GameTime;
use agentsim::engine::{replay, EventLog};
use agentsim::environment::{path_find, CollisionMap, PathError, Tile};
use agentsim::eval::{battery, network_density, Condition, Overrides};
use agentsim::events::EventBody;
use agentsim::gateway::{Gateway, Script, ScriptEntry, TemplateId};
use agentsim::memory::{recency_score, score_importance, MemoryKind, RetrievalConfig, RetrievalQuery};
use agentsim::reflection::{reflection_due, well_founded, DEFAULT_THRESHOLD};
use agentsim::report;

use common::{day, oracle, TWO_DAYS};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn retrieval_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let config = RetrievalConfig::<f64>::default();
    let mut compared = 0;
    for case in 0..1000 {
        let mut stream = oracle::random_stream(&mut rng, 200, 16);
        let last = stream.memories().last().map_or(0, |m| m.created_at.0);
        let now = GameTime(last + rng.gen_range(0..2000));
        let budget = rng.gen_range(20..1500);
        let kinds: Option<Vec<MemoryKind>> = rng
            .gen_bool(0.3)
            .then(|| oracle::KINDS.iter().copied().filter(|_| rng.gen_bool(0.6)).collect());
        let q = oracle::unit_vector(&mut rng, 16);
        let expected = oracle::retrieve(&stream, &q, now, budget, kinds.as_deref());
        let query = RetrievalQuery::new("q", q, now)
            .with_budget(budget)
            .with_filter(kinds.map(|k| k.into_iter().collect()));
        let got: Vec<u64> = stream.retrieve(&query, &config).map_err(|e| e.to_string())?.iter().map(|m| m.id).collect();
        ensure(got == expected, format!("case {case}: got {got:?}, oracle {expected:?}"))?;
        compared += got.len();
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 10.0, format!("took {secs:.2}s"))?;
    Ok(format!("1000 streams, {compared} ranked ids agree, {secs:.2}s"))
}

fn rational_pow(base: &BigRational, n: u32) -> BigRational {
    (0..n).fold(BigRational::from_integer(BigInt::from(1)), |acc, _| acc * base)
}

fn to_f64(r: &BigRational) -> f64 {
    // 18 exact decimal digits, then to f64
    let scale = BigInt::from(10).pow(18);
    let scaled: BigInt = (r.numer() * &scale) / r.denom();
    scaled.to_string().parse::<f64>().unwrap() / 1e18
}

fn recency_values() -> Outcome {
    let base = BigRational::new(BigInt::from(995), BigInt::from(1000));
    let mut parts = Vec::new();
    for (hours, stated) in [(10u32, 0.951110), (100, 0.605770)] {
        let exact = to_f64(&rational_pow(&base, hours));
        let ours = recency_score(GameTime(i64::from(hours) * 60), GameTime(0), 0.995f64);
        ensure((ours - exact).abs() < 1e-6, format!("0.995^{hours}: {ours} vs exact {exact}"))?;
        ensure((stated - exact).abs() < 1e-6, format!("stated {stated} vs exact {exact}"))?;
        parts.push(format!("0.995^{hours}={ours:.6}"));
    }
    Ok(parts.join(", "))
}

fn importance_parsing() -> Outcome {
    let mut g = Gateway::scripted(common::script());
    let low = score_importance(&mut g, "cleaning up the room");
    let high = score_importance(&mut g, "asking your crush out on a date");
    ensure(low.value == 2 && high.value == 8, format!("examples scored {} and {}", low.value, high.value))?;
    let script = Script::new(vec![
        ScriptEntry::new(TemplateId::Importance, "15").when_contains("memory", "loud"),
        ScriptEntry::new(TemplateId::Importance, "no idea, sorry"),
    ]);
    let mut g = Gateway::scripted(script);
    let clamped = score_importance(&mut g, "a loud noise");
    ensure(clamped.value == 10 && !clamped.defaulted, format!("\"15\" gave {clamped:?}"))?;
    let before = g.stats().completions;
    let junk = score_importance(&mut g, "something");
    let calls = g.stats().completions - before;
    ensure(junk.value == 3 && junk.defaulted && calls == 2, format!("junk gave {junk:?} after {calls} calls"))?;
    Ok("2, 8, \"15\"->10, junk->3 after one retry".into())
}

fn reflection_trigger() -> Outcome {
    // Synthetic sequences: a cycle fires exactly when the running sum passes 150.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let seq: Vec<u32> = (0..rng.gen_range(1..120)).map(|_| rng.gen_range(1..=10)).collect();
        let mut acc = 0;
        for v in seq {
            acc += v;
            let due = reflection_due(acc, DEFAULT_THRESHOLD);
            ensure(due == (acc > 150), format!("accumulator {acc} gave due={due}"))?;
            if due {
                acc = 0;
            }
        }
    }
    let total: u32 = day::importances().iter().map(|&v| u32::from(v)).sum();
    let mut expected = 0;
    let mut acc = 0;
    for v in day::importances() {
        acc += u32::from(v);
        if acc > 150 {
            expected += 1;
            acc = 0;
        }
    }
    let d = day::run();
    ensure(d.reflections == expected, format!("{} cycles, oracle {expected}", d.reflections))?;
    ensure((2..=3).contains(&d.reflections), format!("{} cycles in a day of {total}", d.reflections))?;
    ensure(d.fired_at.iter().all(|&a| a > 150), format!("fired at {:?}", d.fired_at))?;
    Ok(format!("day of {total} importance -> {} reflection cycles", d.reflections))
}

fn reflection_tree() -> Outcome {
    let run = common::full_run();
    let kinds = report::memory_kinds(&run.log);
    let mut cites: BTreeMap<(u32, u64), Vec<u64>> = BTreeMap::new();
    for e in &run.log.events {
        if let EventBody::Reflection { agent, memory_id, citations, .. } = &e.body {
            ensure(!citations.is_empty(), format!("reflection {agent}/{memory_id} cites nothing"))?;
            ensure(
                citations.iter().all(|c| c < memory_id),
                format!("reflection {agent}/{memory_id} cites a later id: {citations:?}"),
            )?;
            cites.insert((*agent, *memory_id), citations.clone());
        }
    }
    ensure(!cites.is_empty(), "the run produced no reflections")?;
    // closure over the log alone
    for &(agent, id) in cites.keys() {
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            match kinds.get(&(agent, cur)) {
                Some(MemoryKind::Observation) => {}
                Some(MemoryKind::Reflection) => stack.extend(cites[&(agent, cur)].iter().copied()),
                other => return Err(format!("{agent}/{id} reaches {cur} of kind {other:?}")),
            }
        }
    }
    let d = day::run();
    let day_reflections: Vec<u64> = d
        .stream
        .memories()
        .iter()
        .filter(|m| m.kind == MemoryKind::Reflection)
        .map(|m| m.id)
        .collect();
    ensure(
        day_reflections.iter().all(|&id| well_founded(d.stream.memories(), id)),
        "synthetic day has a reflection that is not well founded",
    )?;
    Ok(format!(
        "{} logged reflections and {} synthetic ones close over observations",
        cites.len(),
        day_reflections.len()
    ))
}

fn plan_tiling() -> Outcome {
    let mut e = common::engine(common::SEED);
    e.start();
    let mut checked_days = BTreeSet::new();
    let mut regenerations = 0;
    for _ in 0..TWO_DAYS {
        let now = e.world.now;
        let before: Vec<Option<(GameTime, Vec<String>)>> = e
            .world
            .agents
            .iter()
            .map(|a| {
                a.plan.as_ref().map(|p| {
                    let past = p
                        .entries
                        .iter()
                        .filter(|x| x.end() <= now)
                        .map(|x| serde_json::to_string(x).unwrap())
                        .collect();
                    (p.day_start, past)
                })
            })
            .collect();
        let seen = e.events().len();
        e.step();
        let reacted: BTreeSet<u32> = e.events()[seen..]
            .iter()
            .filter_map(|ev| match &ev.body {
                EventBody::Plan { agent, cause: agentsim::events::PlanCause::Reaction, .. } => Some(*agent),
                _ => None,
            })
            .collect();
        regenerations += reacted.len();
        for (a, prior) in e.world.agents.iter().zip(&before) {
            let Some(plan) = &a.plan else { continue };
            plan.check().map_err(|err| format!("{} at tick {}: {err}", a.identity.name, e.world.tick))?;
            checked_days.insert((a.id, plan.day_start));
            let Some((day_start, past)) = prior else { continue };
            if *day_start != plan.day_start {
                continue;
            }
            let now_entries: BTreeSet<String> = plan.entries.iter().map(|x| serde_json::to_string(x).unwrap()).collect();
            if let Some(lost) = past.iter().find(|p| !now_entries.contains(*p)) {
                return Err(format!("{} lost or changed a past entry: {lost}", a.identity.name));
            }
        }
    }
    ensure(regenerations > 0, "no reaction regenerated a plan")?;
    Ok(format!("{} agent-days tiled exactly; {regenerations} regenerations kept their past", checked_days.len()))
}

fn bfs(map: &CollisionMap, from: Tile, to: Tile) -> Option<usize> {
    let mut dist = BTreeMap::from([(from, 0usize)]);
    let mut queue = VecDeque::from([from]);
    while let Some(t) = queue.pop_front() {
        if t == to {
            return Some(dist[&t]);
        }
        let d = dist[&t];
        for n in [(t.0 - 1, t.1), (t.0 + 1, t.1), (t.0, t.1 - 1), (t.0, t.1 + 1)] {
            if !map.is_blocked(n) && !dist.contains_key(&n) {
                dist.insert(n, d + 1);
                queue.push_back(n);
            }
        }
    }
    None
}

fn pathfinding() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut reachable, mut unreachable) = (0, 0);
    for m in 0..200 {
        let mut map = CollisionMap::open(20, 20);
        let density = rng.gen_range(0.1..0.45);
        for r in 0..20 {
            for c in 0..20 {
                map.set_blocked((r, c), rng.gen_bool(density));
            }
        }
        let mut open: Vec<Tile> = (0..20).flat_map(|r| (0..20).map(move |c| (r, c))).filter(|t| !map.is_blocked(*t)).collect();
        if open.len() < 2 {
            continue;
        }
        for _ in 0..10 {
            let a = open.swap_remove(rng.gen_range(0..open.len()));
            let b = open[rng.gen_range(0..open.len())];
            open.push(a);
            match (bfs(&map, a, b), path_find(&map, a, b)) {
                (Some(d), Ok(p)) => {
                    ensure(p.len() == d, format!("map {m}: {a:?}->{b:?} length {} vs bfs {d}", p.len()))?;
                    let mut cur = a;
                    for &s in &p {
                        ensure((s.0 - cur.0).abs() + (s.1 - cur.1).abs() == 1 && !map.is_blocked(s), format!("map {m}: bad step {cur:?}->{s:?}"))?;
                        cur = s;
                    }
                    ensure(cur == b, format!("map {m}: path ends at {cur:?}"))?;
                    reachable += 1;
                }
                (None, Err(PathError::Unreachable { .. })) => unreachable += 1,
                (d, p) => return Err(format!("map {m}: {a:?}->{b:?} bfs {d:?} vs {p:?}")),
            }
        }
    }
    ensure(unreachable > 0, "no unreachable pair was generated")?;
    Ok(format!("{reachable} routes match BFS, {unreachable} unreachable pairs error"))
}

fn report_numbers(log: &EventLog) -> Result<String, String> {
    let o = Overrides::default();
    let d = report::diffusion(log, &o).map_err(|e| e.to_string())?;
    let n = report::density(log, &o).map_err(|e| e.to_string())?;
    let c = report::coordination(log).map_err(|e| e.to_string())?;
    Ok(format!("{d:?}\n{n:?}\n{c:?}"))
}

fn determinism_replay() -> Outcome {
    let first = common::full_run();
    let t = Instant::now();
    let mut e = common::engine(common::SEED);
    e.run(TWO_DAYS);
    let second = e.to_log(Some(common::script())).to_ndjson();
    let secs = t.elapsed().as_secs_f64();
    ensure(first.ndjson == second, "two runs produced different logs")?;
    ensure(secs < 300.0, format!("full run took {secs:.1}s"))?;

    // replay from the serialized log with the script removed: only the
    // recorded exchanges can answer
    let mut log = EventLog::parse(&first.ndjson).map_err(|e| e.to_string())?;
    log.header.script = None;
    let r = replay(&log, None).map_err(|e| e.to_string())?;
    ensure(r.matched == log.events.len(), format!("replay matched {} of {}", r.matched, log.events.len()))?;
    ensure(r.engine.snapshot().to_json() == first.snapshot, "replayed world state differs")?;
    let stats = r.engine.gateway().stats();
    ensure(stats.script_misses == 0 && stats.failures == 0, format!("replay gateway stats {stats:?}"))?;
    let replayed_log = r.engine.to_log(None);
    ensure(report_numbers(&replayed_log)? == report_numbers(&first.log)?, "report numbers differ after replay")?;
    Ok(format!(
        "{} events byte-identical across runs; replay reproduces state and reports; run {secs:.1}s",
        log.events.len()
    ))
}

fn valentine() -> Outcome {
    // everything below is computed from the serialized log alone
    let log = EventLog::parse(&common::full_run().ndjson).map_err(|e| e.to_string())?;
    let o = Overrides::default();
    let reports = report::diffusion(&log, &o).map_err(|e| e.to_string())?;
    let get = |key: &str| reports.iter().find(|r| r.item == key).ok_or(format!("no {key} report"));
    let party = get("party")?;
    let candidacy = get("candidacy")?;
    for r in [party, candidacy] {
        ensure(r.agents == 25, format!("{} over {} agents", r.item, r.agents))?;
        ensure(r.hallucination_flags.values().all(|f| !f), format!("{} hallucinations: {:?}", r.item, r.hallucination_flags))?;
        ensure(r.holders_start.is_subset(&r.holders_end), format!("{} lost holders", r.item))?;
    }
    let counts = (party.holders_start.len(), party.holders_end.len(), candidacy.holders_start.len(), candidacy.holders_end.len());
    ensure(counts == (1, 13, 1, 8), format!("party {}->{}, candidacy {}->{}", counts.0, counts.1, counts.2, counts.3))?;
    let coord = report::coordination(&log).map_err(|e| e.to_string())?;
    let c = coord.first().ok_or("no coordination report")?;
    ensure(c.attended.len() == 5 && c.invited == 12, format!("coordination {} of {}", c.attended.len(), c.invited))?;
    Ok(format!(
        "party 1->13/25 ({:.0}%), candidacy 1->8/25 ({:.0}%), coordination 5 of 12, no hallucinations",
        party.end_fraction() * 100.0,
        candidacy.end_fraction() * 100.0
    ))
}

fn density() -> Outcome {
    ensure((network_density(25, 300) - 1.0).abs() < 1e-12, "complete graph is not 1.0")?;
    let oracle = BigRational::new(BigInt::from(2 * 50), BigInt::from(25 * 24));
    ensure((network_density(25, 50) - to_f64(&oracle)).abs() < 1e-12, "25 vertices / 50 edges")?;
    ensure(network_density(25, 0) == 0.0 && network_density(1, 0) == 0.0, "degenerate graphs")?;
    let r = report::density(&common::full_run().log, &Overrides::default()).map_err(|e| e.to_string())?;
    let start = format!("{:.3}", r.start.density);
    let end = format!("{:.2}", r.end.density);
    ensure(r.vertices == 25 && start == "0.167" && end == "0.74", format!("density {start} -> {end}"))?;
    let table = report::density_table(&r);
    ensure(table.contains("0.167") && table.contains("0.74"), format!("table lacks the values:\n{table}"))?;
    Ok(format!("spot checks hold; bundled run {start} -> {end} ({} -> {} mutual pairs)", r.start.edges, r.end.edges))
}

/// Replays the bundled run, then interviews every agent under every
/// condition with the scripted gateway.
fn battery_log() -> Result<(EventLog, usize, usize), String> {
    let log = &common::full_run().log;
    let mut e = replay(log, None).map_err(|e| e.to_string())?.engine;
    e.set_gateway(Gateway::scripted(common::script()));
    let names: Vec<String> = e.world.agents.iter().map(|a| a.identity.name.clone()).collect();
    let before = serde_json::to_string(&e.snapshot().agents).unwrap();
    let (mut answered, mut failed) = (0, 0);
    for name in &names {
        for c in Condition::ALL {
            let answers = e.interview_battery(name, &battery(), c).ok_or(format!("unknown agent {name}"))?;
            answered += answers.iter().filter(|a| !a.failed && !a.answer.is_empty()).count();
            failed += answers.iter().filter(|a| a.failed).count();
        }
    }
    let after = serde_json::to_string(&e.snapshot().agents).unwrap();
    ensure(before == after, "interviews changed agent state")?;
    Ok((e.to_log(None), answered, failed))
}

fn ablation_filters(log: &EventLog) -> Outcome {
    let scan = report::ablation_scan(log);
    for c in Condition::ALL {
        ensure(scan.checked.get(&c).copied().unwrap_or(0) > 0, format!("no {c} prompts in the log"))?;
    }
    ensure(scan.violations.is_empty(), format!("{} violations, first {:?}", scan.violations.len(), scan.violations.first()))?;
    let counts: Vec<String> = scan.checked.iter().map(|(c, n)| format!("{c} {n}")).collect();
    Ok(format!("prompts checked: {}; no excluded kind used", counts.join(", ")))
}

fn interview_battery(answered: usize, failed: usize) -> Outcome {
    let expected = 25 * 25 * Condition::ALL.len();
    ensure(failed == 0 && answered == expected, format!("{answered} of {expected} answered, {failed} failed"))?;
    Ok(format!("25 agents x 25 questions x 4 conditions = {answered} answers"))
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("retrieval oracle", retrieval_oracle()),
        ("recency values", recency_values()),
        ("importance parsing", importance_parsing()),
        ("reflection trigger", reflection_trigger()),
        ("reflection tree", reflection_tree()),
        ("plan tiling", plan_tiling()),
        ("pathfinding", pathfinding()),
        ("determinism/replay", determinism_replay()),
        ("valentine scenario", valentine()),
        ("network density", density()),
    ];
    match battery_log() {
        Ok((log, answered, failed)) => {
            results.push(("ablation filters", ablation_filters(&log)));
            results.push(("interview battery", interview_battery(answered, failed)));
        }
        Err(e) => {
            results.push(("ablation filters", Err(e.clone())));
            results.push(("interview battery", Err(e)));
        }
    }
    let mut failures = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failures += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", results.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
