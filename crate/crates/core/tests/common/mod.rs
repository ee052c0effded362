#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use agentsim::engine::{Engine, EngineOptions, EventLog};
use agentsim::gateway::{Gateway, Script};
use agentsim::{EngineConfig, Scenario};

pub const SEED: u64 = 42;
/// Two game days at one minute per tick.
pub const TWO_DAYS: u64 = 2880;

pub fn valentine_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/valentine")
}

pub fn scenario() -> Scenario {
    Scenario::load(&valentine_dir().join("scenario.json")).expect("bundled scenario loads")
}

pub fn script() -> Script {
    Script::load(&valentine_dir().join("script.json")).expect("bundled script loads")
}

pub fn engine(seed: u64) -> Engine {
    let options = EngineOptions {
        measure: true,
        keep_prompts: false,
    };
    Engine::new(scenario(), EngineConfig::default(), Gateway::scripted(script()), seed, options).expect("engine builds")
}

/// One full two-day run of the bundled scenario, shared within a test binary.
pub struct FullRun {
    pub log: EventLog,
    pub ndjson: String,
    pub snapshot: String,
    pub seconds: f64,
}

pub fn full_run() -> &'static FullRun {
    static RUN: OnceLock<FullRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let t = std::time::Instant::now();
        let mut e = engine(SEED);
        e.run(TWO_DAYS);
        let seconds = t.elapsed().as_secs_f64();
        let log = e.to_log(Some(script()));
        FullRun {
            ndjson: log.to_ndjson(),
            snapshot: e.snapshot().to_json(),
            log,
            seconds,
        }
    })
}

pub mod oracle {
    use agentsim::clock::GameTime;
    use agentsim::memory::{MemoryKind, MemoryStream};
    use rand::Rng;

    /// Brute-force retrieval: score every candidate from scratch, sort, then
    /// fill the word budget greedily.
    pub fn retrieve(stream: &MemoryStream<f64>, query: &[f64], now: GameTime, budget: usize, kinds: Option<&[MemoryKind]>) -> Vec<u64> {
        let cands: Vec<_> = stream
            .memories()
            .iter()
            .filter(|m| kinds.is_none_or(|k| k.contains(&m.kind)))
            .collect();
        if cands.is_empty() {
            return Vec::new();
        }
        let raw: Vec<[f64; 3]> = cands
            .iter()
            .map(|m| {
                let hours = ((now.0 - m.last_accessed.0) as f64 / 60.0).max(0.0);
                let dot: f64 = query.iter().zip(&m.embedding).map(|(a, b)| a * b).sum();
                [0.995f64.powf(hours), f64::from(m.importance), dot]
            })
            .collect();
        let mut scaled = vec![[0.0; 3]; raw.len()];
        for k in 0..3 {
            let lo = raw.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min);
            let hi = raw.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max);
            for (i, r) in raw.iter().enumerate() {
                scaled[i][k] = if hi > lo { (r[k] - lo) / (hi - lo) } else { 0.5 };
            }
        }
        let mut order: Vec<(f64, u64, usize)> = cands
            .iter()
            .enumerate()
            .map(|(i, m)| (scaled[i][0] + scaled[i][1] + scaled[i][2], m.id, m.description.split_whitespace().count()))
            .collect();
        order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(b.1.cmp(&a.1)));
        // budget in tenths of a token: words × 13
        let mut left = budget * 10;
        let mut out = Vec::new();
        for (_, id, words) in order {
            if words * 13 <= left {
                left -= words * 13;
                out.push(id);
            }
        }
        out
    }

    pub fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-3 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }

    pub const KINDS: [MemoryKind; 3] = [MemoryKind::Observation, MemoryKind::Reflection, MemoryKind::Plan];

    /// A random stream of up to `max` memories with random importances,
    /// timestamps, word counts and unit embeddings.
    pub fn random_stream(rng: &mut impl Rng, max: usize, dim: usize) -> MemoryStream<f64> {
        let mut s = MemoryStream::new(0);
        let n = rng.gen_range(0..=max);
        let mut t = 0i64;
        for i in 0..n {
            t += rng.gen_range(0..240);
            let words = rng.gen_range(1..12);
            let text = (0..words).map(|w| format!("w{i}x{w}")).collect::<Vec<_>>().join(" ");
            let kind = KINDS[rng.gen_range(0..3)];
            s.append(kind, text, GameTime(t), rng.gen_range(1..=10), unit_vector(rng, dim), Vec::new())
                .expect("valid memory");
        }
        s
    }
}

pub mod day {
    use agentsim::clock::GameTime;
    use agentsim::gateway::{Gateway, Script, ScriptEntry, TemplateId};
    use agentsim::memory::{record, MemoryKind, MemoryStream, RetrievalConfig};
    use agentsim::reflection::{reflection_due, run_reflection, DEFAULT_THRESHOLD};

    const WEIGHTS: [(&str, u8); 5] = [("routine", 2), ("notable", 8), ("ordinary", 5), ("minor", 3), ("striking", 7)];

    pub fn script() -> Script {
        let mut entries: Vec<ScriptEntry> = WEIGHTS
            .iter()
            .map(|(w, v)| ScriptEntry::new(TemplateId::Importance, v.to_string()).when_contains("memory", *w))
            .collect();
        entries.push(ScriptEntry::new(TemplateId::Importance, "4"));
        entries.push(ScriptEntry::new(
            TemplateId::ReflectionQuestions,
            "1. What is Klaus focused on?\n2. Who does Klaus spend time with?\n3. What does Klaus care about?",
        ));
        entries.push(ScriptEntry::new(
            TemplateId::ReflectionInsights,
            "1. Klaus is dedicated to his research (because of 1, 3)\n2. Klaus enjoys the cafe (because of 2)",
        ));
        Script::new(entries)
    }

    /// The importance sequence of the synthetic day: 80 observations, 400 total.
    pub fn importances() -> Vec<u8> {
        (0..80).map(|i| WEIGHTS[i % WEIGHTS.len()].1).collect()
    }

    pub struct Day {
        pub stream: MemoryStream<f64>,
        pub reflections: usize,
        /// Accumulator values at which a cycle fired.
        pub fired_at: Vec<u32>,
    }

    /// Records the day observation by observation, reflecting whenever the
    /// accumulator passes the threshold.
    pub fn run() -> Day {
        let mut g = Gateway::scripted(script());
        let mut stream = MemoryStream::<f64>::new(0);
        let config = RetrievalConfig::default();
        let mut fired_at = Vec::new();
        for i in 0..80 {
            let (word, _) = WEIGHTS[i % WEIGHTS.len()];
            let now = GameTime(420 + 12 * i as i64);
            let text = format!("Klaus saw a {word} thing number {i} at the library");
            record(&mut stream, &mut g, MemoryKind::Observation, &text, now, Vec::new()).unwrap();
            if reflection_due(stream.importance_accumulator, DEFAULT_THRESHOLD) {
                fired_at.push(stream.importance_accumulator);
                run_reflection(&mut stream, &mut g, &config, "Klaus Mueller", now, 1200);
            }
        }
        Day {
            reflections: fired_at.len(),
            stream,
            fired_at,
        }
    }
}
