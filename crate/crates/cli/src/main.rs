mod serve;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use agentsim::config::GatewayMode;
use agentsim::engine::{replay, Engine, EngineOptions, EventLog};
use agentsim::eval::{battery, Condition, InterviewQuestion, Overrides};
use agentsim::gateway::Script;
use agentsim::{report, Scenario};

use settings::{ConfigArgs, FileConfig};

#[derive(Debug, Parser)]
#[command(name = "agentsim", version, about = "Generative-agent town simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and optionally record the event log
    Run(RunArgs),
    /// Re-simulate a recorded log and check it reproduces
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Stop after this tick
        #[arg(long)]
        until: Option<u64>,
    },
    /// Ask an agent from a recorded run a list of questions
    Interview(InterviewArgs),
    /// Measurement report from a recorded log
    Report {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum)]
        kind: ReportKind,
        /// JSON file of manual label corrections
        #[arg(long)]
        overrides: Option<PathBuf>,
    },
    /// Run a scenario live and accept UI connections
    Serve(serve::ServeArgs),
    /// Print the effective configuration after overrides
    Config(ConfigArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Game minutes to simulate
    #[arg(long, default_value_t = 2880)]
    ticks: u64,
    #[arg(long, default_value = "scripted")]
    gateway: GatewayMode,
    /// Model script for the scripted gateway [default: script.json next to the scenario]
    #[arg(long)]
    script: Option<PathBuf>,
    /// Write the event log here
    #[arg(long)]
    record: Option<PathBuf>,
    /// Real milliseconds per tick; 0 runs unpaced
    #[arg(long, default_value_t = 0)]
    pace_ms: u64,
    /// Skip the start/end measurement interviews
    #[arg(long)]
    no_measure: bool,
    /// Keep full prompt text on logged exchanges
    #[arg(long)]
    keep_prompts: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, clap::Args)]
struct InterviewArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    agent: String,
    /// JSON list of {category, text} [default: the built-in 25-question battery]
    #[arg(long)]
    questions: Option<PathBuf>,
    /// full, no_reflection, no_reflection_no_planning or ablated
    #[arg(long, default_value = "full")]
    condition: Condition,
    #[arg(long, default_value = "scripted")]
    gateway: GatewayMode,
    /// Model script [default: the one recorded in the log header]
    #[arg(long)]
    script: Option<PathBuf>,
    /// TOML file with a [live] table
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print answers as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportKind {
    Diffusion,
    Density,
    Coordination,
}

fn load_log(path: &Path) -> Result<EventLog> {
    EventLog::load(path).with_context(|| format!("loading log {}", path.display()))
}

pub(crate) fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))
}

pub(crate) fn load_script(mode: GatewayMode, explicit: Option<&Path>, scenario: &Path) -> Result<Option<Script>> {
    if mode == GatewayMode::Live {
        return Ok(None);
    }
    let path = explicit.map(Path::to_path_buf).unwrap_or_else(|| settings::sibling_script(scenario));
    let script = Script::load(&path).with_context(|| format!("loading script {}", path.display()))?;
    Ok(Some(script))
}

fn run(args: RunArgs) -> Result<()> {
    let effective = args.config.resolve()?;
    let scenario = load_scenario(&args.scenario)?;
    let script = load_script(args.gateway, args.script.as_deref(), &args.scenario)?;
    let gateway = settings::gateway(args.gateway, script.as_ref(), &effective.live)?;
    let options = EngineOptions {
        measure: !args.no_measure,
        keep_prompts: args.keep_prompts,
    };
    let mut engine = Engine::new(scenario, effective.engine, gateway, args.seed, options)?;
    let started = Instant::now();
    if args.pace_ms == 0 {
        engine.run(args.ticks);
    } else {
        engine.start();
        for _ in 0..args.ticks {
            let t = Instant::now();
            engine.step();
            if engine.world.tick % 60 == 0 {
                info!("tick {}", engine.world.tick);
            }
            std::thread::sleep(Duration::from_millis(args.pace_ms).saturating_sub(t.elapsed()));
        }
        engine.finish();
    }
    let stats = engine.gateway().stats();
    println!(
        "ran {} ticks in {:.2}s: {} events, {} completions, {} embeddings, {} failures, {} script misses",
        engine.world.tick,
        started.elapsed().as_secs_f64(),
        engine.events().len(),
        stats.completions,
        stats.embeddings,
        stats.failures,
        stats.script_misses
    );
    if let Some(path) = &args.record {
        engine.to_log(script).save(path).with_context(|| format!("writing log {}", path.display()))?;
        println!("log written to {}", path.display());
    }
    Ok(())
}

fn replay_cmd(path: &Path, until: Option<u64>) -> Result<()> {
    let log = load_log(path)?;
    let out = replay(&log, until).with_context(|| format!("replaying {}", path.display()))?;
    println!(
        "replayed to tick {}: {} of {} recorded events reproduced, {} gateway calls made",
        out.engine.world.tick,
        out.matched,
        log.events.len(),
        out.engine.gateway().stats().completions + out.engine.gateway().stats().embeddings
    );
    Ok(())
}

fn load_questions(path: Option<&Path>) -> Result<Vec<InterviewQuestion>> {
    match path {
        None => Ok(battery()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing questions {}", p.display()))
        }
    }
}

fn interview(args: InterviewArgs) -> Result<()> {
    let log = load_log(&args.log)?;
    let questions = load_questions(args.questions.as_deref())?;
    let live = match &args.config {
        Some(p) => FileConfig::load(p)?.live,
        None => Default::default(),
    };
    let script = match (&args.script, &log.header.script) {
        (Some(p), _) => Some(Script::load(p).with_context(|| format!("loading script {}", p.display()))?),
        (None, recorded) => recorded.clone(),
    };
    if args.gateway == GatewayMode::Scripted && script.is_none() {
        bail!("the log carries no script; pass --script or --gateway live");
    }
    let mut engine = replay(&log, None).with_context(|| format!("replaying {}", args.log.display()))?.engine;
    engine.set_gateway(settings::gateway(args.gateway, script.as_ref(), &live)?);
    let Some(answers) = engine.interview_battery(&args.agent, &questions, args.condition) else {
        bail!("no agent named {:?} in this log", args.agent);
    };
    if args.json {
        let rows: Vec<_> = questions
            .iter()
            .zip(&answers)
            .map(|(q, a)| json!({"category": q.category, "question": a.question, "answer": a.answer, "failed": a.failed, "memory_ids": a.memory_ids}))
            .collect();
        println!("{}", serde_json::to_string_pretty(&json!({"agent": args.agent, "condition": args.condition, "answers": rows}))?);
    } else {
        println!("{} ({})", args.agent, args.condition.as_str());
        for a in &answers {
            println!("\nQ: {}\nA: {}{}", a.question, a.answer, if a.failed { "  [failed]" } else { "" });
        }
    }
    Ok(())
}

fn report_cmd(path: &Path, kind: ReportKind, overrides: Option<&Path>) -> Result<()> {
    let log = load_log(path)?;
    let overrides: Overrides = match overrides {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing overrides {}", p.display()))?
        }
        None => Overrides::default(),
    };
    let (doc, table) = match kind {
        ReportKind::Diffusion => {
            let r = report::diffusion(&log, &overrides)?;
            (serde_json::to_value(&r)?, report::diffusion_table(&r))
        }
        ReportKind::Density => {
            let r = report::density(&log, &overrides)?;
            (serde_json::to_value(&r)?, report::density_table(&r))
        }
        ReportKind::Coordination => {
            let r = report::coordination(&log)?;
            (serde_json::to_value(&r)?, report::coordination_table(&r))
        }
    };
    println!("{}", serde_json::to_string(&doc)?);
    print!("{table}");
    if !table.ends_with('\n') {
        println!();
    }
    Ok(())
}

fn print_config(args: ConfigArgs) -> Result<()> {
    let effective = args.resolve()?;
    let file = FileConfig {
        engine: effective.engine,
        live: effective.live,
    };
    print!("{}", toml::to_string(&file)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Replay { log, until } => replay_cmd(&log, until),
        Command::Interview(a) => interview(a),
        Command::Report { log, kind, overrides } => report_cmd(&log, kind, overrides.as_deref()),
        Command::Serve(a) => serve::serve(a),
        Command::Config(a) => print_config(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
