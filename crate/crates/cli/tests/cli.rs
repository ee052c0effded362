use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::OnceLock;

use serde_json::Value;

use agentsim::EngineConfig;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_agentsim"));
    c.env_remove("RUST_BACKTRACE").env_remove("RUST_LIB_BACKTRACE");
    c
}

fn valentine(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/valentine").join(file)
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// A short recorded run shared by the log-consuming tests.
fn recorded() -> &'static Path {
    static LOG: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    &LOG.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("run.ndjson");
        let out = bin()
            .args(["run", "--ticks", "240", "--seed", "7", "--scenario"])
            .arg(valentine("scenario.json"))
            .arg("--record")
            .arg(&log)
            .output()
            .unwrap();
        let text = ok(out);
        assert!(text.contains("ran 240 ticks") && text.contains("0 script misses"), "{text}");
        (dir, log)
    })
    .1
}

#[test]
fn help_lists_every_override_with_its_default() {
    let d = EngineConfig::default();
    let help = ok(bin().args(["run", "--help"]).output().unwrap());
    for (flag, default) in [
        ("--decay", d.decay.to_string()),
        ("--alpha-recency", d.alpha_recency.to_string()),
        ("--alpha-importance", d.alpha_importance.to_string()),
        ("--alpha-relevance", d.alpha_relevance.to_string()),
        ("--threshold", d.threshold.to_string()),
        ("--radius", d.radius.to_string()),
        ("--budget", d.budget.to_string()),
    ] {
        let line = help.lines().skip_while(|l| !l.contains(flag)).nth(1).unwrap_or_default();
        assert!(line.contains(&format!("[default: {default}]")), "{flag}: {line:?}");
    }
    assert!(help.contains("[default: 150]"));
}

#[test]
fn bad_overrides_are_reported_by_field() {
    let out = bin()
        .args(["run", "--decay", "1.5", "--radius=-1", "--ticks", "1", "--scenario"])
        .arg(valentine("scenario.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("decay: decay must be in (0,1]"), "{err}");
    assert!(err.contains("radius: radius must be in [0,64]"), "{err}");
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    std::fs::write(&file, "[engine]\ndecay = 0.99\nradius = 6\n[live]\nmodel = \"m\"\n").unwrap();
    let text = ok(bin().args(["config", "--radius", "3", "--config"]).arg(&file).output().unwrap());
    let parsed: toml::Table = text.parse().unwrap();
    let engine = parsed["engine"].as_table().unwrap();
    assert_eq!(engine["decay"].as_float(), Some(0.99));
    assert_eq!(engine["radius"].as_integer(), Some(3));
    assert_eq!(engine["threshold"].as_integer(), Some(150));
    assert_eq!(parsed["live"]["model"].as_str(), Some("m"));

    std::fs::write(&file, "[engine]\nthreshhold = 10\n").unwrap();
    let out = bin().arg("config").arg("--config").arg(&file).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("threshhold"));
}

#[test]
fn recorded_run_replays() {
    let text = ok(bin().arg("replay").arg("--log").arg(recorded()).output().unwrap());
    assert!(text.starts_with("replayed to tick 240"), "{text}");
    let text = ok(bin().args(["replay", "--until", "60", "--log"]).arg(recorded()).output().unwrap());
    assert!(text.starts_with("replayed to tick 60"), "{text}");
}

#[test]
fn truncated_log_fails_to_load() {
    let dir = tempfile::tempdir().unwrap();
    let cut = dir.path().join("cut.ndjson");
    let text = std::fs::read_to_string(recorded()).unwrap();
    std::fs::write(&cut, &text[..text.len() - 25]).unwrap();
    let out = bin().arg("replay").arg("--log").arg(&cut).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("log line"));
}

#[test]
fn reports_print_json_then_a_table() {
    for kind in ["diffusion", "density", "coordination"] {
        let text = ok(bin().args(["report", "--kind", kind, "--log"]).arg(recorded()).output().unwrap());
        let (first, rest) = text.split_once('\n').unwrap();
        let doc: Value = serde_json::from_str(first).unwrap();
        assert!(doc.is_array() || doc.is_object(), "{kind}");
        assert!(!rest.trim().is_empty(), "{kind} has no table");
    }
    let text = ok(bin().args(["report", "--kind", "density", "--log"]).arg(recorded()).output().unwrap());
    let doc: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(doc["vertices"], 25);
    assert_eq!(doc["start"]["edges"], 50);
}

#[test]
fn interview_answers_the_question_file() {
    let text = ok(bin()
        .args(["interview", "--agent", "Klaus Mueller", "--condition", "ablated", "--json", "--log"])
        .arg(recorded())
        .arg("--questions")
        .arg(valentine("questions.json"))
        .output()
        .unwrap());
    let doc: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["condition"], "fully_ablated");
    let answers = doc["answers"].as_array().unwrap();
    assert_eq!(answers.len(), 25);
    assert!(answers.iter().all(|a| !a["answer"].as_str().unwrap().is_empty()));
    assert!(answers.iter().all(|a| !a["question"].as_str().unwrap().contains("[name]")));

    let out = bin().args(["interview", "--agent", "Nobody", "--log"]).arg(recorded()).output().unwrap();
    assert!(!out.status.success());
}

struct Server(std::process::Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn read_json(ws: &mut tungstenite::WebSocket<tungstenite::stream::MaybeTlsStream<std::net::TcpStream>>) -> Value {
    loop {
        match ws.read().unwrap() {
            tungstenite::Message::Text(t) => return serde_json::from_str(&t).unwrap(),
            _ => continue,
        }
    }
}

#[test]
fn serve_speaks_the_line_protocol() {
    let mut child = bin()
        .args(["serve", "--port", "0", "--pace-ms", "20", "--scenario"])
        .arg(valentine("scenario.json"))
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut first).unwrap();
    let _server = Server(child);
    let url = first.trim().strip_prefix("listening on ").unwrap().to_string();
    let (mut ws, _) = tungstenite::connect(url.as_str()).unwrap();

    let snap = read_json(&mut ws);
    assert_eq!(snap["type"], "state_snapshot");
    assert_eq!(snap["state"]["agents"].as_array().unwrap().len(), 25);

    ws.send(tungstenite::Message::text("{\"type\":\"nonsense\"}")).unwrap();
    let cmd = r#"{"type":"command","id":3,"command":{"kind":"inner_voice","agent":"Klaus Mueller","text":"go to the library"}}"#;
    ws.send(tungstenite::Message::text(cmd)).unwrap();

    let (mut error, mut queued, mut applied, mut deltas) = (false, false, false, 0);
    for _ in 0..5000 {
        let m = read_json(&mut ws);
        match m["type"].as_str().unwrap() {
            "error" => error = true,
            "command_ack" if m["id"] == 3 && m["status"] == "queued" => queued = true,
            "command_ack" if m["id"] == 3 && m["status"] == "applied" => applied = true,
            "state_delta" => deltas += 1,
            _ => {}
        }
        if error && queued && applied && deltas >= 2 {
            break;
        }
    }
    assert!(error && queued && applied && deltas >= 2, "error {error} queued {queued} applied {applied} deltas {deltas}");
}
