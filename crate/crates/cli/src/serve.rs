//! `serve`: the engine behind a WebSocket speaking the line protocol.
//!
//! Every text frame carries one JSON message. Connecting clients get a
//! `state_snapshot`, then every tick's acks, events and `state_delta`.
//! Commands are acked `queued` right away and applied at the next tick.

use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use log::{info, warn};
use tokio::sync::broadcast;

use agentsim::config::GatewayMode;
use agentsim::engine::{Engine, EngineOptions};
use agentsim::protocol::Session;

use crate::settings::{self, ConfigArgs};

#[derive(Debug, clap::Args)]
pub struct ServeArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "scripted")]
    gateway: GatewayMode,
    /// Model script for the scripted gateway [default: script.json next to the scenario]
    #[arg(long)]
    script: Option<PathBuf>,
    /// Real milliseconds per game minute
    #[arg(long, default_value_t = 1000)]
    pace_ms: u64,
    /// Stop ticking after this many ticks
    #[arg(long)]
    ticks: Option<u64>,
    /// Write the event log here on shutdown
    #[arg(long)]
    record: Option<PathBuf>,
    /// Directory of static UI files served at /
    #[arg(long)]
    assets: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Clone)]
struct Shared {
    session: Arc<Mutex<Session>>,
    lines: broadcast::Sender<String>,
    assets: Option<Arc<PathBuf>>,
}

pub fn serve(args: ServeArgs) -> Result<()> {
    let effective = args.config.resolve()?;
    let scenario = crate::load_scenario(&args.scenario)?;
    let script = crate::load_script(args.gateway, args.script.as_deref(), &args.scenario)?;
    let gateway = settings::gateway(args.gateway, script.as_ref(), &effective.live)?;
    let options = EngineOptions {
        measure: false,
        keep_prompts: false,
    };
    let engine = Engine::new(scenario, effective.engine, gateway, args.seed, options)?;
    let shared = Shared {
        session: Arc::new(Mutex::new(Session::new(engine))),
        lines: broadcast::channel(4096).0,
        assets: args.assets.map(Arc::new),
    };
    let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse().context("bad --host/--port")?;

    let stop = Arc::new(AtomicBool::new(false));
    let ticker = {
        let (shared, stop) = (shared.clone(), stop.clone());
        let pace = Duration::from_millis(args.pace_ms);
        let limit = args.ticks;
        std::thread::spawn(move || tick_loop(shared, pace, limit, stop))
    };

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        println!("listening on ws://{}/ws", listener.local_addr()?);
        let app = Router::new().route("/ws", get(upgrade)).fallback(get(asset)).with_state(shared.clone());
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .context("server failed")
    })?;

    stop.store(true, Ordering::Relaxed);
    let _ = ticker.join();
    if let Some(path) = &args.record {
        let session = shared.session.lock().expect("session lock");
        session.engine.to_log(script).save(path).with_context(|| format!("writing log {}", path.display()))?;
        println!("log written to {}", path.display());
    }
    Ok(())
}

fn tick_loop(shared: Shared, pace: Duration, limit: Option<u64>, stop: Arc<AtomicBool>) {
    let mut done = 0u64;
    while !stop.load(Ordering::Relaxed) && limit.is_none_or(|l| done < l) {
        let t = Instant::now();
        let out = shared.session.lock().expect("session lock").tick();
        for m in out {
            // no subscribers is fine
            let _ = shared.lines.send(m.to_line());
        }
        done += 1;
        if done.is_multiple_of(60) {
            info!("tick {done}");
        }
        std::thread::sleep(pace.saturating_sub(t.elapsed()));
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Shared>) -> Response {
    ws.on_upgrade(move |socket| client(socket, shared))
}

async fn client(socket: WebSocket, shared: Shared) {
    let (mut tx, mut rx) = socket.split();
    let (mut lines, first) = {
        let s = shared.session.lock().expect("session lock");
        (shared.lines.subscribe(), s.snapshot().to_line())
    };
    if tx.send(Message::Text(first.into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            line = lines.recv() => match line {
                Ok(line) => {
                    if tx.send(Message::Text(line.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    warn!("client lagged {n} messages; resending snapshot");
                    let snap = shared.session.lock().expect("session lock").snapshot().to_line();
                    if tx.send(Message::Text(snap.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            msg = rx.next() => match msg {
                Some(Ok(Message::Text(text))) => {
                    for line in text.lines().filter(|l| !l.trim().is_empty()) {
                        let reply = shared.session.lock().expect("session lock").receive(line).to_line();
                        if tx.send(Message::Text(reply.into())).await.is_err() {
                            return;
                        }
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn asset(State(shared): State<Shared>, uri: Uri) -> Response {
    let Some(root) = shared.assets else {
        return (StatusCode::OK, "agentsim server; connect a client to /ws\n").into_response();
    };
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    if Path::new(rel).components().any(|c| !matches!(c, Component::Normal(_))) {
        return StatusCode::BAD_REQUEST.into_response();
    }
    match tokio::fs::read(root.join(rel)).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(rel))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

fn content_type(path: &str) -> &'static str {
    match path.rsplit('.').next() {
        Some("html") => "text/html; charset=utf-8",
        Some("js") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("png") => "image/png",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}
