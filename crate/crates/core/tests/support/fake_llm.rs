//! A local chat-completions server with canned critic answers for the
//! "press the start button" task.

use regot_core::critics::{BackendConfig, RemoteConfig, RetryPolicy};
use regot_core::evolution::CriticsConfig;
use serde_json::{json, Value};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

/// Four sub-goal stages after the initial one, plus a failure outcome at
/// stage 3 where the gripper slips off the button.
pub const START_BUTTON_GRAPH: &str = r#"{
  "schema_version": 1,
  "task": "press_start_button",
  "n_stages": 5,
  "nodes": [
    {"id": "idle", "stage": 0, "robot_status": "gripper parked beside the panel", "object_status": "start button released", "environment_status": "machine off"},
    {"id": "aligned", "stage": 1, "robot_status": "gripper level with the panel", "object_status": "start button released", "environment_status": "machine off"},
    {"id": "above_button", "stage": 2, "robot_status": "gripper tip above the start button", "object_status": "start button released", "environment_status": "machine off"},
    {"id": "pressing", "stage": 3, "robot_status": "gripper tip on the button", "object_status": "start button pushed in", "environment_status": "machine off"},
    {"id": "slipped", "stage": 3, "robot_status": "gripper tip slid onto the panel face", "object_status": "start button released", "environment_status": "machine off"},
    {"id": "started", "stage": 4, "robot_status": "gripper holding the button down", "object_status": "start button latched", "environment_status": "machine running"}
  ],
  "edges": [
    {"id": "align", "src": "idle", "dst": "aligned", "behavior": "raise the gripper to the height of the control panel"},
    {"id": "hover", "src": "aligned", "dst": "above_button", "behavior": "move the gripper tip over the start button"},
    {"id": "press", "src": "above_button", "dst": "pressing", "behavior": "push the tip straight down onto the button"},
    {"id": "slip", "src": "above_button", "dst": "slipped", "behavior": "push while off-center so the tip slides off"},
    {"id": "hold", "src": "pressing", "dst": "started", "behavior": "hold the button until the machine starts"}
  ]
}"#;

/// First answer of the graph builder: the same graph with a shortcut edge
/// that skips a stage, which the validator must bounce.
pub fn skipping_graph() -> String {
    START_BUTTON_GRAPH.replace(
        r#"{"id": "hold","#,
        r#"{"id": "shortcut", "src": "aligned", "dst": "pressing", "behavior": "jab at the panel"},
    {"id": "hold","#,
    )
}

pub fn feedback(call: usize) -> String {
    json!({
        "video_description": format!("batch {call}: the gripper drifts toward the panel and slows down before the button"),
        "potential_problems": [
            {"text": "the tip stops a few centimeters short of the button", "tag": "no-progress"}
        ],
        "possible_improvements": ["reward closing the remaining distance more strongly"]
    })
    .to_string()
}

/// The refiner's `call`-th answer (1 is the initial program).
pub fn program(call: usize) -> String {
    let w = 0.5 * f64::powi(2.0, call as i32 - 1);
    let mut text = format!("component reach weight {w} := 0 - distance(ee_position(), object_position(\"target\"))\n");
    if call >= 3 {
        text.push_str("component press weight 1 := distance(ee_position(), object_position(\"target\")) < 0.05\n");
    }
    format!("```\n{text}```")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Who {
    Graph,
    Evaluator,
    Refiner,
}

fn who(body: &Value) -> Who {
    let system = body.pointer("/messages/0/content").and_then(Value::as_str).unwrap_or("");
    if system.starts_with("You are a robotics task planner") {
        Who::Graph
    } else if system.starts_with("You evaluate") {
        Who::Evaluator
    } else {
        Who::Refiner
    }
}

pub struct FakeLlm {
    pub url: String,
    hits: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    addr: std::net::SocketAddr,
    handle: Option<JoinHandle<()>>,
}

impl FakeLlm {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let (h, s) = (hits.clone(), stop.clone());
        let handle = std::thread::spawn(move || {
            let mut counts = [0usize; 3];
            for stream in listener.incoming() {
                if s.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                h.fetch_add(1, Ordering::SeqCst);
                serve(stream, &mut counts);
            }
        });
        Self { url: format!("http://{addr}/v1/chat/completions"), hits, stop, addr, handle: Some(handle) }
    }

    /// Connections accepted so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for FakeLlm {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, counts: &mut [usize; 3]) {
    let mut reader = BufReader::new(stream.try_clone().expect("clone stream"));
    let mut len = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            len = v.trim().parse().unwrap_or(0);
        }
        if line == "\r\n" {
            break;
        }
    }
    let mut buf = vec![0; len];
    if reader.read_exact(&mut buf).is_err() {
        return;
    }
    let body: Value = serde_json::from_slice(&buf).unwrap_or(Value::Null);
    let role = who(&body);
    let slot = role as usize;
    counts[slot] += 1;
    let n = counts[slot];
    let content = match role {
        Who::Graph if n == 1 => skipping_graph(),
        Who::Graph => START_BUTTON_GRAPH.to_string(),
        Who::Evaluator => feedback(n),
        Who::Refiner => program(n),
    };
    let reply = json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}).to_string();
    let mut s = stream;
    let _ = write!(
        s,
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
        reply.len()
    );
}

const ROLES: [&str; 3] = ["graph_builder", "evaluator", "refiner"];

fn critics(make: impl Fn(&str) -> BackendConfig) -> CriticsConfig {
    CriticsConfig { graph_builder: make(ROLES[0]), evaluator: make(ROLES[1]), refiner: make(ROLES[2]) }
}

/// Remote critics at `url`, each recording to `<sessions>/<role>.json`.
pub fn recording_critics(url: &str, sessions: &Path) -> CriticsConfig {
    critics(|role| BackendConfig::Remote {
        remote: RemoteConfig {
            api_key_env: "REGOT_TEST_UNSET_KEY".into(),
            retry: RetryPolicy { max_retries: 1, initial_backoff_ms: 1, max_backoff_ms: 1 },
            ..RemoteConfig::new(url, "fake-critic")
        },
        record: Some(sessions.join(format!("{role}.json"))),
    })
}

/// Replay critics reading `<sessions>/<role>.json`.
pub fn replay_critics(sessions: &Path) -> CriticsConfig {
    critics(|role| BackendConfig::Replay { session: sessions.join(format!("{role}.json")) })
}
