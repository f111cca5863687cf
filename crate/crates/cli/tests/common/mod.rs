//! Shared helpers for the command-line integration suites: fixture paths,
//! a runner for the built binary, and a stub chat-completions endpoint.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

pub const LABELS: [&str; 15] = [
    "Kidney Stone",
    "Kidney Atrophy",
    "Kidney Lesion",
    "Kidney Cyst",
    "Normal Kidney",
    "Gallstones",
    "Liver Lesion",
    "Biliary Dilatation",
    "Fatty Liver",
    "Normal Liver",
    "Lung Atelectasis",
    "Lung Nodules",
    "Lung Emphysema",
    "Lung Pleural Effusion",
    "Normal Lung",
];

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn radlabel(args: &[&str]) -> Output {
    radlabel_env(args, &[])
}

pub fn radlabel_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_radlabel"));
    cmd.args(args)
        .env_remove("RL_LLM_BASE_URL")
        .env_remove("RL_LLM_API_KEY");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Runs the binary and returns an error naming the command on a non-zero exit.
pub fn radlabel_ok(args: &[&str]) -> Result<String, String> {
    let out = radlabel(args);
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "radlabel {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            stderr(&out)
        ))
    }
}

/// Truth rows of a label CSV: report id to 0/1 per label, in header order.
pub fn read_truth(path: &Path) -> BTreeMap<String, BTreeMap<String, bool>> {
    let mut rdr = csv::Reader::from_path(path).expect("truth csv");
    let header = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            let row = header
                .iter()
                .zip(r.iter())
                .skip(1)
                .map(|(h, v)| (h.to_string(), v == "1"))
                .collect();
            (r[0].to_string(), row)
        })
        .collect()
}

pub enum StubReply {
    Content(String),
    Status(u16),
}

pub type Handler = dyn Fn(&str, &str, &str) -> StubReply + Send + Sync;

struct StubState {
    handler: Box<Handler>,
    requests: Mutex<Vec<Value>>,
}

/// An OpenAI-style `/chat/completions` endpoint on a background thread.
/// The handler sees (model, system message, user message).
pub struct StubLlm {
    pub base_url: String,
    state: Arc<StubState>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

async fn complete(State(state): State<Arc<StubState>>, Json(body): Json<Value>) -> Response {
    let role = |r: &str| {
        body["messages"]
            .as_array()
            .and_then(|m| m.iter().find(|m| m["role"] == r))
            .and_then(|m| m["content"].as_str())
            .unwrap_or_default()
            .to_string()
    };
    let (system, user) = (role("system"), role("user"));
    let model = body["model"].as_str().unwrap_or_default().to_string();
    state.requests.lock().unwrap().push(body);
    match (state.handler)(&model, &system, &user) {
        StubReply::Content(text) => {
            Json(json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]})).into_response()
        }
        StubReply::Status(code) => StatusCode::from_u16(code).unwrap().into_response(),
    }
}

impl StubLlm {
    pub fn spawn(handler: impl Fn(&str, &str, &str) -> StubReply + Send + Sync + 'static) -> Self {
        let state = Arc::new(StubState {
            handler: Box::new(handler),
            requests: Mutex::new(Vec::new()),
        });
        let app = Router::new()
            .route("/v1/chat/completions", post(complete))
            .with_state(state.clone());
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
                    .unwrap();
            });
        });
        let addr = addr_rx.recv().expect("stub bound");
        Self {
            base_url: format!("http://{addr}/v1"),
            state,
            shutdown: Some(tx),
            thread: Some(thread),
        }
    }

    pub fn requests(&self) -> Vec<Value> {
        self.state.requests.lock().unwrap().clone()
    }
}

impl Drop for StubLlm {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// The report id from a `Subject ID: <id>` user message.
pub fn subject_id(user: &str) -> &str {
    user.lines()
        .next()
        .and_then(|l| l.strip_prefix("Subject ID: "))
        .unwrap_or_default()
        .trim()
}

/// A reply in the requested answer shape.
pub fn answer(id: &str, decisions: &BTreeMap<String, bool>, python_style: bool) -> String {
    if python_style {
        let body: Vec<String> = LABELS
            .iter()
            .map(|l| format!("'{l}': {}", if decisions[*l] { "True" } else { "False" }))
            .collect();
        format!(
            "Here is the classification:\n{{'ID': '{id}', 'Decisions': {{{}}}}}",
            body.join(", ")
        )
    } else {
        let d: serde_json::Map<String, Value> = LABELS
            .iter()
            .map(|l| (l.to_string(), Value::Bool(decisions[*l])))
            .collect();
        json!({"ID": id, "Decisions": d}).to_string()
    }
}

/// Cheap deterministic hash for reproducible stub noise.
pub fn mix(text: &str, salt: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ salt;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A stub labeler for the shipped corpus: the truth with a few label flips
/// per model, every fifth answer in the Python-dict shape.
pub fn noisy_truth_stub(truth: BTreeMap<String, BTreeMap<String, bool>>) -> StubLlm {
    StubLlm::spawn(move |model, _system, user| {
        let id = subject_id(user);
        let Some(row) = truth.get(id) else {
            return StubReply::Status(400);
        };
        let salt = mix(model, 7);
        let mut decisions = row.clone();
        for (label, v) in decisions.iter_mut() {
            if mix(&format!("{id}/{label}"), salt).is_multiple_of(25) {
                *v = !*v;
            }
        }
        StubReply::Content(answer(id, &decisions, mix(id, salt).is_multiple_of(5)))
    })
}
