//! A local chat-completions server for dry runs and tests.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::oneshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockConfig {
    /// Assistant text returned on success.
    pub reply: String,
    /// Requests with a temperature strictly below this are refused with a
    /// 400 naming the parameter.
    pub min_temperature: Option<f64>,
    /// The first N requests fail with a 503.
    pub fail_first: u32,
    /// Answer with a 200 whose body is not a chat completion.
    pub malformed: bool,
    pub delay_ms: u64,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            reply: "OK".into(),
            min_temperature: None,
            fail_first: 0,
            malformed: false,
            delay_ms: 0,
        }
    }
}

#[derive(Default)]
struct Counters {
    requests: Mutex<Vec<Value>>,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    failures_served: AtomicU32,
}

#[derive(Clone)]
struct AppState {
    config: Arc<MockConfig>,
    counters: Arc<Counters>,
}

struct InFlight<'a>(&'a Counters);

impl<'a> InFlight<'a> {
    fn enter(c: &'a Counters) -> Self {
        let now = c.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        c.max_in_flight.fetch_max(now, Ordering::SeqCst);
        Self(c)
    }
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

async fn chat(State(state): State<AppState>, body: Bytes) -> Response {
    let counters = &state.counters;
    let _guard = InFlight::enter(counters);
    let parsed: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => {
            return (StatusCode::BAD_REQUEST, Json(json!({"error": {"message": e.to_string()}}))).into_response();
        }
    };
    counters.requests.lock().expect("poisoned").push(parsed.clone());
    if state.config.delay_ms > 0 {
        tokio::time::sleep(Duration::from_millis(state.config.delay_ms)).await;
    }

    if counters.failures_served.fetch_add(1, Ordering::SeqCst) < state.config.fail_first {
        return (StatusCode::SERVICE_UNAVAILABLE, "mock: temporarily unavailable").into_response();
    }
    if let Some(min) = state.config.min_temperature {
        let t = parsed.get("temperature").and_then(Value::as_f64).unwrap_or(0.0);
        if t < min {
            let msg = format!("temperature {t} is not supported; must be >= {min}");
            return (StatusCode::BAD_REQUEST, Json(json!({"error": {"message": msg, "param": "temperature"}})))
                .into_response();
        }
    }
    if state.config.malformed {
        return (StatusCode::OK, "<html>not a completion</html>").into_response();
    }
    let model = parsed.get("model").cloned().unwrap_or(Value::Null);
    Json(json!({
        "id": "chatcmpl-mock",
        "object": "chat.completion",
        "model": model,
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": state.config.reply},
            "finish_reason": "stop"
        }]
    }))
    .into_response()
}

pub fn router(config: MockConfig) -> (Router, MockHandle) {
    let counters = Arc::new(Counters::default());
    let state = AppState { config: Arc::new(config), counters: counters.clone() };
    let app = Router::new()
        .route("/chat/completions", post(chat))
        .route("/v1/chat/completions", post(chat))
        .layer(DefaultBodyLimit::disable())
        .with_state(state);
    (app, MockHandle { counters })
}

/// Read access to what the mock has seen.
#[derive(Clone)]
pub struct MockHandle {
    counters: Arc<Counters>,
}

impl MockHandle {
    pub fn requests(&self) -> Vec<Value> {
        self.counters.requests.lock().expect("poisoned").clone()
    }

    pub fn request_count(&self) -> usize {
        self.counters.requests.lock().expect("poisoned").len()
    }

    pub fn max_in_flight(&self) -> usize {
        self.counters.max_in_flight.load(Ordering::SeqCst)
    }
}

/// A mock server on its own thread and runtime; stops when dropped.
pub struct MockServer {
    addr: SocketAddr,
    handle: MockHandle,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds `127.0.0.1:port` (0 picks a free port).
    pub fn start(config: MockConfig, port: u16) -> std::io::Result<Self> {
        let (app, handle) = router(config);
        let std_listener = std::net::TcpListener::bind(("127.0.0.1", port))?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()?;
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener");
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
                    .ok();
            });
        });
        Ok(Self {
            addr,
            handle,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn handle(&self) -> &MockHandle {
        &self.handle
    }

    /// Blocks until the server stops (it never does unless dropped
    /// elsewhere); used by the CLI's foreground mode.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
