use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Error, Result};

/// One request matcher and its canned response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(default = "default_method")]
    pub method: String,
    pub path: String,
    /// Substrings the request body must all contain.
    #[serde(default)]
    pub body_contains: Vec<String>,
    /// How many requests the rule serves; unlimited when absent.
    #[serde(default)]
    pub times: Option<usize>,
    #[serde(default)]
    pub delay_ms: u64,
    #[serde(default = "default_status")]
    pub status: u16,
    /// A JSON value is sent compactly; a string is sent verbatim, which
    /// allows malformed bodies.
    pub response: Value,
}

fn default_method() -> String {
    "POST".into()
}

fn default_status() -> u16 {
    200
}

/// Ordered rules: a request is served by the first matching rule with uses
/// left. With `token` set, requests lacking `Authorization: Bearer <token>`
/// get 401.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default)]
    pub token: Option<String>,
    #[serde(default)]
    pub rules: Vec<MockRule>,
}

impl MockScript {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("mock script: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
    }
}

/// A request as the mock saw it.
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub method: String,
    pub path: String,
    pub body: String,
    /// Index of the serving rule, `None` for a 404 or 401.
    pub rule: Option<usize>,
}

struct State {
    script: MockScript,
    used: Vec<usize>,
    received: Vec<Received>,
}

impl State {
    /// Claims a use of the first matching rule.
    fn claim(&mut self, method: &str, path: &str, body: &str) -> Option<usize> {
        let i = self.script.rules.iter().enumerate().position(|(i, r)| {
            r.method.eq_ignore_ascii_case(method)
                && r.path == path
                && r.body_contains.iter().all(|s| body.contains(s.as_str()))
                && r.times.is_none_or(|n| self.used[i] < n)
        })?;
        self.used[i] += 1;
        Some(i)
    }
}

/// Running mock server; stops on drop.
pub struct MockServer {
    addr: SocketAddr,
    server: Arc<tiny_http::Server>,
    state: Arc<Mutex<State>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds 127.0.0.1:`port` (0 picks a free port) and serves in the
    /// background, one thread per request.
    pub fn start(script: MockScript, port: u16) -> Result<Self> {
        Self::bind(script, &format!("127.0.0.1:{port}"))
    }

    pub fn bind(script: MockScript, addr: &str) -> Result<Self> {
        let server = tiny_http::Server::http(addr).map_err(|e| Error::Transport(format!("cannot bind {addr}: {e}")))?;
        let addr = server.server_addr().to_ip().ok_or_else(|| Error::Transport("mock bound a non-IP address".into()))?;
        let server = Arc::new(server);
        let used = vec![0; script.rules.len()];
        let state = Arc::new(Mutex::new(State { script, used, received: Vec::new() }));
        let stop = Arc::new(AtomicBool::new(false));
        let thread = {
            let (server, state, stop) = (server.clone(), state.clone(), stop.clone());
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match server.recv() {
                        Ok(request) => {
                            let state = state.clone();
                            std::thread::spawn(move || serve(request, &state));
                        }
                        Err(_) => break,
                    }
                }
            })
        };
        Ok(Self { addr, server, state, stop, thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn received(&self) -> Vec<Received> {
        self.state.lock().expect("mock state").received.clone()
    }

    /// Blocks until the process is interrupted.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn json_header() -> tiny_http::Header {
    tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header")
}

fn serve(mut request: tiny_http::Request, state: &Mutex<State>) {
    let mut body = String::new();
    let _ = request.as_reader().read_to_string(&mut body);
    let method = request.method().as_str().to_string();
    let path = request.url().split('?').next().unwrap_or_default().to_string();
    let auth = request
        .headers()
        .iter()
        .find(|h| h.field.equiv("Authorization"))
        .map(|h| h.value.as_str().to_string());
    let (status, text, delay) = {
        let mut s = state.lock().expect("mock state");
        let authorized = s.script.token.as_ref().is_none_or(|t| auth.as_deref() == Some(format!("Bearer {t}").as_str()));
        let rule = if authorized { s.claim(&method, &path, &body) } else { None };
        s.received.push(Received { method: method.clone(), path: path.clone(), body: body.clone(), rule });
        match rule {
            Some(i) => {
                let r = &s.script.rules[i];
                let text = match &r.response {
                    Value::String(raw) => raw.clone(),
                    v => v.to_string(),
                };
                (r.status, text, r.delay_ms)
            }
            None if !authorized => (401, serde_json::json!({ "error": "unauthorized" }).to_string(), 0),
            None => {
                let echo = serde_json::json!({ "error": "no matching rule", "method": method, "path": path, "body": body });
                (404, echo.to_string(), 0)
            }
        }
    };
    if delay > 0 {
        std::thread::sleep(Duration::from_millis(delay));
    }
    let response = tiny_http::Response::from_string(text).with_status_code(status).with_header(json_header());
    let _ = request.respond(response);
}
