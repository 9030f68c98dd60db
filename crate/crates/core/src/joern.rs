//! Query execution against a Joern server or an offline fixture backend.
//!
//! All outcomes are encoded in [`ExecutionResult`]; `execute` never panics and
//! never returns a transport `Err` — a dead server is just an unsuccessful
//! result. Raw outputs are normalized (REPL prefixes stripped, whitespace
//! collapsed) so generated and ground-truth queries can be compared across
//! formatting differences.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default per-query timeout. Single queries finish in seconds; multi-call
/// agent latencies are sums over many queries, not one slow one.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Which backend a client talks to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Live,
    Fixture,
}

/// Backend selection plus its mode-specific parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub mode: BackendMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_timeout_ms", rename = "timeout_ms")]
    pub timeout_millis: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture_path: Option<PathBuf>,
}

fn default_timeout_ms() -> u64 {
    DEFAULT_TIMEOUT.as_millis() as u64
}

impl BackendConfig {
    pub fn live(endpoint: impl Into<String>) -> Self {
        BackendConfig {
            mode: BackendMode::Live,
            endpoint: Some(endpoint.into()),
            timeout_millis: default_timeout_ms(),
            fixture_path: None,
        }
    }

    pub fn fixture(path: impl Into<PathBuf>) -> Self {
        BackendConfig {
            mode: BackendMode::Fixture,
            endpoint: None,
            timeout_millis: default_timeout_ms(),
            fixture_path: Some(path.into()),
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_millis)
    }

    pub fn validate(&self) -> Result<(), JoernError> {
        match self.mode {
            BackendMode::Live if self.endpoint.is_none() => Err(JoernError::BadConfig(
                "live mode requires an endpoint".into(),
            )),
            BackendMode::Fixture if self.fixture_path.is_none() => Err(JoernError::BadConfig(
                "fixture mode requires a fixture path".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Failure classes an execution can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecErrorKind {
    ConnectionFailure,
    Timeout,
    QueryError,
    FixtureMiss,
}

impl fmt::Display for ExecErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExecErrorKind::ConnectionFailure => "connection_failure",
            ExecErrorKind::Timeout => "timeout",
            ExecErrorKind::QueryError => "query_error",
            ExecErrorKind::FixtureMiss => "fixture_miss",
        };
        f.write_str(s)
    }
}

/// Outcome of one query execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub ok: bool,
    pub raw_output: String,
    pub normalized_output: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<ExecErrorKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
    pub latency_ms: u64,
}

impl ExecutionResult {
    fn success(raw: String, latency: Duration) -> Self {
        ExecutionResult {
            ok: true,
            normalized_output: normalize(&raw),
            raw_output: raw,
            error_kind: None,
            error_message: None,
            latency_ms: latency.as_millis() as u64,
        }
    }

    fn failure(kind: ExecErrorKind, message: String, raw: String, latency: Duration) -> Self {
        ExecutionResult {
            ok: false,
            normalized_output: normalize(&raw),
            raw_output: raw,
            error_kind: Some(kind),
            error_message: Some(message),
            latency_ms: latency.as_millis() as u64,
        }
    }
}

/// Configuration and fixture-loading problems. Execution problems never use
/// this type; they are encoded in [`ExecutionResult`].
#[derive(Debug, Error)]
pub enum JoernError {
    #[error("invalid backend config: {0}")]
    BadConfig(String),
    #[error("cannot read fixture file {path}: {source}")]
    FixtureIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("fixture file {path} is not valid JSON: {source}")]
    FixtureFormat {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

fn repl_prefix() -> &'static regex::Regex {
    static RX: OnceLock<regex::Regex> = OnceLock::new();
    // `val resN: <Type> = ` — index and type annotation are opaque; only the
    // binding shape is stripped.
    RX.get_or_init(|| regex::Regex::new(r"^val res\d+:\s*.*?\s=\s").unwrap())
}

/// Strips REPL value-binding prefixes and collapses all whitespace runs to a
/// single space. Idempotent; never lengthens its input.
pub fn normalize(raw: &str) -> String {
    let mut current = normalize_once(raw);
    // Prefix stripping and collapsing can expose a new strippable prefix
    // (e.g. a binding split across lines); iterate to the fixpoint so the
    // function is idempotent by construction.
    loop {
        let next = normalize_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn normalize_once(raw: &str) -> String {
    let mut stripped = String::with_capacity(raw.len());
    for (i, line) in raw.lines().enumerate() {
        let mut rest = line;
        while let Some(m) = repl_prefix().find(rest) {
            rest = &rest[m.end()..];
        }
        if i > 0 {
            stripped.push('\n');
        }
        stripped.push_str(rest);
    }
    let mut out = String::with_capacity(stripped.len());
    let mut in_space = false;
    for c in stripped.trim().chars() {
        if c.is_whitespace() {
            if !in_space {
                out.push(' ');
            }
            in_space = true;
        } else {
            out.push(c);
            in_space = false;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

/// A fixture entry is either recorded raw output or a recorded server-side
/// query error.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum FixtureEntry {
    Output(String),
    Error { error: String },
}

/// Client over one backend. Fixture mode is read-only and freely concurrent;
/// live mode serializes queries to one server connection.
pub enum JoernClient {
    Fixture(FixtureStore),
    Live(LiveJoern),
}

impl JoernClient {
    pub fn connect(config: &BackendConfig) -> Result<Self, JoernError> {
        config.validate()?;
        match config.mode {
            BackendMode::Fixture => {
                let path = config.fixture_path.clone().expect("validated");
                Ok(JoernClient::Fixture(FixtureStore::load(path)?))
            }
            BackendMode::Live => Ok(JoernClient::Live(LiveJoern {
                endpoint: config.endpoint.clone().expect("validated"),
                timeout: config.timeout(),
            })),
        }
    }

    /// Runs one query. Never raises; every failure is encoded in the result.
    pub fn execute(&self, query: &str) -> ExecutionResult {
        match self {
            JoernClient::Fixture(store) => store.execute(query),
            JoernClient::Live(live) => live.execute(query),
        }
    }
}

/// Canned query results keyed by normalized query text, so whitespace
/// differences in generated queries cannot cause spurious misses.
pub struct FixtureStore {
    entries: HashMap<String, FixtureEntry>,
}

impl FixtureStore {
    pub fn load(path: PathBuf) -> Result<Self, JoernError> {
        let data = fs::read_to_string(&path).map_err(|source| JoernError::FixtureIo {
            path: path.clone(),
            source,
        })?;
        let raw: HashMap<String, FixtureEntry> =
            serde_json::from_str(&data).map_err(|source| JoernError::FixtureFormat {
                path: path.clone(),
                source,
            })?;
        // Keys are normalized on load as well; hand-edited fixtures may use
        // readable multi-line queries.
        let entries = raw.into_iter().map(|(k, v)| (normalize(&k), v)).collect();
        Ok(FixtureStore { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn execute(&self, query: &str) -> ExecutionResult {
        let started = Instant::now();
        let key = normalize(query);
        match self.entries.get(&key) {
            Some(FixtureEntry::Output(raw)) => {
                ExecutionResult::success(raw.clone(), started.elapsed())
            }
            Some(FixtureEntry::Error { error }) => ExecutionResult::failure(
                ExecErrorKind::QueryError,
                error.clone(),
                error.clone(),
                started.elapsed(),
            ),
            None => ExecutionResult::failure(
                ExecErrorKind::FixtureMiss,
                format!("no fixture entry for query: {key}"),
                String::new(),
                started.elapsed(),
            ),
        }
    }
}

/// HTTP adapter for a running Joern server. The wire shape is deliberately
/// small — POST {"query": ...} returning {"success", "stdout", "stderr"} —
/// and isolated here so a different transport touches one type.
pub struct LiveJoern {
    endpoint: String,
    timeout: Duration,
}

#[derive(Deserialize)]
struct LiveResponse {
    success: bool,
    #[serde(default)]
    stdout: String,
    #[serde(default)]
    stderr: Option<String>,
}

impl LiveJoern {
    fn execute(&self, query: &str) -> ExecutionResult {
        let started = Instant::now();
        let response = ureq::post(&self.endpoint)
            .timeout(self.timeout)
            .send_json(serde_json::json!({ "query": query }));
        match response {
            Ok(resp) => match resp.into_json::<LiveResponse>() {
                Ok(body) if body.success => {
                    ExecutionResult::success(body.stdout, started.elapsed())
                }
                Ok(body) => {
                    let message = body
                        .stderr
                        .filter(|s| !s.is_empty())
                        .unwrap_or_else(|| body.stdout.clone());
                    ExecutionResult::failure(
                        ExecErrorKind::QueryError,
                        message,
                        body.stdout,
                        started.elapsed(),
                    )
                }
                Err(e) => ExecutionResult::failure(
                    ExecErrorKind::ConnectionFailure,
                    format!("malformed server response: {e}"),
                    String::new(),
                    started.elapsed(),
                ),
            },
            Err(ureq::Error::Status(code, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                ExecutionResult::failure(
                    ExecErrorKind::QueryError,
                    format!("server returned HTTP {code}: {body}"),
                    body,
                    started.elapsed(),
                )
            }
            Err(ureq::Error::Transport(t)) => {
                let timed_out =
                    matches!(t.kind(), ureq::ErrorKind::Io) && t.to_string().contains("timed out");
                let kind = if timed_out {
                    ExecErrorKind::Timeout
                } else {
                    ExecErrorKind::ConnectionFailure
                };
                ExecutionResult::failure(kind, t.to_string(), String::new(), started.elapsed())
            }
        }
    }
}
