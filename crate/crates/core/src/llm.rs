//! Chat-completion abstraction with tool calling, token accounting, and a
//! deterministic replay backend.
//!
//! Replay files are first-class, not a test convenience: hosted-model runs
//! cannot be reproduced without paid inference, so recorded transcripts are
//! the repository's end-to-end evidence. A replay file is a JSON object
//! mapping trial id to the ordered list of scripted assistant turns:
//!
//! ```json
//! {
//!   "A2:replay-72b:D01:42": [
//!     {"assistant_message": {"role": "assistant", "content": "..."},
//!      "usage": {"input_tokens": 512, "output_tokens": 64}}
//!   ]
//! }
//! ```
//!
//! Each trial owns its replay cursor, so identical files always produce
//! identical transcripts.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::ops::Add;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable holding the API token for the http backend.
/// Tokens never appear in files.
pub const API_TOKEN_ENV: &str = "NL2CPGQL_API_TOKEN";

/// Speaker of one conversation turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        };
        f.write_str(s)
    }
}

/// One structured tool invocation emitted by the assistant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub tool_name: String,
    /// JSON object text; parsed at dispatch, not at construction.
    pub arguments: String,
}

/// One conversation turn. Tool results carry the id of the call they answer;
/// only assistant turns may carry tool calls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn assistant_tool_calls(content: impl Into<String>, calls: Vec<ToolCall>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
            tool_calls: calls,
            tool_call_id: None,
        }
    }

    pub fn tool_result(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Tool,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: Some(call_id.into()),
        }
    }

    fn check(&self) -> Result<(), String> {
        if self.role == Role::Tool && self.tool_call_id.is_none() {
            return Err("tool message without tool_call_id".into());
        }
        if !self.tool_calls.is_empty() && self.role != Role::Assistant {
            return Err(format!("tool_calls on a {} message", self.role));
        }
        Ok(())
    }
}

/// Description of a callable tool, passed in the request's tool list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    /// JSON-schema-style object describing the typed arguments.
    pub parameters: serde_json::Value,
}

/// Token counts for one completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CompletionUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl CompletionUsage {
    pub fn new(input_tokens: u64, output_tokens: u64) -> Self {
        CompletionUsage {
            input_tokens,
            output_tokens,
        }
    }

    pub fn total(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

impl Add for CompletionUsage {
    type Output = CompletionUsage;

    fn add(self, rhs: CompletionUsage) -> CompletionUsage {
        CompletionUsage {
            input_tokens: self.input_tokens + rhs.input_tokens,
            output_tokens: self.output_tokens + rhs.output_tokens,
        }
    }
}

/// Componentwise sum over all calls of a trial, retries and tool turns
/// included.
pub fn count_usage(usages: &[CompletionUsage]) -> CompletionUsage {
    usages
        .iter()
        .copied()
        .fold(CompletionUsage::default(), Add::add)
}

/// Which completion backend to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmBackendKind {
    Http,
    Replay,
}

/// Model and backend selection for one trial.
///
/// Faithful runs use temperature 0 with fixed seeds; that is data, not an
/// enforced invariant, so exploratory settings remain possible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlmConfig {
    pub model_id: String,
    pub temperature: f64,
    pub seed: i64,
    pub backend: LlmBackendKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay_path: Option<PathBuf>,
}

impl LlmConfig {
    pub fn replay(model_id: impl Into<String>, seed: i64, path: impl Into<PathBuf>) -> Self {
        LlmConfig {
            model_id: model_id.into(),
            temperature: 0.0,
            seed,
            backend: LlmBackendKind::Replay,
            endpoint: None,
            replay_path: Some(path.into()),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        match self.backend {
            LlmBackendKind::Replay if self.replay_path.is_none() => Err(LlmError::BadConfig(
                "replay backend requires replay_path".into(),
            )),
            LlmBackendKind::Http if self.endpoint.is_none() => Err(LlmError::BadConfig(
                "http backend requires an endpoint".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid llm config: {0}")]
    BadConfig(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("replay script has no trial '{0}'")]
    ReplayMissingTrial(String),
    #[error("replay script exhausted for trial '{trial}' at turn {turn}")]
    ReplayExhausted { trial: String, turn: usize },
    #[error("assistant emitted unparseable tool-call syntax: {0}")]
    MalformedToolCall(String),
    #[error("cannot read replay file {path}: {source}")]
    ReplayIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("replay file {path} is malformed: {message}")]
    ReplayFormat { path: PathBuf, message: String },
}

impl LlmError {
    /// Rate limits and tool-call parse failures abort a trial at the
    /// infrastructure level; such trials are excluded from accuracy
    /// denominators.
    pub fn is_infrastructure(&self) -> bool {
        matches!(
            self,
            LlmError::Transport(_)
                | LlmError::RateLimited { .. }
                | LlmError::ReplayMissingTrial(_)
                | LlmError::ReplayExhausted { .. }
                | LlmError::MalformedToolCall(_)
        )
    }
}

/// One chat completion. Implementations must attribute usage exactly once
/// per returned message, retries included.
pub trait ChatClient {
    fn complete(
        &mut self,
        messages: &[ChatMessage],
        tools: Option<&[ToolSchema]>,
    ) -> Result<(ChatMessage, CompletionUsage), LlmError>;
}

/// Builds the client for one trial from its config.
pub fn client_for_trial(
    config: &LlmConfig,
    trial_id: &str,
) -> Result<Box<dyn ChatClient>, LlmError> {
    config.validate()?;
    match config.backend {
        LlmBackendKind::Replay => {
            let script = ReplayScript::load(config.replay_path.clone().expect("validated"))?;
            Ok(Box::new(script.client_for(trial_id)?))
        }
        LlmBackendKind::Http => Ok(Box::new(HttpChatClient::new(config.clone())?)),
    }
}

// ---------------------------------------------------------------------------
// Replay backend
// ---------------------------------------------------------------------------

/// One scripted assistant turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedTurn {
    pub assistant_message: ChatMessage,
    pub usage: CompletionUsage,
}

/// A loaded replay file: trial id → scripted turns.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReplayScript {
    pub trials: HashMap<String, Vec<ScriptedTurn>>,
}

impl ReplayScript {
    pub fn load(path: PathBuf) -> Result<Self, LlmError> {
        let data = fs::read_to_string(&path).map_err(|source| LlmError::ReplayIo {
            path: path.clone(),
            source,
        })?;
        let script: ReplayScript =
            serde_json::from_str(&data).map_err(|e| LlmError::ReplayFormat {
                path: path.clone(),
                message: e.to_string(),
            })?;
        for (trial, turns) in &script.trials {
            for (i, turn) in turns.iter().enumerate() {
                if turn.assistant_message.role != Role::Assistant {
                    return Err(LlmError::ReplayFormat {
                        path: path.clone(),
                        message: format!("trial '{trial}' turn {i} is not an assistant message"),
                    });
                }
                if let Err(msg) = turn.assistant_message.check() {
                    return Err(LlmError::ReplayFormat {
                        path: path.clone(),
                        message: format!("trial '{trial}' turn {i}: {msg}"),
                    });
                }
            }
        }
        Ok(script)
    }

    pub fn from_trials(trials: HashMap<String, Vec<ScriptedTurn>>) -> Self {
        ReplayScript { trials }
    }

    pub fn client_for(&self, trial_id: &str) -> Result<ReplayClient, LlmError> {
        let turns = self
            .trials
            .get(trial_id)
            .ok_or_else(|| LlmError::ReplayMissingTrial(trial_id.to_string()))?;
        Ok(ReplayClient {
            trial_id: trial_id.to_string(),
            turns: turns.clone(),
            cursor: 0,
        })
    }
}

/// Per-trial replay cursor.
pub struct ReplayClient {
    trial_id: String,
    turns: Vec<ScriptedTurn>,
    cursor: usize,
}

impl ChatClient for ReplayClient {
    fn complete(
        &mut self,
        _messages: &[ChatMessage],
        tools: Option<&[ToolSchema]>,
    ) -> Result<(ChatMessage, CompletionUsage), LlmError> {
        let turn = self
            .turns
            .get(self.cursor)
            .ok_or_else(|| LlmError::ReplayExhausted {
                trial: self.trial_id.clone(),
                turn: self.cursor,
            })?;
        self.cursor += 1;
        let message = turn.assistant_message.clone();
        reject_malformed_tool_syntax(&message, tools)?;
        Ok((message, turn.usage))
    }
}

/// Free-text pseudo-tool syntax is not a tool call; when tools were offered
/// and the assistant answered with `<function=...>` text instead of the
/// structured field, the turn is unparseable.
fn reject_malformed_tool_syntax(
    message: &ChatMessage,
    tools: Option<&[ToolSchema]>,
) -> Result<(), LlmError> {
    if tools.is_some() && message.tool_calls.is_empty() && message.content.contains("<function=") {
        let snippet: String = message.content.chars().take(120).collect();
        return Err(LlmError::MalformedToolCall(snippet));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// HTTP backend
// ---------------------------------------------------------------------------

const RATE_LIMIT_TRIES: u32 = 3;
const RATE_LIMIT_BASE_DELAY: Duration = Duration::from_millis(500);

/// Chat-completions adapter (OpenAI-compatible wire shape).
pub struct HttpChatClient {
    config: LlmConfig,
    token: Option<String>,
}

impl HttpChatClient {
    pub fn new(config: LlmConfig) -> Result<Self, LlmError> {
        config.validate()?;
        Ok(HttpChatClient {
            config,
            token: std::env::var(API_TOKEN_ENV).ok(),
        })
    }

    fn request_body(
        &self,
        messages: &[ChatMessage],
        tools: Option<&[ToolSchema]>,
    ) -> serde_json::Value {
        let wire_messages: Vec<serde_json::Value> = messages.iter().map(wire_message).collect();
        let mut body = serde_json::json!({
            "model": self.config.model_id,
            "messages": wire_messages,
            "temperature": self.config.temperature,
            "seed": self.config.seed,
        });
        if let Some(tools) = tools {
            body["tools"] = tools
                .iter()
                .map(|t| {
                    serde_json::json!({
                        "type": "function",
                        "function": {
                            "name": t.name,
                            "description": t.description,
                            "parameters": t.parameters,
                        }
                    })
                })
                .collect();
        }
        body
    }
}

fn wire_message(m: &ChatMessage) -> serde_json::Value {
    let mut v = serde_json::json!({ "role": m.role.to_string(), "content": m.content });
    if !m.tool_calls.is_empty() {
        v["tool_calls"] = m
            .tool_calls
            .iter()
            .map(|c| {
                serde_json::json!({
                    "id": c.id,
                    "type": "function",
                    "function": { "name": c.tool_name, "arguments": c.arguments }
                })
            })
            .collect();
    }
    if let Some(id) = &m.tool_call_id {
        v["tool_call_id"] = serde_json::Value::String(id.clone());
    }
    v
}

impl ChatClient for HttpChatClient {
    fn complete(
        &mut self,
        messages: &[ChatMessage],
        tools: Option<&[ToolSchema]>,
    ) -> Result<(ChatMessage, CompletionUsage), LlmError> {
        let endpoint = self.config.endpoint.clone().expect("validated");
        let body = self.request_body(messages, tools);

        let mut delay = RATE_LIMIT_BASE_DELAY;
        for attempt in 1..=RATE_LIMIT_TRIES {
            let mut request = ureq::post(&endpoint);
            if let Some(token) = &self.token {
                request = request.set("Authorization", &format!("Bearer {token}"));
            }
            match request.send_json(body.clone()) {
                Ok(resp) => {
                    let value: serde_json::Value = resp
                        .into_json()
                        .map_err(|e| LlmError::Transport(format!("malformed response: {e}")))?;
                    return parse_completion(&value, tools);
                }
                Err(ureq::Error::Status(429, _)) => {
                    if attempt == RATE_LIMIT_TRIES {
                        return Err(LlmError::RateLimited { attempts: attempt });
                    }
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                Err(ureq::Error::Status(code, resp)) => {
                    let body = resp.into_string().unwrap_or_default();
                    return Err(LlmError::Transport(format!("HTTP {code}: {body}")));
                }
                Err(ureq::Error::Transport(t)) => return Err(LlmError::Transport(t.to_string())),
            }
        }
        Err(LlmError::RateLimited {
            attempts: RATE_LIMIT_TRIES,
        })
    }
}

fn parse_completion(
    value: &serde_json::Value,
    tools: Option<&[ToolSchema]>,
) -> Result<(ChatMessage, CompletionUsage), LlmError> {
    let message = &value["choices"][0]["message"];
    if message.is_null() {
        return Err(LlmError::Transport("response carries no message".into()));
    }
    let content = message["content"].as_str().unwrap_or_default().to_string();
    let tool_calls = match message["tool_calls"].as_array() {
        Some(calls) => calls
            .iter()
            .map(|c| {
                let id = c["id"].as_str().unwrap_or_default().to_string();
                let tool_name = c["function"]["name"]
                    .as_str()
                    .unwrap_or_default()
                    .to_string();
                let arguments = match &c["function"]["arguments"] {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                if tool_name.is_empty() {
                    Err(LlmError::MalformedToolCall(
                        "tool call without a function name".into(),
                    ))
                } else {
                    Ok(ToolCall {
                        id,
                        tool_name,
                        arguments,
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    let assistant = ChatMessage {
        role: Role::Assistant,
        content,
        tool_calls,
        tool_call_id: None,
    };
    reject_malformed_tool_syntax(&assistant, tools)?;
    let usage = CompletionUsage {
        input_tokens: value["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        output_tokens: value["usage"]["completion_tokens"].as_u64().unwrap_or(0),
    };
    Ok((assistant, usage))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_turn_script(trial: &str, content: &str) -> ReplayScript {
        let mut trials = HashMap::new();
        trials.insert(
            trial.to_string(),
            vec![ScriptedTurn {
                assistant_message: ChatMessage::assistant(content),
                usage: CompletionUsage::new(100, 20),
            }],
        );
        ReplayScript::from_trials(trials)
    }

    #[test]
    fn replay_returns_scripted_turns_verbatim() {
        let script = one_turn_script("t1", "cpg.method.name.l");
        let mut client = script.client_for("t1").unwrap();
        let (msg, usage) = client.complete(&[ChatMessage::user("hi")], None).unwrap();
        assert_eq!(msg.content, "cpg.method.name.l");
        assert_eq!(usage, CompletionUsage::new(100, 20));
    }

    #[test]
    fn replay_exhaustion_is_a_distinct_error() {
        let script = one_turn_script("t1", "x");
        let mut client = script.client_for("t1").unwrap();
        client.complete(&[], None).unwrap();
        match client.complete(&[], None) {
            Err(LlmError::ReplayExhausted { trial, turn }) => {
                assert_eq!(trial, "t1");
                assert_eq!(turn, 1);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn missing_trial_is_a_distinct_error() {
        let script = one_turn_script("t1", "x");
        assert!(matches!(
            script.client_for("t2"),
            Err(LlmError::ReplayMissingTrial(_))
        ));
    }

    #[test]
    fn pseudo_tool_syntax_is_malformed_when_tools_offered() {
        let script = one_turn_script("t1", "<function=find_methods>{\"name\": \".*\"}</function>");
        let tools = [ToolSchema {
            name: "find_methods".into(),
            description: "d".into(),
            parameters: serde_json::json!({"type": "object"}),
        }];
        let mut client = script.client_for("t1").unwrap();
        assert!(matches!(
            client.complete(&[], Some(&tools)),
            Err(LlmError::MalformedToolCall(_))
        ));

        // Without tools on offer the same content is ordinary text.
        let mut client = script.client_for("t1").unwrap();
        assert!(client.complete(&[], None).is_ok());
    }

    #[test]
    fn usage_sums_componentwise() {
        assert_eq!(count_usage(&[]), CompletionUsage::default());
        let total = count_usage(&[CompletionUsage::new(100, 20), CompletionUsage::new(300, 50)]);
        assert_eq!(total, CompletionUsage::new(400, 70));
        assert_eq!(total.total(), 470);
    }

    #[test]
    fn config_invariants() {
        let mut cfg = LlmConfig::replay("m", 42, "replay.json");
        assert!(cfg.validate().is_ok());
        cfg.replay_path = None;
        assert!(cfg.validate().is_err());

        let http = LlmConfig {
            model_id: "m".into(),
            temperature: 0.0,
            seed: 42,
            backend: LlmBackendKind::Http,
            endpoint: None,
            replay_path: None,
        };
        assert!(http.validate().is_err());
    }

    #[test]
    fn replay_file_round_trips() {
        let script = one_turn_script("A1:m:S01:42", "hello");
        let json = serde_json::to_string(&script).unwrap();
        // Top level is a plain map from trial id to turns.
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(value.get("A1:m:S01:42").is_some());
        let back: ReplayScript = serde_json::from_str(&json).unwrap();
        assert_eq!(back.trials["A1:m:S01:42"], script.trials["A1:m:S01:42"]);
    }

    /// Serves scripted (status, body) responses to sequential requests.
    fn stub_server(
        responses: Vec<(u16, String)>,
    ) -> (String, std::thread::JoinHandle<Vec<String>>) {
        use std::io::{BufRead, BufReader, Read, Write};
        use std::net::TcpListener;

        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, payload) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(&mut stream);
                let mut content_length = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let header = line.trim();
                    if header.is_empty() {
                        break;
                    }
                    if let Some(v) = header.to_ascii_lowercase().strip_prefix("content-length:") {
                        content_length = v.trim().parse().unwrap();
                    }
                }
                let mut body = vec![0u8; content_length];
                reader.read_exact(&mut body).unwrap();
                bodies.push(String::from_utf8(body).unwrap());
                let reason = if status == 200 {
                    "OK"
                } else {
                    "Too Many Requests"
                };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                    payload.len()
                );
                stream.write_all(response.as_bytes()).unwrap();
            }
            bodies
        });
        (format!("http://{addr}/v1/chat/completions"), handle)
    }

    fn http_config(endpoint: &str) -> LlmConfig {
        LlmConfig {
            model_id: "stub-model".into(),
            temperature: 0.0,
            seed: 42,
            backend: LlmBackendKind::Http,
            endpoint: Some(endpoint.to_string()),
            replay_path: None,
        }
    }

    fn completion_body(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": 120, "completion_tokens": 30}
        })
        .to_string()
    }

    #[test]
    fn http_backend_parses_content_and_usage() {
        let (endpoint, handle) = stub_server(vec![(200, completion_body("cpg.method.name.l"))]);
        let mut client = HttpChatClient::new(http_config(&endpoint)).unwrap();
        let (message, usage) = client
            .complete(&[ChatMessage::system("s"), ChatMessage::user("u")], None)
            .unwrap();
        assert_eq!(message.content, "cpg.method.name.l");
        assert_eq!(usage, CompletionUsage::new(120, 30));

        // The request carried the model, seed, and both messages.
        let bodies = handle.join().unwrap();
        let request: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
        assert_eq!(request["model"], "stub-model");
        assert_eq!(request["seed"], 42);
        assert_eq!(request["messages"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn http_backend_parses_structured_tool_calls() {
        let body = serde_json::json!({
            "choices": [{"message": {
                "role": "assistant",
                "content": "",
                "tool_calls": [{
                    "id": "call_1",
                    "type": "function",
                    "function": {"name": "find_methods", "arguments": "{\"name\": \"login\"}"}
                }]
            }}],
            "usage": {"prompt_tokens": 200, "completion_tokens": 15}
        })
        .to_string();
        let (endpoint, handle) = stub_server(vec![(200, body)]);
        let tools = [ToolSchema {
            name: "find_methods".into(),
            description: "d".into(),
            parameters: serde_json::json!({"type": "object"}),
        }];
        let mut client = HttpChatClient::new(http_config(&endpoint)).unwrap();
        let (message, _) = client
            .complete(&[ChatMessage::user("u")], Some(&tools))
            .unwrap();
        assert_eq!(message.tool_calls.len(), 1);
        assert_eq!(message.tool_calls[0].tool_name, "find_methods");
        assert_eq!(message.tool_calls[0].arguments, "{\"name\": \"login\"}");

        // Tool schemas ride in the request's tools parameter.
        let bodies = handle.join().unwrap();
        let request: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
        assert_eq!(request["tools"][0]["function"]["name"], "find_methods");
    }

    #[test]
    fn http_backend_retries_rate_limits_then_succeeds() {
        let (endpoint, handle) = stub_server(vec![
            (429, "{}".to_string()),
            (200, completion_body("recovered")),
        ]);
        let mut client = HttpChatClient::new(http_config(&endpoint)).unwrap();
        let (message, usage) = client.complete(&[ChatMessage::user("u")], None).unwrap();
        assert_eq!(message.content, "recovered");
        // Usage attributed exactly once despite the retry.
        assert_eq!(usage, CompletionUsage::new(120, 30));
        handle.join().unwrap();
    }

    #[test]
    fn http_backend_gives_up_after_bounded_rate_limit_retries() {
        let (endpoint, handle) = stub_server(vec![
            (429, "{}".into()),
            (429, "{}".into()),
            (429, "{}".into()),
        ]);
        let mut client = HttpChatClient::new(http_config(&endpoint)).unwrap();
        match client.complete(&[ChatMessage::user("u")], None) {
            Err(LlmError::RateLimited { attempts: 3 }) => {}
            other => panic!("expected rate-limit exhaustion, got {other:?}"),
        }
        handle.join().unwrap();
    }

    #[test]
    fn http_backend_flags_pseudo_tool_syntax() {
        let (endpoint, handle) = stub_server(vec![(
            200,
            completion_body("<function=find_methods>{}</function>"),
        )]);
        let tools = [ToolSchema {
            name: "find_methods".into(),
            description: "d".into(),
            parameters: serde_json::json!({"type": "object"}),
        }];
        let mut client = HttpChatClient::new(http_config(&endpoint)).unwrap();
        assert!(matches!(
            client.complete(&[ChatMessage::user("u")], Some(&tools)),
            Err(LlmError::MalformedToolCall(_))
        ));
        handle.join().unwrap();
    }

    #[test]
    fn replay_load_rejects_non_assistant_turns() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        use std::io::Write;
        write!(
            file,
            r#"{{"t": [{{"assistant_message": {{"role": "user", "content": "x"}}, "usage": {{"input_tokens": 1, "output_tokens": 1}}}}]}}"#
        )
        .unwrap();
        match ReplayScript::load(file.path().to_path_buf()) {
            Err(LlmError::ReplayFormat { message, .. }) => {
                assert!(message.contains("not an assistant message"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
