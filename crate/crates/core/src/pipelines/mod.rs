//! The three translation architectures over one conversation model.
//!
//! All three share a uniform error budget: up to three attempts on
//! recoverable errors for the single-query pipelines, a ten-step budget for
//! the agent loop. What counts as recoverable differs by design:
//!
//! - direct (A1): backend execution errors and empty query extraction;
//! - structured (A2): JSON parse/validation errors only — once a valid spec
//!   compiles, the single execution result is final, success or not;
//! - agentic (A3): nothing retries; the step budget is the only limit.

mod agentic;
mod direct;
pub mod prompts;
mod structured;
pub mod tools;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmark::Task;
use crate::joern::{BackendConfig, JoernClient, JoernError};
use crate::llm::{
    client_for_trial, count_usage, ChatClient, ChatMessage, CompletionUsage, LlmConfig, LlmError,
};

pub use agentic::run_agentic_with;
pub use direct::{extract_query, run_direct_with};
pub use structured::run_structured_with;

/// Attempt budget shared by the single-query pipelines.
pub const MAX_ATTEMPTS: u32 = 3;

/// Step budget for the agent loop.
pub const MAX_STEPS: u32 = 10;

/// The three architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ApproachId {
    #[serde(rename = "A1_direct")]
    A1Direct,
    #[serde(rename = "A2_structured")]
    A2Structured,
    #[serde(rename = "A3_agentic")]
    A3Agentic,
}

impl ApproachId {
    pub const ALL: [ApproachId; 3] = [
        ApproachId::A1Direct,
        ApproachId::A2Structured,
        ApproachId::A3Agentic,
    ];

    /// Short label used in trial ids and report headers.
    pub fn short(self) -> &'static str {
        match self {
            ApproachId::A1Direct => "A1",
            ApproachId::A2Structured => "A2",
            ApproachId::A3Agentic => "A3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "A1" | "a1" | "A1_direct" | "direct" => Some(ApproachId::A1Direct),
            "A2" | "a2" | "A2_structured" | "structured" => Some(ApproachId::A2Structured),
            "A3" | "a3" | "A3_agentic" | "agentic" => Some(ApproachId::A3Agentic),
            _ => None,
        }
    }
}

impl fmt::Display for ApproachId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// How a trial ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Success,
    FailRetriesExhausted,
    FailMaxSteps,
    FailExecution,
    FailInfrastructure,
}

/// Outcome fields of one trial.
///
/// `attempts` counts completed LLM turns for A1/A2 and stays 0 for A3, whose
/// loop is measured by `steps` and `tool_calls` instead. `generated_query`
/// is absent for A3: the agent produces results directly, not query strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub status: TrialStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_query: Option<String>,
    pub attempts: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tool_calls: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One pipeline execution, fully recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub task_id: String,
    pub approach: ApproachId,
    pub model_id: String,
    pub seed: i64,
    pub transcript: Vec<ChatMessage>,
    pub usage: CompletionUsage,
    pub outcome: TrialOutcome,
    pub wall_time_ms: u64,
}

impl TrialRecord {
    pub fn trial_id(&self) -> String {
        trial_id(self.approach, &self.model_id, &self.task_id, self.seed)
    }
}

/// Canonical trial identity: approach, model, task, seed.
pub fn trial_id(approach: ApproachId, model_id: &str, task_id: &str, seed: i64) -> String {
    format!("{}:{}:{}:{}", approach.short(), model_id, task_id, seed)
}

/// Knobs shared by the pipelines.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Error text fed back to the model is capped to bound context growth.
    pub feedback_cap: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { feedback_cap: 2000 }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Joern(#[from] JoernError),
}

/// Identity of the trial being run, shared by the three runners.
#[derive(Debug, Clone, Copy)]
pub struct TrialContext<'a> {
    pub task: &'a Task,
    pub model_id: &'a str,
    pub seed: i64,
}

impl TrialContext<'_> {
    fn trial_id(&self, approach: ApproachId) -> String {
        trial_id(approach, self.model_id, &self.task.id, self.seed)
    }
}

/// Runs one trial with freshly-constructed backends.
///
/// The harness prefers the `run_*_with` variants so it can share one backend
/// across trials; this entry point serves one-off invocations.
pub fn run_approach(
    approach: ApproachId,
    task: &Task,
    llm: &LlmConfig,
    joern: &BackendConfig,
) -> Result<TrialRecord, PipelineError> {
    let client = JoernClient::connect(joern)?;
    let ctx = TrialContext {
        task,
        model_id: &llm.model_id,
        seed: llm.seed,
    };
    run_approach_with(approach, ctx, llm, &client, &PipelineOptions::default())
}

/// Runs one trial against a shared query backend.
///
/// LLM-side infrastructure failures (transport, rate limits, missing or
/// exhausted replay scripts, unparseable tool calls) become
/// `fail_infrastructure` records rather than errors: the run must continue
/// and such trials are reported separately.
pub fn run_approach_with(
    approach: ApproachId,
    ctx: TrialContext<'_>,
    llm: &LlmConfig,
    joern: &JoernClient,
    opts: &PipelineOptions,
) -> Result<TrialRecord, PipelineError> {
    let id = ctx.trial_id(approach);
    let mut client = match client_for_trial(llm, &id) {
        Ok(c) => c,
        Err(e) if e.is_infrastructure() => {
            return Ok(infrastructure_record(approach, ctx, &e));
        }
        Err(e) => return Err(e.into()),
    };
    Ok(match approach {
        ApproachId::A1Direct => run_direct_with(ctx, client.as_mut(), joern, opts),
        ApproachId::A2Structured => run_structured_with(ctx, client.as_mut(), joern, opts),
        ApproachId::A3Agentic => run_agentic_with(ctx, client.as_mut(), joern, opts),
    })
}

/// Direct generation with freshly-constructed backends.
pub fn run_direct(
    task: &Task,
    llm: &LlmConfig,
    joern: &BackendConfig,
) -> Result<TrialRecord, PipelineError> {
    run_approach(ApproachId::A1Direct, task, llm, joern)
}

/// Structured generation with freshly-constructed backends.
pub fn run_structured(
    task: &Task,
    llm: &LlmConfig,
    joern: &BackendConfig,
) -> Result<TrialRecord, PipelineError> {
    run_approach(ApproachId::A2Structured, task, llm, joern)
}

/// The agent loop with freshly-constructed backends.
pub fn run_agentic(
    task: &Task,
    llm: &LlmConfig,
    joern: &BackendConfig,
) -> Result<TrialRecord, PipelineError> {
    run_approach(ApproachId::A3Agentic, task, llm, joern)
}

fn infrastructure_record(
    approach: ApproachId,
    ctx: TrialContext<'_>,
    error: &LlmError,
) -> TrialRecord {
    TrialRecord {
        task_id: ctx.task.id.clone(),
        approach,
        model_id: ctx.model_id.to_string(),
        seed: ctx.seed,
        transcript: Vec::new(),
        usage: CompletionUsage::default(),
        outcome: TrialOutcome {
            status: TrialStatus::FailInfrastructure,
            final_output: None,
            generated_query: None,
            attempts: 0,
            steps: None,
            tool_calls: None,
            error: Some(error.to_string()),
        },
        wall_time_ms: 0,
    }
}

// ---------------------------------------------------------------------------
// Shared runner plumbing
// ---------------------------------------------------------------------------

/// Accumulates a trial as it runs and assembles the final record.
struct TrialBuilder<'a> {
    ctx: TrialContext<'a>,
    approach: ApproachId,
    transcript: Vec<ChatMessage>,
    usages: Vec<CompletionUsage>,
    started: Instant,
}

impl<'a> TrialBuilder<'a> {
    fn new(approach: ApproachId, ctx: TrialContext<'a>, system_prompt: String) -> Self {
        let transcript = vec![
            ChatMessage::system(system_prompt),
            ChatMessage::user(&ctx.task.request),
        ];
        TrialBuilder {
            ctx,
            approach,
            transcript,
            usages: Vec::new(),
            started: Instant::now(),
        }
    }

    /// One completion; the assistant turn joins the transcript and its usage
    /// is attributed exactly once.
    fn complete(
        &mut self,
        client: &mut dyn ChatClient,
        tools: Option<&[crate::llm::ToolSchema]>,
    ) -> Result<ChatMessage, LlmError> {
        let (message, usage) = client.complete(&self.transcript, tools)?;
        self.usages.push(usage);
        self.transcript.push(message.clone());
        Ok(message)
    }

    fn push(&mut self, message: ChatMessage) {
        self.transcript.push(message);
    }

    fn attempts(&self) -> u32 {
        self.usages.len() as u32
    }

    fn finish(self, outcome: TrialOutcome) -> TrialRecord {
        TrialRecord {
            task_id: self.ctx.task.id.clone(),
            approach: self.approach,
            model_id: self.ctx.model_id.to_string(),
            seed: self.ctx.seed,
            usage: count_usage(&self.usages),
            transcript: self.transcript,
            outcome,
            wall_time_ms: self.started.elapsed().as_millis() as u64,
        }
    }

    fn finish_infrastructure(self, error: &LlmError) -> TrialRecord {
        let attempts = self.attempts();
        let approach = self.approach;
        self.finish(TrialOutcome {
            status: TrialStatus::FailInfrastructure,
            final_output: None,
            generated_query: None,
            attempts: if approach == ApproachId::A3Agentic {
                0
            } else {
                attempts
            },
            steps: None,
            tool_calls: None,
            error: Some(error.to_string()),
        })
    }
}

/// Caps feedback text fed to the model; truncation is marked so the model
/// knows the text is partial.
fn truncate_feedback(text: &str, cap: usize) -> String {
    if text.chars().count() <= cap {
        return text.to_string();
    }
    let kept: String = text.chars().take(cap).collect();
    format!("{kept}… [truncated]")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approach_ids_are_exactly_three_and_parse() {
        assert_eq!(ApproachId::ALL.len(), 3);
        for a in ApproachId::ALL {
            assert_eq!(ApproachId::parse(a.short()), Some(a));
        }
        assert_eq!(
            ApproachId::parse("A2_structured"),
            Some(ApproachId::A2Structured)
        );
        assert!(ApproachId::parse("A4").is_none());
    }

    #[test]
    fn trial_id_shape() {
        assert_eq!(
            trial_id(ApproachId::A2Structured, "replay-72b", "D01", 42),
            "A2:replay-72b:D01:42"
        );
    }

    #[test]
    fn approach_serde_uses_long_names() {
        let json = serde_json::to_string(&ApproachId::A1Direct).unwrap();
        assert_eq!(json, "\"A1_direct\"");
    }

    #[test]
    fn truncation_marks_cut_text() {
        assert_eq!(truncate_feedback("short", 10), "short");
        let long = "x".repeat(30);
        let cut = truncate_feedback(&long, 10);
        assert!(cut.starts_with("xxxxxxxxxx"));
        assert!(cut.ends_with("[truncated]"));
    }
}
