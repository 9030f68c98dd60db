//! Structured generation: the model fills the schema, the mapper writes the
//! query.
//!
//! Only parse/validation failures are retried. The first valid spec is
//! compiled and executed exactly once, and that execution's outcome is the
//! trial's outcome — an erroring query here is `fail_execution`, never a
//! retry. This asymmetry against the direct pipeline is intentional and
//! preserved exactly.

use super::{
    prompts, truncate_feedback, ApproachId, PipelineOptions, TrialBuilder, TrialContext,
    TrialOutcome, TrialRecord, TrialStatus, MAX_ATTEMPTS,
};
use crate::ir::{format_errors, parse_spec};
use crate::joern::JoernClient;
use crate::llm::{ChatClient, ChatMessage};
use crate::mapper;

pub fn run_structured_with(
    ctx: TrialContext<'_>,
    client: &mut dyn ChatClient,
    joern: &JoernClient,
    opts: &PipelineOptions,
) -> TrialRecord {
    let mut trial = TrialBuilder::new(
        ApproachId::A2Structured,
        ctx,
        prompts::structured_system_prompt(),
    );

    for attempt in 1..=MAX_ATTEMPTS {
        let message = match trial.complete(client, None) {
            Ok(m) => m,
            Err(e) => return trial.finish_infrastructure(&e),
        };

        let spec = match parse_spec(&message.content) {
            Ok(spec) => spec,
            Err(errors) => {
                if attempt < MAX_ATTEMPTS {
                    trial.push(ChatMessage::user(format!(
                        "The JSON specification was invalid.\nDocument:\n{}\nErrors:\n{}\nRespond with a corrected JSON object.",
                        truncate_feedback(message.content.trim(), opts.feedback_cap),
                        truncate_feedback(&format_errors(&errors), opts.feedback_cap),
                    )));
                }
                continue;
            }
        };

        let query = match mapper::compile(&spec) {
            Ok(q) => q,
            Err(defect) => {
                // Unreachable for a validated spec; a template regression is
                // an infrastructure-level defect, not a model failure.
                return trial.finish(TrialOutcome {
                    status: TrialStatus::FailInfrastructure,
                    final_output: None,
                    generated_query: None,
                    attempts: attempt,
                    steps: None,
                    tool_calls: None,
                    error: Some(defect.to_string()),
                });
            }
        };

        let result = joern.execute(&query.text);
        let outcome = if result.ok {
            TrialOutcome {
                status: TrialStatus::Success,
                final_output: Some(result.normalized_output),
                generated_query: Some(query.text),
                attempts: attempt,
                steps: None,
                tool_calls: None,
                error: None,
            }
        } else {
            TrialOutcome {
                status: TrialStatus::FailExecution,
                final_output: None,
                generated_query: Some(query.text),
                attempts: attempt,
                steps: None,
                tool_calls: None,
                error: result.error_message,
            }
        };
        return trial.finish(outcome);
    }

    trial.finish(TrialOutcome {
        status: TrialStatus::FailRetriesExhausted,
        final_output: None,
        generated_query: None,
        attempts: MAX_ATTEMPTS,
        steps: None,
        tool_calls: None,
        error: Some("no valid JSON specification within the attempt budget".to_string()),
    })
}
