//! Agentic generation: a tool loop with a ten-step budget.
//!
//! Each step is one completion. A turn with tool calls dispatches every call
//! and appends the observations; a turn with plain content is the final
//! answer; an empty turn with no calls is a failure. There is no retry —
//! the step budget is the only limit, and tool errors are observations the
//! agent may react to, not trial failures.

use super::{
    prompts, tools, ApproachId, PipelineOptions, TrialBuilder, TrialContext, TrialOutcome,
    TrialRecord, TrialStatus, MAX_STEPS,
};
use crate::joern::{normalize, JoernClient};
use crate::llm::ChatClient;
use crate::llm::ChatMessage;

pub fn run_agentic_with(
    ctx: TrialContext<'_>,
    client: &mut dyn ChatClient,
    joern: &JoernClient,
    _opts: &PipelineOptions,
) -> TrialRecord {
    let registry = tools::registry();
    let mut trial = TrialBuilder::new(
        ApproachId::A3Agentic,
        ctx,
        prompts::agentic_system_prompt().to_string(),
    );
    let mut tool_calls = 0u32;

    for step in 1..=MAX_STEPS {
        let message = match trial.complete(client, Some(&registry)) {
            Ok(m) => m,
            Err(e) => return trial.finish_infrastructure(&e),
        };

        if !message.tool_calls.is_empty() {
            for call in &message.tool_calls {
                let observation = tools::dispatch(call, joern);
                tool_calls += 1;
                trial.push(ChatMessage::tool_result(&call.id, observation));
            }
            continue;
        }

        let answer = message.content.trim();
        let outcome = if answer.is_empty() {
            // No tool call and no answer: the loop terminated without a
            // result.
            TrialOutcome {
                status: TrialStatus::FailExecution,
                final_output: None,
                generated_query: None,
                attempts: 0,
                steps: Some(step),
                tool_calls: Some(tool_calls),
                error: Some("agent returned an empty final answer".to_string()),
            }
        } else {
            TrialOutcome {
                status: TrialStatus::Success,
                final_output: Some(normalize(answer)),
                generated_query: None,
                attempts: 0,
                steps: Some(step),
                tool_calls: Some(tool_calls),
                error: None,
            }
        };
        return trial.finish(outcome);
    }

    trial.finish(TrialOutcome {
        status: TrialStatus::FailMaxSteps,
        final_output: None,
        generated_query: None,
        attempts: 0,
        steps: Some(MAX_STEPS),
        tool_calls: Some(tool_calls),
        error: Some("step budget exhausted without a final answer".to_string()),
    })
}
