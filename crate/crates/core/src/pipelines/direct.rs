//! Direct generation: the model writes CPGQL itself.

use super::{
    prompts, truncate_feedback, ApproachId, PipelineOptions, TrialBuilder, TrialContext,
    TrialOutcome, TrialRecord, TrialStatus, MAX_ATTEMPTS,
};
use crate::joern::JoernClient;
use crate::llm::{ChatClient, ChatMessage};

/// Pulls the query out of an assistant response.
///
/// Rule order: the first fenced code block's contents if any fence exists;
/// otherwise the first line starting with `cpg.` or `def `; otherwise the
/// whole trimmed text. `None` means nothing extractable was found.
pub fn extract_query(assistant_text: &str) -> Option<String> {
    if let Some(open) = assistant_text.find("```") {
        let after = &assistant_text[open + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let body = &after[body_start..];
        let block = match body.find("```") {
            Some(close) => &body[..close],
            None => body,
        };
        let block = block.trim();
        return (!block.is_empty()).then(|| block.to_string());
    }
    for line in assistant_text.lines() {
        let line = line.trim();
        if line.starts_with("cpg.") || line.starts_with("def ") {
            return Some(line.to_string());
        }
    }
    let whole = assistant_text.trim();
    (!whole.is_empty()).then(|| whole.to_string())
}

/// Generate → execute → feed errors back, up to three attempts.
pub fn run_direct_with(
    ctx: TrialContext<'_>,
    client: &mut dyn ChatClient,
    joern: &JoernClient,
    opts: &PipelineOptions,
) -> TrialRecord {
    let mut trial = TrialBuilder::new(
        ApproachId::A1Direct,
        ctx,
        prompts::direct_system_prompt().to_string(),
    );
    let mut last_query: Option<String> = None;

    for attempt in 1..=MAX_ATTEMPTS {
        let message = match trial.complete(client, None) {
            Ok(m) => m,
            Err(e) => return trial.finish_infrastructure(&e),
        };

        let failure = match extract_query(&message.content) {
            None => {
                // Empty extraction counts as an execution failure; the model
                // gets a synthetic error instead of a server error.
                (
                    String::new(),
                    "the response contained no extractable CPGQL query".to_string(),
                )
            }
            Some(query) => {
                last_query = Some(query.clone());
                let result = joern.execute(&query);
                if result.ok {
                    return trial.finish(TrialOutcome {
                        status: TrialStatus::Success,
                        final_output: Some(result.normalized_output),
                        generated_query: Some(query),
                        attempts: attempt,
                        steps: None,
                        tool_calls: None,
                        error: None,
                    });
                }
                (
                    query,
                    result
                        .error_message
                        .unwrap_or_else(|| "query failed".to_string()),
                )
            }
        };

        if attempt < MAX_ATTEMPTS {
            let (query, error) = failure;
            trial.push(ChatMessage::user(format!(
                "The query failed to execute.\nQuery:\n{}\nError:\n{}\nRespond with a corrected CPGQL query.",
                query,
                truncate_feedback(&error, opts.feedback_cap),
            )));
        }
    }

    trial.finish(TrialOutcome {
        status: TrialStatus::FailRetriesExhausted,
        final_output: None,
        generated_query: last_query,
        attempts: MAX_ATTEMPTS,
        steps: None,
        tool_calls: None,
        error: Some("all attempts failed to execute".to_string()),
    })
}
