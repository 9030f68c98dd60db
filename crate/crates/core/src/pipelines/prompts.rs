//! System prompt texts, shipped as in-repo data files.
//!
//! All three are sourced from public query-language documentation; none may
//! contain benchmark content, and the benchmark's leakage check runs against
//! exactly these texts.

/// Name/content pairs for every shipped prompt, in the form the leakage
/// check consumes.
pub fn shipped_prompts() -> Vec<(&'static str, String)> {
    vec![
        ("a1_syntax_reference", direct_system_prompt().to_string()),
        ("a2_schema_guide", structured_system_prompt()),
        ("a3_tool_guide", agentic_system_prompt().to_string()),
    ]
}

/// A1: CPGQL syntax reference plus worked documentation examples.
pub fn direct_system_prompt() -> &'static str {
    include_str!("../../assets/prompts/a1_syntax_reference.md")
}

/// A2: schema field guide with the machine-readable schema embedded.
pub fn structured_system_prompt() -> String {
    format!(
        "{}\n# Machine-readable schema\n\n```json\n{}```\n",
        include_str!("../../assets/prompts/a2_schema_guide.md"),
        schema_document(),
    )
}

/// A3: tool-loop preamble; tool schemas ride in the request's tool list.
pub fn agentic_system_prompt() -> &'static str {
    include_str!("../../assets/prompts/a3_tool_guide.md")
}

/// The published JSON schema for the intermediate representation.
pub fn schema_document() -> &'static str {
    include_str!("../../assets/queryspec.schema.json")
}
