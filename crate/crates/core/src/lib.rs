//! Three architectures for turning natural-language code-analysis requests
//! into results from a code property graph, plus the benchmark, metrics, and
//! reporting needed to evaluate them offline.
//!
//! The three pipelines share one spectrum of LLM involvement:
//!
//! - **A1 (direct)** — the model writes a CPGQL query string; the backend
//!   runs it, with execution errors fed back for up to three attempts.
//! - **A2 (structured)** — the model fills a typed JSON schema ([`ir`]); a
//!   deterministic compiler ([`mapper`]) owns all query syntax.
//! - **A3 (agentic)** — the model drives a tool loop over five analysis
//!   tools, with a ten-step budget.
//!
//! Everything downstream of the model is deterministic, and the model itself
//! can be replayed from recorded transcripts ([`llm`]), so entire evaluation
//! runs reproduce byte-for-byte.

pub mod benchmark;
pub mod harness;
pub mod ir;
pub mod joern;
pub mod llm;
pub mod mapper;
pub mod metrics;
pub mod pipelines;

pub use benchmark::{BenchmarkSet, Task, Tier};
pub use ir::{parse_spec, spec_fingerprint, QuerySpec, QueryType, ValidationError};
pub use joern::{BackendConfig, ExecutionResult, JoernClient};
pub use llm::{ChatMessage, CompletionUsage, LlmConfig, ToolCall};
pub use mapper::{compile, escape_identifier, CpgqlQuery};
pub use metrics::{compound_success, CellAggregate, MatchVerdict};
pub use pipelines::{
    run_agentic, run_direct, run_structured, ApproachId, TrialOutcome, TrialRecord, TrialStatus,
};
