//! The agent's tool registry and dispatcher.
//!
//! Four tools compile small parameterized queries through the deterministic
//! mapper; `run_custom_query` forwards raw text. Dispatch never fails the
//! trial: unknown tools, bad arguments, and execution errors all come back
//! as tool-result text for the agent to observe and react to.

use serde_json::Value;

use crate::ir::{
    endpoint_from_value, format_errors, Modifier, OutputColumn, QuerySpec, QueryType,
    StructuralFilter,
};
use crate::joern::JoernClient;
use crate::llm::{ToolCall, ToolSchema};
use crate::mapper;

pub const FIND_METHODS: &str = "find_methods";
pub const FIND_CALLS: &str = "find_calls";
pub const TRACE_DATA_FLOW: &str = "trace_data_flow";
pub const FIND_REACHABLE_BY: &str = "find_reachable_by";
pub const RUN_CUSTOM_QUERY: &str = "run_custom_query";

/// The five tool schemas, as handed to the model. Names are unique.
pub fn registry() -> Vec<ToolSchema> {
    let endpoint_schema = serde_json::json!({
        "type": "object",
        "description": "A flow endpoint. kind=parameter requires 'method'; kind=call requires 'name'; kind=literal requires 'value'.",
        "properties": {
            "kind": {"enum": ["parameter", "call", "literal"]},
            "method": {"type": "string"},
            "name": {"type": "string"},
            "value": {"type": "string"}
        },
        "required": ["kind"],
        "additionalProperties": false
    });
    vec![
        ToolSchema {
            name: FIND_METHODS.into(),
            description: "Find method declarations. Returns name and filename per match.".into(),
            parameters: serde_json::json!({
                "type": "object",
                "properties": {
                    "name": {"type": "string", "description": "Regex over method names."},
                    "type_name": {"type": "string", "description": "Regex over enclosing type names."},
                    "annotation": {"type": "string", "description": "Annotation name (identifier)."},
                    "modifier": {"enum": ["public", "private", "protected", "static"]}
                },
                "additionalProperties": false
            }),
        },
        ToolSchema {
            name: FIND_CALLS.into(),
            description: "Find call sites. Returns code and line number per match.".into(),
            parameters: serde_json::json!({
                "type": "object",
                "properties": {
                    "name": {"type": "string", "description": "Regex over callee names."},
                    "type_name": {"type": "string", "description": "Regex over enclosing type names."}
                },
                "additionalProperties": false
            }),
        },
        ToolSchema {
            name: TRACE_DATA_FLOW.into(),
            description: "Render the data-flow paths from a source endpoint to a sink endpoint."
                .into(),
            parameters: serde_json::json!({
                "type": "object",
                "properties": {"source": endpoint_schema, "sink": endpoint_schema},
                "required": ["source", "sink"],
                "additionalProperties": false
            }),
        },
        ToolSchema {
            name: FIND_REACHABLE_BY.into(),
            description:
                "List sink nodes reachable from a source endpoint, with code and line number."
                    .into(),
            parameters: serde_json::json!({
                "type": "object",
                "properties": {"source": endpoint_schema, "sink": endpoint_schema},
                "required": ["source", "sink"],
                "additionalProperties": false
            }),
        },
        ToolSchema {
            name: RUN_CUSTOM_QUERY.into(),
            description: "Run a raw CPGQL query when no other tool fits.".into(),
            parameters: serde_json::json!({
                "type": "object",
                "properties": {"query": {"type": "string"}},
                "required": ["query"],
                "additionalProperties": false
            }),
        },
    ]
}

/// Executes one tool call and renders the observation text.
pub fn dispatch(call: &ToolCall, joern: &JoernClient) -> String {
    let args: Value = match serde_json::from_str(&call.arguments) {
        Ok(v @ Value::Object(_)) => v,
        Ok(_) => return "error: bad arguments: expected a JSON object".to_string(),
        Err(e) => return format!("error: bad arguments: {e}"),
    };
    match call.tool_name.as_str() {
        FIND_METHODS => find_methods(&args, joern),
        FIND_CALLS => find_calls(&args, joern),
        TRACE_DATA_FLOW => flow_tool(&args, joern, FlowTool::Paths),
        FIND_REACHABLE_BY => flow_tool(&args, joern, FlowTool::Reachability),
        RUN_CUSTOM_QUERY => run_custom_query(&args, joern),
        other => format!("error: unknown tool '{other}'"),
    }
}

fn execute(joern: &JoernClient, query: &str) -> String {
    let result = joern.execute(query);
    if result.ok {
        result.normalized_output
    } else {
        format!(
            "error: {}: {}",
            result
                .error_kind
                .map(|k| k.to_string())
                .unwrap_or_else(|| "failure".into()),
            result.error_message.unwrap_or_default()
        )
    }
}

fn opt_str(args: &Value, field: &str) -> Result<Option<String>, String> {
    match args.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(format!("error: bad arguments: '{field}' must be a string")),
    }
}

fn find_methods(args: &Value, joern: &JoernClient) -> String {
    let filter = match method_filter(args) {
        Ok(f) => f,
        Err(e) => return e,
    };
    if filter.is_empty() {
        return "error: bad arguments: set at least one of name, type_name, annotation, modifier"
            .to_string();
    }
    let spec = QuerySpec {
        query_type: QueryType::MethodQuery,
        filter: Some(filter),
        source: None,
        sink: None,
        output_columns: vec![OutputColumn::Name, OutputColumn::Filename],
        limit: None,
    };
    compile_and_run(&spec, joern)
}

fn method_filter(args: &Value) -> Result<StructuralFilter, String> {
    let modifier = match opt_str(args, "modifier")? {
        None => None,
        Some(s) => match Modifier::parse(&s) {
            Some(m) => Some(m),
            None => return Err(format!("error: bad arguments: '{s}' is not a modifier")),
        },
    };
    Ok(StructuralFilter {
        method_name: opt_str(args, "name")?,
        type_name: opt_str(args, "type_name")?,
        modifier,
        annotation: opt_str(args, "annotation")?,
        target_identifier: None,
    })
}

fn find_calls(args: &Value, joern: &JoernClient) -> String {
    let name = match opt_str(args, "name") {
        Ok(v) => v,
        Err(e) => return e,
    };
    let type_name = match opt_str(args, "type_name") {
        Ok(v) => v,
        Err(e) => return e,
    };
    if name.is_none() && type_name.is_none() {
        return "error: bad arguments: set at least one of name, type_name".to_string();
    }
    let spec = QuerySpec {
        query_type: QueryType::CallQuery,
        filter: Some(StructuralFilter {
            method_name: name,
            type_name,
            ..Default::default()
        }),
        source: None,
        sink: None,
        output_columns: vec![OutputColumn::Code, OutputColumn::LineNumber],
        limit: None,
    };
    compile_and_run(&spec, joern)
}

enum FlowTool {
    Paths,
    Reachability,
}

fn flow_tool(args: &Value, joern: &JoernClient, variant: FlowTool) -> String {
    let source = match args.get("source") {
        Some(v) => match endpoint_from_value(v, "/source") {
            Ok(e) => e,
            Err(errors) => return format!("error: bad arguments:\n{}", format_errors(&errors)),
        },
        None => return "error: bad arguments: 'source' is required".to_string(),
    };
    let sink = match args.get("sink") {
        Some(v) => match endpoint_from_value(v, "/sink") {
            Ok(e) => e,
            Err(errors) => return format!("error: bad arguments:\n{}", format_errors(&errors)),
        },
        None => return "error: bad arguments: 'sink' is required".to_string(),
    };
    match variant {
        FlowTool::Paths => {
            let spec = QuerySpec {
                query_type: QueryType::DataFlow,
                filter: None,
                source: Some(source),
                sink: Some(sink),
                output_columns: vec![OutputColumn::Code],
                limit: None,
            };
            compile_and_run(&spec, joern)
        }
        FlowTool::Reachability => {
            match mapper::compile_reachable_by(
                &source,
                &sink,
                &[OutputColumn::Code, OutputColumn::LineNumber],
                None,
            ) {
                Ok(q) => execute(joern, &q.text),
                Err(defect) => format!("error: internal: {defect}"),
            }
        }
    }
}

fn run_custom_query(args: &Value, joern: &JoernClient) -> String {
    match args.get("query").and_then(Value::as_str) {
        Some(q) if !q.trim().is_empty() => execute(joern, q),
        _ => "error: bad arguments: 'query' is required".to_string(),
    }
}

fn compile_and_run(spec: &QuerySpec, joern: &JoernClient) -> String {
    match mapper::compile(spec) {
        Ok(q) => execute(joern, &q.text),
        Err(defect) => format!("error: internal: {defect}"),
    }
}
