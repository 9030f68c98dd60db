//! Deterministic compiler from [`QuerySpec`] to a canonical CPGQL string.
//!
//! The mapper is the trusted half of the structured pipeline: the LLM only
//! fills the schema, and this module owns every byte of query syntax. One
//! template per query type, filter clauses emitted in a fixed field order,
//! identifiers regex-quoted — so equal specs always compile to byte-identical
//! text.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;
use thiserror::Error;

use crate::ir::{
    spec_fingerprint, EndpointKind, FlowEndpoint, OutputColumn, QuerySpec, QueryType,
    StructuralFilter,
};

/// A compiled query together with the fingerprint of the spec it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpgqlQuery {
    pub text: String,
    pub spec_fingerprint: String,
}

/// Internal defects. A valid spec never triggers these; they exist so a
/// template regression surfaces as a loud, typed failure instead of a bad
/// query reaching the backend.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapperDefect {
    #[error("template data is invalid: {0}")]
    BadTemplateData(String),
    #[error("template '{template}' references unknown placeholder '{placeholder}'")]
    UnknownPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("identifier contains unescapable control characters: {0:?}")]
    UnescapableIdentifier(String),
    #[error("spec violates an invariant the validator should have caught: {0}")]
    InvalidSpec(String),
}

/// One emission template: a skeleton with named `{placeholder}` holes.
#[derive(Debug, Clone, Deserialize)]
pub struct QueryTemplate {
    pub skeleton: String,
    pub placeholders: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct TemplateFile {
    version: u32,
    templates: BTreeMap<String, QueryTemplate>,
}

const TEMPLATE_DATA: &str = include_str!("../assets/templates_v1.toml");

/// Key for the tool-only reachability template.
const REACHABLE_BY: &str = "reachable_by";

fn template_file() -> &'static TemplateFile {
    static FILE: OnceLock<TemplateFile> = OnceLock::new();
    FILE.get_or_init(|| {
        let file: TemplateFile =
            toml::from_str(TEMPLATE_DATA).expect("shipped template data must parse");
        for (name, t) in &file.templates {
            for p in &t.placeholders {
                assert!(
                    t.skeleton.contains(&format!("{{{p}}}")),
                    "template '{name}' is missing declared placeholder '{p}'"
                );
            }
        }
        file
    })
}

/// The emission template for a query type.
pub fn template_for(query_type: QueryType) -> &'static QueryTemplate {
    template_file()
        .templates
        .get(query_type.as_str())
        .expect("every query type has a template")
}

/// Version tag of the shipped template data.
pub fn template_version() -> u32 {
    template_file().version
}

// ---------------------------------------------------------------------------
// Identifier escaping
// ---------------------------------------------------------------------------

/// Quotes a user-supplied identifier for embedding in a CPGQL name matcher.
///
/// Regex metacharacters are backslash-escaped and double quotes become an
/// escaped quote sequence, so the result matches exactly the literal name.
/// Identifiers that are already safe pass through unchanged.
pub fn escape_identifier(raw: &str) -> Result<String, MapperDefect> {
    if raw.chars().any(char::is_control) {
        return Err(MapperDefect::UnescapableIdentifier(raw.to_string()));
    }
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '.' | '*' | '+' | '?' | '[' | ']' | '(' | ')' | '|' | '^' | '$' | '{' | '}' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '"' => out.push_str("\\\""),
            _ => out.push(c),
        }
    }
    Ok(out)
}

/// Filter regexes are embedded as written; only the quote character needs
/// protection inside the matcher's string literal.
fn embed_regex(raw: &str) -> String {
    raw.replace('"', "\\\"")
}

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

/// Node context a filter clause applies to. Structural queries filter their
/// own node kind; composite queries filter the sink expression through its
/// enclosing method.
#[derive(Clone, Copy, PartialEq)]
enum FilterContext {
    Method,
    Call,
    Assignment,
    FlowSink,
}

/// Compiles a valid spec into exactly one canonical query.
///
/// Totality is a module contract: every spec that passed validation
/// compiles. The error type covers internal defects only.
pub fn compile(spec: &QuerySpec) -> Result<CpgqlQuery, MapperDefect> {
    let template = template_for(spec.query_type);
    let mut values: BTreeMap<&str, String> = BTreeMap::new();

    match spec.query_type {
        QueryType::MethodQuery | QueryType::CallQuery | QueryType::AssignmentQuery => {
            let ctx = match spec.query_type {
                QueryType::MethodQuery => FilterContext::Method,
                QueryType::CallQuery => FilterContext::Call,
                _ => FilterContext::Assignment,
            };
            let filter = spec.filter.as_ref().ok_or_else(|| {
                MapperDefect::InvalidSpec("structural query without filter".into())
            })?;
            values.insert("filter", filter_clauses(filter, ctx)?);
            values.insert("limit", limit_suffix(spec.limit));
            values.insert("projection", projection(&spec.output_columns));
        }
        QueryType::DataFlow | QueryType::Composite => {
            let source = spec
                .source
                .as_ref()
                .ok_or_else(|| MapperDefect::InvalidSpec("flow query without source".into()))?;
            let sink = spec
                .sink
                .as_ref()
                .ok_or_else(|| MapperDefect::InvalidSpec("flow query without sink".into()))?;
            let sink_filter = match spec.query_type {
                QueryType::Composite => {
                    let filter = spec.filter.as_ref().ok_or_else(|| {
                        MapperDefect::InvalidSpec("composite query without filter".into())
                    })?;
                    filter_clauses(filter, FilterContext::FlowSink)?
                }
                _ => String::new(),
            };
            values.insert("source", endpoint_traversal(source, Position::Source, "")?);
            values.insert(
                "sink",
                endpoint_traversal(sink, Position::Sink, &sink_filter)?,
            );
            values.insert("limit", limit_suffix(spec.limit));
        }
    }

    let text = fill(template, spec.query_type.as_str(), &values)?;
    Ok(CpgqlQuery {
        text,
        spec_fingerprint: spec_fingerprint(spec),
    })
}

/// Compiles the reachability variant used by the agent's `find_reachable_by`
/// tool: same endpoints, `reachableBy` instead of flow rendering, and a
/// column projection over the reached nodes.
pub fn compile_reachable_by(
    source: &FlowEndpoint,
    sink: &FlowEndpoint,
    columns: &[OutputColumn],
    limit: Option<u32>,
) -> Result<CpgqlQuery, MapperDefect> {
    let template = template_file()
        .templates
        .get(REACHABLE_BY)
        .expect("reachability template is shipped");
    let mut values: BTreeMap<&str, String> = BTreeMap::new();
    values.insert("source", endpoint_traversal(source, Position::Source, "")?);
    values.insert("sink", endpoint_traversal(sink, Position::Sink, "")?);
    values.insert("limit", limit_suffix(limit));
    values.insert("projection", projection(columns));
    let text = fill(template, REACHABLE_BY, &values)?;
    // Reachability queries are tool plumbing; fingerprint the equivalent
    // data-flow spec so provenance stays traceable.
    let spec = QuerySpec {
        query_type: QueryType::DataFlow,
        filter: None,
        source: Some(source.clone()),
        sink: Some(sink.clone()),
        output_columns: columns.to_vec(),
        limit,
    };
    Ok(CpgqlQuery {
        text,
        spec_fingerprint: spec_fingerprint(&spec),
    })
}

fn fill(
    template: &QueryTemplate,
    name: &str,
    values: &BTreeMap<&str, String>,
) -> Result<String, MapperDefect> {
    let mut text = template.skeleton.clone();
    for p in &template.placeholders {
        let value = values
            .get(p.as_str())
            .ok_or_else(|| MapperDefect::UnknownPlaceholder {
                template: name.to_string(),
                placeholder: p.clone(),
            })?;
        text = text.replace(&format!("{{{p}}}"), value);
    }
    if text.contains('{') || text.contains('}') {
        // Braces never occur in emitted CPGQL; a leftover means the skeleton
        // named a placeholder we did not fill.
        return Err(MapperDefect::UnknownPlaceholder {
            template: name.to_string(),
            placeholder: "unresolved".to_string(),
        });
    }
    Ok(text)
}

#[derive(Clone, Copy, PartialEq)]
enum Position {
    Source,
    Sink,
}

/// Renders a flow endpoint as a traversal. Sink calls take `.argument` (the
/// data flows *into* the call); source calls stand for the value the call
/// returns. Composite filters attach to the node-selection step, before any
/// `.argument` suffix.
fn endpoint_traversal(
    endpoint: &FlowEndpoint,
    position: Position,
    filter: &str,
) -> Result<String, MapperDefect> {
    let text = match endpoint.kind {
        EndpointKind::Parameter => {
            let method = endpoint.method.as_deref().ok_or_else(|| {
                MapperDefect::InvalidSpec("parameter endpoint without method".into())
            })?;
            format!(
                "cpg.method.name(\"{}\").parameter{filter}",
                escape_identifier(method)?
            )
        }
        EndpointKind::Call => {
            let name = endpoint
                .name
                .as_deref()
                .ok_or_else(|| MapperDefect::InvalidSpec("call endpoint without name".into()))?;
            let argument = match position {
                Position::Sink => ".argument",
                Position::Source => "",
            };
            format!(
                "cpg.call.name(\"{}\"){filter}{argument}",
                escape_identifier(name)?
            )
        }
        EndpointKind::Literal => {
            let value = endpoint.value.as_deref().ok_or_else(|| {
                MapperDefect::InvalidSpec("literal endpoint without value".into())
            })?;
            format!(
                "cpg.literal.code(\"{}\"){filter}",
                escape_identifier(value)?
            )
        }
    };
    Ok(text)
}

/// Emits filter clauses in the canonical field order: method_name, type_name,
/// modifier, annotation, target_identifier. Input JSON field order never
/// matters.
fn filter_clauses(filter: &StructuralFilter, ctx: FilterContext) -> Result<String, MapperDefect> {
    let mut out = String::new();
    if let Some(rx) = &filter.method_name {
        let rx = embed_regex(rx);
        out.push_str(&match ctx {
            FilterContext::Method => format!(".name(\"{rx}\")"),
            // A call's name is the callee; filtering calls by method name
            // selects by callee.
            FilterContext::Call => format!(".name(\"{rx}\")"),
            FilterContext::Assignment | FilterContext::FlowSink => {
                format!(".where(_.method.name(\"{rx}\"))")
            }
        });
    }
    if let Some(rx) = &filter.type_name {
        let rx = embed_regex(rx);
        out.push_str(&match ctx {
            FilterContext::Method => format!(".where(_.typeDecl.name(\"{rx}\"))"),
            _ => format!(".where(_.method.typeDecl.name(\"{rx}\"))"),
        });
    }
    if let Some(m) = &filter.modifier {
        let m = m.cpg_name();
        out.push_str(&match ctx {
            FilterContext::Method => format!(".where(_.modifier.modifierType(\"{m}\"))"),
            _ => format!(".where(_.method.modifier.modifierType(\"{m}\"))"),
        });
    }
    if let Some(a) = &filter.annotation {
        let a = escape_identifier(a)?;
        out.push_str(&match ctx {
            FilterContext::Method => format!(".where(_.annotation.name(\"{a}\"))"),
            _ => format!(".where(_.method.annotation.name(\"{a}\"))"),
        });
    }
    if let Some(id) = &filter.target_identifier {
        let id = escape_identifier(id)?;
        out.push_str(&match ctx {
            FilterContext::Assignment => format!(".where(_.target.isIdentifier.name(\"{id}\"))"),
            FilterContext::Call => format!(".where(_.argument.isIdentifier.name(\"{id}\"))"),
            FilterContext::Method | FilterContext::FlowSink => {
                format!(".where(_.ast.isIdentifier.name(\"{id}\"))")
            }
        });
    }
    Ok(out)
}

fn limit_suffix(limit: Option<u32>) -> String {
    match limit {
        Some(n) => format!(".take({n})"),
        None => String::new(),
    }
}

fn column_accessor(column: OutputColumn) -> &'static str {
    match column {
        OutputColumn::Name => "name",
        OutputColumn::FullName => "fullName",
        OutputColumn::Signature => "signature",
        OutputColumn::Code => "code",
        OutputColumn::LineNumber => "lineNumber",
        OutputColumn::ColumnNumber => "columnNumber",
        OutputColumn::Filename => "filename",
        OutputColumn::TypeFullName => "typeFullName",
        // The enclosing method's name, one hop away from the node itself.
        OutputColumn::MethodName => "method.name",
        OutputColumn::Order => "order",
    }
}

/// Builds the `.map(x => ...)` projection over the requested columns, in
/// declared order.
fn projection(columns: &[OutputColumn]) -> String {
    let accessors: Vec<String> = columns
        .iter()
        .map(|c| format!("x.{}", column_accessor(*c)))
        .collect();
    match accessors.len() {
        0 => ".l".to_string(),
        1 => format!(".map(x => {}).l", accessors[0]),
        _ => format!(".map(x => ({})).l", accessors.join(", ")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Modifier;

    fn method_spec(filter: StructuralFilter, columns: Vec<OutputColumn>) -> QuerySpec {
        QuerySpec {
            query_type: QueryType::MethodQuery,
            filter: Some(filter),
            source: None,
            sink: None,
            output_columns: columns,
            limit: None,
        }
    }

    #[test]
    fn identity_filter_compiles_to_plain_traversal_with_projection() {
        let spec = method_spec(
            StructuralFilter {
                method_name: Some(".*".into()),
                ..Default::default()
            },
            vec![OutputColumn::Name],
        );
        let q = compile(&spec).unwrap();
        assert_eq!(q.text, "cpg.method.name(\".*\").map(x => x.name).l");
    }

    #[test]
    fn flow_query_emits_two_definitions_and_path_rendering() {
        let spec = QuerySpec {
            query_type: QueryType::DataFlow,
            filter: None,
            source: Some(FlowEndpoint::parameter("processOrder")),
            sink: Some(FlowEndpoint::call("execute")),
            output_columns: vec![OutputColumn::Code, OutputColumn::LineNumber],
            limit: None,
        };
        let q = compile(&spec).unwrap();
        assert_eq!(
            q.text,
            "def flowSource = cpg.method.name(\"processOrder\").parameter; \
             def flowSink = cpg.call.name(\"execute\").argument; \
             flowSink.reachableByFlows(flowSource).p"
        );
    }

    #[test]
    fn every_query_type_has_a_template_and_compiles() {
        for qt in QueryType::ALL {
            let spec = match qt {
                QueryType::MethodQuery | QueryType::CallQuery | QueryType::AssignmentQuery => {
                    QuerySpec {
                        query_type: qt,
                        filter: Some(StructuralFilter {
                            method_name: Some("f.*".into()),
                            ..Default::default()
                        }),
                        source: None,
                        sink: None,
                        output_columns: vec![OutputColumn::Name],
                        limit: None,
                    }
                }
                QueryType::DataFlow | QueryType::Composite => QuerySpec {
                    query_type: qt,
                    filter: (qt == QueryType::Composite).then(|| StructuralFilter {
                        type_name: Some("Controller".into()),
                        ..Default::default()
                    }),
                    source: Some(FlowEndpoint::call("getParameter")),
                    sink: Some(FlowEndpoint::call("executeQuery")),
                    output_columns: vec![OutputColumn::Code],
                    limit: None,
                },
            };
            let q = compile(&spec).expect("minimal spec compiles");
            assert!(!q.text.is_empty());
            assert!(!q.text.contains('{'), "unfilled placeholder in {}", q.text);
        }
    }

    #[test]
    fn compile_is_deterministic() {
        let spec = method_spec(
            StructuralFilter {
                method_name: Some("get.*".into()),
                modifier: Some(Modifier::Public),
                ..Default::default()
            },
            vec![OutputColumn::Name, OutputColumn::Filename],
        );
        assert_eq!(compile(&spec).unwrap(), compile(&spec).unwrap());
    }

    #[test]
    fn filter_clause_order_is_fixed() {
        let spec = method_spec(
            StructuralFilter {
                target_identifier: Some("x".into()),
                annotation: Some("Test".into()),
                modifier: Some(Modifier::Static),
                type_name: Some("Util".into()),
                method_name: Some("m".into()),
            },
            vec![OutputColumn::Name],
        );
        let text = compile(&spec).unwrap().text;
        let order = [
            ".name(\"m\")",
            "typeDecl",
            "modifierType",
            "annotation",
            "isIdentifier",
        ];
        let mut last = 0;
        for needle in order {
            let pos = text[last..]
                .find(needle)
                .unwrap_or_else(|| panic!("{needle} in {text}"));
            last += pos;
        }
    }

    #[test]
    fn escape_identifier_cases() {
        assert_eq!(escape_identifier("processOrder").unwrap(), "processOrder");
        assert_eq!(escape_identifier("a.b$c").unwrap(), "a\\.b\\$c");
        assert_eq!(escape_identifier("\"").unwrap(), "\\\"");
        assert_eq!(escape_identifier("x[0]").unwrap(), "x\\[0\\]");
        assert!(escape_identifier("a\u{0}b").is_err());
    }

    #[test]
    fn limit_compiles_to_take_suffix() {
        let mut spec = method_spec(
            StructuralFilter {
                method_name: Some(".*".into()),
                ..Default::default()
            },
            vec![OutputColumn::Name],
        );
        spec.limit = Some(5);
        assert_eq!(
            compile(&spec).unwrap().text,
            "cpg.method.name(\".*\").take(5).map(x => x.name).l"
        );
    }

    #[test]
    fn reachable_by_variant_projects_columns() {
        let q = compile_reachable_by(
            &FlowEndpoint::parameter("login"),
            &FlowEndpoint::call("info"),
            &[OutputColumn::Code, OutputColumn::LineNumber],
            None,
        )
        .unwrap();
        assert_eq!(
            q.text,
            "def flowSource = cpg.method.name(\"login\").parameter; \
             def flowSink = cpg.call.name(\"info\").argument; \
             flowSink.reachableBy(flowSource).map(x => (x.code, x.lineNumber)).l"
        );
    }

    #[test]
    fn template_data_is_well_formed() {
        assert_eq!(template_version(), 1);
        for qt in QueryType::ALL {
            let t = template_for(qt);
            for p in &t.placeholders {
                assert!(t.skeleton.contains(&format!("{{{p}}}")));
            }
        }
    }
}
