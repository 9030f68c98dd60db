//! Proptest strategies for valid query specs and for rendering them as
//! textually distinct JSON documents. Shared by the property suite and the
//! acceptance gate.

use proptest::prelude::*;

use nl2cpgql_core::ir::{
    FlowEndpoint, Modifier, OutputColumn, QuerySpec, QueryType, StructuralFilter,
};

pub fn identifier() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_]{0,9}"
}

/// Regexes drawn from the documented dialect; all compile.
pub fn regex_text() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(".*".to_string()),
        "[a-z]{1,8}",
        "[a-z]{1,6}".prop_map(|s| format!("{s}.*")),
        "[a-z]{1,6}".prop_map(|s| format!(".*{s}")),
        ("[a-z]{1,4}", "[a-z]{1,4}").prop_map(|(a, b)| format!("({a}|{b})")),
    ]
}

pub fn modifier() -> impl Strategy<Value = Modifier> {
    prop::sample::select(Modifier::ALL.to_vec())
}

pub fn endpoint() -> impl Strategy<Value = FlowEndpoint> {
    prop_oneof![
        identifier().prop_map(FlowEndpoint::parameter),
        identifier().prop_map(FlowEndpoint::call),
        identifier().prop_map(FlowEndpoint::literal),
    ]
}

/// A filter with at least one field set.
pub fn filter() -> impl Strategy<Value = StructuralFilter> {
    (
        prop::option::of(regex_text()),
        prop::option::of(regex_text()),
        prop::option::of(modifier()),
        prop::option::of(identifier()),
        prop::option::of(identifier()),
    )
        .prop_map(
            |(method_name, type_name, modifier, annotation, target_identifier)| StructuralFilter {
                method_name,
                type_name,
                modifier,
                annotation,
                target_identifier,
            },
        )
        .prop_filter_map("filter must be non-empty", |f| {
            if f.is_empty() {
                None
            } else {
                Some(f)
            }
        })
}

pub fn columns() -> impl Strategy<Value = Vec<OutputColumn>> {
    prop::sample::subsequence(OutputColumn::ALL.to_vec(), 1..=10).prop_shuffle()
}

pub fn spec() -> impl Strategy<Value = QuerySpec> {
    let structural = (
        prop::sample::select(vec![
            QueryType::MethodQuery,
            QueryType::CallQuery,
            QueryType::AssignmentQuery,
        ]),
        filter(),
        columns(),
        prop::option::of(1u32..100),
    )
        .prop_map(|(query_type, filter, output_columns, limit)| QuerySpec {
            query_type,
            filter: Some(filter),
            source: None,
            sink: None,
            output_columns,
            limit,
        });
    let data_flow = (
        endpoint(),
        endpoint(),
        columns(),
        prop::option::of(1u32..100),
    )
        .prop_map(|(source, sink, output_columns, limit)| QuerySpec {
            query_type: QueryType::DataFlow,
            filter: None,
            source: Some(source),
            sink: Some(sink),
            output_columns,
            limit,
        });
    let composite = (
        filter(),
        endpoint(),
        endpoint(),
        columns(),
        prop::option::of(1u32..100),
    )
        .prop_map(|(filter, source, sink, output_columns, limit)| QuerySpec {
            query_type: QueryType::Composite,
            filter: Some(filter),
            source: Some(source),
            sink: Some(sink),
            output_columns,
            limit,
        });
    prop_oneof![structural, data_flow, composite]
}

/// Renders a JSON value with controllable object-key order and whitespace.
/// Array order is always preserved; it is semantic.
pub fn render(value: &serde_json::Value, reverse_keys: bool, spacious: bool) -> String {
    match value {
        serde_json::Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            if reverse_keys {
                keys.reverse();
            }
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| {
                    let v = render(&map[k], reverse_keys, spacious);
                    if spacious {
                        format!("{k:?} :  {v}")
                    } else {
                        format!("{k:?}:{v}")
                    }
                })
                .collect();
            if spacious {
                format!("{{\n  {}\n}}", body.join(",\n  "))
            } else {
                format!("{{{}}}", body.join(","))
            }
        }
        serde_json::Value::Array(items) => {
            let body: Vec<String> = items
                .iter()
                .map(|v| render(v, reverse_keys, spacious))
                .collect();
            if spacious {
                format!("[ {} ]", body.join(" , "))
            } else {
                format!("[{}]", body.join(","))
            }
        }
        other => other.to_string(),
    }
}
