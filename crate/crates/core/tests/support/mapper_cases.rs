//! The mapper conformance case table, shared by the conformance suite and
//! the acceptance gate. Each case pairs a JSON document with a golden file
//! named `<name>.cpgql` under `tests/goldens/mapper/`.

pub struct Case {
    pub name: &'static str,
    pub document: &'static str,
}

pub const CASES: &[Case] = &[
    // Structural: method queries.
    Case {
        name: "method_identity_single_column",
        document: r#"{"query_type": "method_query", "filter": {"method_name": ".*"}, "output_columns": ["name"]}"#,
    },
    Case {
        name: "method_by_type_and_modifier",
        document: r#"{"query_type": "method_query", "filter": {"type_name": "StringUtils", "modifier": "public"}, "output_columns": ["name"]}"#,
    },
    Case {
        name: "method_by_annotation",
        document: r#"{"query_type": "method_query", "filter": {"annotation": "PostMapping"}, "output_columns": ["name", "filename"]}"#,
    },
    Case {
        name: "method_all_filter_fields",
        document: r#"{"query_type": "method_query", "filter": {"method_name": "handle.*", "type_name": "Controller", "modifier": "protected", "annotation": "Override", "target_identifier": "session"}, "output_columns": ["fullName"]}"#,
    },
    Case {
        name: "method_all_ten_columns",
        document: r#"{"query_type": "method_query", "filter": {"method_name": "parse.*"}, "output_columns": ["name", "fullName", "signature", "code", "lineNumber", "columnNumber", "filename", "typeFullName", "methodName", "order"]}"#,
    },
    Case {
        name: "method_with_limit",
        document: r#"{"query_type": "method_query", "filter": {"method_name": ".*"}, "output_columns": ["name"], "limit": 5}"#,
    },
    Case {
        name: "method_column_order_is_semantic",
        document: r#"{"query_type": "method_query", "filter": {"method_name": ".*"}, "output_columns": ["lineNumber", "name"]}"#,
    },
    // Structural: call queries.
    Case {
        name: "call_by_callee",
        document: r#"{"query_type": "call_query", "filter": {"method_name": "executeQuery"}, "output_columns": ["code", "lineNumber"]}"#,
    },
    Case {
        name: "call_in_type",
        document: r#"{"query_type": "call_query", "filter": {"type_name": "LoginService"}, "output_columns": ["code"]}"#,
    },
    Case {
        name: "call_with_argument_identifier",
        document: r#"{"query_type": "call_query", "filter": {"method_name": "println", "target_identifier": "secret"}, "output_columns": ["code", "methodName"]}"#,
    },
    Case {
        name: "call_with_modifier_and_limit",
        document: r#"{"query_type": "call_query", "filter": {"method_name": "exec.*", "modifier": "private"}, "output_columns": ["code"], "limit": 10}"#,
    },
    // Structural: assignment queries.
    Case {
        name: "assignment_by_target",
        document: r#"{"query_type": "assignment_query", "filter": {"target_identifier": "password"}, "output_columns": ["code", "lineNumber"]}"#,
    },
    Case {
        name: "assignment_in_method",
        document: r#"{"query_type": "assignment_query", "filter": {"method_name": "login", "target_identifier": "token"}, "output_columns": ["code"]}"#,
    },
    Case {
        name: "assignment_with_type_and_static",
        document: r#"{"query_type": "assignment_query", "filter": {"type_name": "Config", "modifier": "static"}, "output_columns": ["code", "filename"]}"#,
    },
    // Data-flow queries, all endpoint kinds in both positions.
    Case {
        name: "flow_parameter_to_call",
        document: r#"{
            "query_type": "data_flow",
            "source": {"kind": "parameter", "method": "processOrder"},
            "sink": {"kind": "call", "name": "execute"},
            "output_columns": ["code", "lineNumber"]
        }"#,
    },
    Case {
        name: "flow_call_to_call",
        document: r#"{"query_type": "data_flow", "source": {"kind": "call", "name": "getParameter"}, "sink": {"kind": "call", "name": "executeQuery"}, "output_columns": ["code"]}"#,
    },
    Case {
        name: "flow_literal_source",
        document: r#"{"query_type": "data_flow", "source": {"kind": "literal", "value": "admin"}, "sink": {"kind": "call", "name": "equals"}, "output_columns": ["code"]}"#,
    },
    Case {
        name: "flow_parameter_sink",
        document: r#"{"query_type": "data_flow", "source": {"kind": "call", "name": "readLine"}, "sink": {"kind": "parameter", "method": "runQuery"}, "output_columns": ["code"]}"#,
    },
    Case {
        name: "flow_literal_sink",
        document: r#"{"query_type": "data_flow", "source": {"kind": "parameter", "method": "format"}, "sink": {"kind": "literal", "value": "0"}, "output_columns": ["code"]}"#,
    },
    Case {
        name: "flow_with_limit",
        document: r#"{"query_type": "data_flow", "source": {"kind": "parameter", "method": "attack"}, "sink": {"kind": "call", "name": "executeUpdate"}, "output_columns": ["code"], "limit": 3}"#,
    },
    // Composite queries: every filter field against the sink context.
    Case {
        name: "composite_type_filter",
        document: r#"{"query_type": "composite", "filter": {"type_name": "SqlInjectionLesson"}, "source": {"kind": "call", "name": "getParameter"}, "sink": {"kind": "call", "name": "executeQuery"}, "output_columns": ["code"]}"#,
    },
    Case {
        name: "composite_annotation_filter",
        document: r#"{"query_type": "composite", "filter": {"annotation": "PostMapping"}, "source": {"kind": "parameter", "method": "attack"}, "sink": {"kind": "call", "name": "executeUpdate"}, "output_columns": ["code", "lineNumber"]}"#,
    },
    Case {
        name: "composite_modifier_filter",
        document: r#"{"query_type": "composite", "filter": {"modifier": "public"}, "source": {"kind": "call", "name": "getBytes"}, "sink": {"kind": "call", "name": "arraycopy"}, "output_columns": ["code"]}"#,
    },
    Case {
        name: "composite_method_name_filter",
        document: r#"{"query_type": "composite", "filter": {"method_name": "join.*"}, "source": {"kind": "parameter", "method": "join"}, "sink": {"kind": "call", "name": "append"}, "output_columns": ["code", "lineNumber"]}"#,
    },
    Case {
        name: "composite_identifier_filter_with_limit",
        document: r#"{"query_type": "composite", "filter": {"target_identifier": "query"}, "source": {"kind": "call", "name": "getParameter"}, "sink": {"kind": "call", "name": "execute"}, "output_columns": ["code"], "limit": 2}"#,
    },
    Case {
        name: "composite_parameter_sink_filtered",
        document: r#"{"query_type": "composite", "filter": {"type_name": "OrderService"}, "source": {"kind": "call", "name": "getParameter"}, "sink": {"kind": "parameter", "method": "processOrder"}, "output_columns": ["code"]}"#,
    },
    // Escaping edges.
    Case {
        name: "escape_dots_and_dollars",
        document: r#"{"query_type": "data_flow", "source": {"kind": "parameter", "method": "a.b$c"}, "sink": {"kind": "call", "name": "run"}, "output_columns": ["code"]}"#,
    },
    Case {
        name: "escape_quote_in_literal",
        document: r#"{"query_type": "data_flow", "source": {"kind": "literal", "value": "\"webgoat\""}, "sink": {"kind": "call", "name": "equals"}, "output_columns": ["code"]}"#,
    },
    Case {
        name: "escape_regex_metacharacters",
        document: r#"{"query_type": "data_flow", "source": {"kind": "parameter", "method": "get[0]+x"}, "sink": {"kind": "call", "name": "put(y)|z"}, "output_columns": ["code"]}"#,
    },
    Case {
        name: "escape_annotation_identifier",
        document: r#"{"query_type": "method_query", "filter": {"annotation": "javax.inject.Named"}, "output_columns": ["name"]}"#,
    },
];
