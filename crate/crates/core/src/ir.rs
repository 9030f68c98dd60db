//! Typed intermediate representation for code-analysis queries.
//!
//! A [`QuerySpec`] captures the *intent* of an analysis request — what kind of
//! query, which entities, which output columns — without any CPGQL syntax.
//! LLM output is funneled through [`parse_spec`], which extracts the first
//! JSON object from arbitrary prose, validates it against the schema, and
//! reports *every* violation it finds so a retry prompt can be maximally
//! informative.
//!
//! The enumerations here are schema v1: five query types, ten output columns,
//! three flow endpoint kinds. They are data, not code; extension is additive.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

/// The five query categories the IR can express.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryType {
    MethodQuery,
    CallQuery,
    AssignmentQuery,
    DataFlow,
    Composite,
}

impl QueryType {
    pub const ALL: [QueryType; 5] = [
        QueryType::MethodQuery,
        QueryType::CallQuery,
        QueryType::AssignmentQuery,
        QueryType::DataFlow,
        QueryType::Composite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryType::MethodQuery => "method_query",
            QueryType::CallQuery => "call_query",
            QueryType::AssignmentQuery => "assignment_query",
            QueryType::DataFlow => "data_flow",
            QueryType::Composite => "composite",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|q| q.as_str() == s)
    }

    /// Flow queries carry source/sink endpoints; structural ones carry a filter.
    pub fn is_flow(self) -> bool {
        matches!(self, QueryType::DataFlow | QueryType::Composite)
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The ten node properties a query may project.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum OutputColumn {
    #[serde(rename = "name")]
    Name,
    #[serde(rename = "fullName")]
    FullName,
    #[serde(rename = "signature")]
    Signature,
    #[serde(rename = "code")]
    Code,
    #[serde(rename = "lineNumber")]
    LineNumber,
    #[serde(rename = "columnNumber")]
    ColumnNumber,
    #[serde(rename = "filename")]
    Filename,
    #[serde(rename = "typeFullName")]
    TypeFullName,
    #[serde(rename = "methodName")]
    MethodName,
    #[serde(rename = "order")]
    Order,
}

impl OutputColumn {
    pub const ALL: [OutputColumn; 10] = [
        OutputColumn::Name,
        OutputColumn::FullName,
        OutputColumn::Signature,
        OutputColumn::Code,
        OutputColumn::LineNumber,
        OutputColumn::ColumnNumber,
        OutputColumn::Filename,
        OutputColumn::TypeFullName,
        OutputColumn::MethodName,
        OutputColumn::Order,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutputColumn::Name => "name",
            OutputColumn::FullName => "fullName",
            OutputColumn::Signature => "signature",
            OutputColumn::Code => "code",
            OutputColumn::LineNumber => "lineNumber",
            OutputColumn::ColumnNumber => "columnNumber",
            OutputColumn::Filename => "filename",
            OutputColumn::TypeFullName => "typeFullName",
            OutputColumn::MethodName => "methodName",
            OutputColumn::Order => "order",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.as_str() == s)
    }
}

/// Where a data flow starts or ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    Parameter,
    Call,
    Literal,
}

impl EndpointKind {
    pub const ALL: [EndpointKind; 3] = [
        EndpointKind::Parameter,
        EndpointKind::Call,
        EndpointKind::Literal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EndpointKind::Parameter => "parameter",
            EndpointKind::Call => "call",
            EndpointKind::Literal => "literal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.as_str() == s)
    }
}

/// A flow endpoint: a method's parameters, a named call, or a code literal.
///
/// Which optional field must be present depends on `kind`; fields the kind
/// does not require must be absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowEndpoint {
    pub kind: EndpointKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl FlowEndpoint {
    pub fn parameter(method: impl Into<String>) -> Self {
        FlowEndpoint {
            kind: EndpointKind::Parameter,
            method: Some(method.into()),
            name: None,
            value: None,
        }
    }

    pub fn call(name: impl Into<String>) -> Self {
        FlowEndpoint {
            kind: EndpointKind::Call,
            method: None,
            name: Some(name.into()),
            value: None,
        }
    }

    pub fn literal(value: impl Into<String>) -> Self {
        FlowEndpoint {
            kind: EndpointKind::Literal,
            method: None,
            name: None,
            value: Some(value.into()),
        }
    }
}

/// Method visibility / storage modifiers a filter may require.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Modifier {
    Public,
    Private,
    Protected,
    Static,
}

impl Modifier {
    pub const ALL: [Modifier; 4] = [
        Modifier::Public,
        Modifier::Private,
        Modifier::Protected,
        Modifier::Static,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Modifier::Public => "public",
            Modifier::Private => "private",
            Modifier::Protected => "protected",
            Modifier::Static => "static",
        }
    }

    /// CPG modifier nodes carry upper-case modifier types.
    pub fn cpg_name(self) -> &'static str {
        match self {
            Modifier::Public => "PUBLIC",
            Modifier::Private => "PRIVATE",
            Modifier::Protected => "PROTECTED",
            Modifier::Static => "STATIC",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|m| m.as_str() == s)
    }
}

/// Structural constraints for method/call/assignment queries.
///
/// `method_name` and `type_name` are regexes in the documented dialect
/// (literal characters plus `.` `*` `+` `?` `[]` `()` `|` and anchors; no
/// backreferences). The remaining fields are plain identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct StructuralFilter {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub type_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modifier: Option<Modifier>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_identifier: Option<String>,
}

impl StructuralFilter {
    pub fn is_empty(&self) -> bool {
        self.method_name.is_none()
            && self.type_name.is_none()
            && self.modifier.is_none()
            && self.annotation.is_none()
            && self.target_identifier.is_none()
    }
}

/// A validated analysis query in intermediate form.
///
/// Serialization of this struct is canonical: fields appear in declaration
/// order, absent options are omitted, and `output_columns` keeps its declared
/// order. [`spec_fingerprint`] relies on this.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuerySpec {
    pub query_type: QueryType,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<StructuralFilter>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<FlowEndpoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sink: Option<FlowEndpoint>,
    pub output_columns: Vec<OutputColumn>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<u32>,
}

/// Why a document was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationReason {
    ParseError,
    UnknownField,
    MissingField,
    BadEnum,
    ConstraintViolation,
}

impl ValidationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidationReason::ParseError => "parse_error",
            ValidationReason::UnknownField => "unknown_field",
            ValidationReason::MissingField => "missing_field",
            ValidationReason::BadEnum => "bad_enum",
            ValidationReason::ConstraintViolation => "constraint_violation",
        }
    }
}

/// One schema violation, located by a JSON-pointer-style path.
///
/// `path` is empty only for `parse_error` (there is no document location to
/// point at when no JSON object could be extracted or parsed).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationError {
    pub path: String,
    pub reason: ValidationReason,
    pub message: String,
}

impl ValidationError {
    fn new(path: impl Into<String>, reason: ValidationReason, message: impl Into<String>) -> Self {
        ValidationError {
            path: path.into(),
            reason,
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}: {}", self.reason.as_str(), self.message)
        } else {
            write!(
                f,
                "{} at {}: {}",
                self.reason.as_str(),
                self.path,
                self.message
            )
        }
    }
}

/// Renders a violation list the way retry prompts and stderr expect it.
pub fn format_errors(errors: &[ValidationError]) -> String {
    errors
        .iter()
        .map(|e| format!("- {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

// ---------------------------------------------------------------------------
// JSON extraction
// ---------------------------------------------------------------------------

/// Extracts the first top-level JSON object from arbitrary text.
///
/// Fenced code blocks are preferred when present; otherwise the first
/// balanced `{...}` region is taken. Brace balancing respects JSON string
/// syntax, so braces inside string values do not count.
pub fn extract_json_object(text: &str) -> Option<&str> {
    for fence in fenced_blocks(text) {
        if let Some(obj) = first_balanced_object(fence) {
            return Some(obj);
        }
    }
    first_balanced_object(text)
}

fn fenced_blocks(text: &str) -> impl Iterator<Item = &str> {
    let mut rest = text;
    std::iter::from_fn(move || {
        let start = rest.find("```")?;
        let after = &rest[start + 3..];
        // Skip the info string (e.g. ```json) up to the first newline.
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let body = &after[body_start..];
        match body.find("```") {
            Some(end) => {
                let block = &body[..end];
                rest = &body[end + 3..];
                Some(block)
            }
            None => {
                // Unterminated fence: treat the remainder as the block.
                rest = "";
                Some(body)
            }
        }
    })
}

fn first_balanced_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return Some(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Parsing and validation
// ---------------------------------------------------------------------------

/// Parses and validates a candidate document.
///
/// The document may be raw JSON or JSON embedded in prose or code fences.
/// On failure the complete list of violations is returned, not just the
/// first one found.
pub fn parse_spec(document: &str) -> Result<QuerySpec, Vec<ValidationError>> {
    let Some(candidate) = extract_json_object(document) else {
        return Err(vec![ValidationError::new(
            "",
            ValidationReason::ParseError,
            "no JSON object found in the document",
        )]);
    };
    let value: serde_json::Value = serde_json::from_str(candidate).map_err(|e| {
        vec![ValidationError::new(
            "",
            ValidationReason::ParseError,
            format!("invalid JSON: {e}"),
        )]
    })?;
    spec_from_value(&value)
}

/// Validates an already-parsed JSON value against the schema.
pub fn spec_from_value(value: &serde_json::Value) -> Result<QuerySpec, Vec<ValidationError>> {
    let mut errors = Vec::new();
    let Some(root) = value.as_object() else {
        return Err(vec![ValidationError::new(
            "",
            ValidationReason::ParseError,
            "top-level JSON value is not an object",
        )]);
    };

    const ROOT_FIELDS: [&str; 6] = [
        "query_type",
        "filter",
        "source",
        "sink",
        "output_columns",
        "limit",
    ];
    for key in root.keys() {
        if !ROOT_FIELDS.contains(&key.as_str()) {
            errors.push(ValidationError::new(
                format!("/{key}"),
                ValidationReason::UnknownField,
                format!("unknown field '{key}'"),
            ));
        }
    }

    let query_type = parse_query_type(root.get("query_type"), &mut errors);
    let filter = parse_filter(root.get("filter"), &mut errors);
    let source = parse_endpoint(root.get("source"), "/source", &mut errors);
    let sink = parse_endpoint(root.get("sink"), "/sink", &mut errors);
    let output_columns = parse_columns(root.get("output_columns"), &mut errors);
    let limit = parse_limit(root.get("limit"), &mut errors);

    // Cross-field invariants only make sense once the query type is known.
    if let Some(qt) = query_type {
        if qt.is_flow() {
            if !root.contains_key("source") {
                errors.push(missing(
                    "/source",
                    format!("{qt} requires a source endpoint"),
                ));
            }
            if !root.contains_key("sink") {
                errors.push(missing("/sink", format!("{qt} requires a sink endpoint")));
            }
            match qt {
                QueryType::Composite => {
                    if !root.contains_key("filter") {
                        errors.push(missing("/filter", "composite requires a structural filter"));
                    }
                }
                QueryType::DataFlow => {
                    if root.contains_key("filter") {
                        errors.push(constraint(
                            "/filter",
                            "data_flow does not take a filter; use composite for joint constraints",
                        ));
                    }
                }
                _ => unreachable!(),
            }
        } else {
            if root.contains_key("source") {
                errors.push(constraint(
                    "/source",
                    format!("{qt} does not take a source endpoint"),
                ));
            }
            if root.contains_key("sink") {
                errors.push(constraint(
                    "/sink",
                    format!("{qt} does not take a sink endpoint"),
                ));
            }
            if !root.contains_key("filter") {
                errors.push(missing(
                    "/filter",
                    format!("{qt} requires a structural filter"),
                ));
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    Ok(QuerySpec {
        query_type: query_type.expect("validated"),
        filter,
        source,
        sink,
        output_columns: output_columns.expect("validated"),
        limit,
    })
}

fn missing(path: impl Into<String>, message: impl Into<String>) -> ValidationError {
    ValidationError::new(path, ValidationReason::MissingField, message)
}

fn constraint(path: impl Into<String>, message: impl Into<String>) -> ValidationError {
    ValidationError::new(path, ValidationReason::ConstraintViolation, message)
}

fn bad_enum(path: impl Into<String>, message: impl Into<String>) -> ValidationError {
    ValidationError::new(path, ValidationReason::BadEnum, message)
}

fn parse_query_type(
    value: Option<&serde_json::Value>,
    errors: &mut Vec<ValidationError>,
) -> Option<QueryType> {
    match value {
        None => {
            errors.push(missing("/query_type", "query_type is required"));
            None
        }
        Some(serde_json::Value::String(s)) => match QueryType::parse(s) {
            Some(qt) => Some(qt),
            None => {
                errors.push(bad_enum(
                    "/query_type",
                    format!(
                        "'{s}' is not a query type (expected one of: {})",
                        enum_list(&QueryType::ALL.map(|q| q.as_str()))
                    ),
                ));
                None
            }
        },
        Some(other) => {
            errors.push(bad_enum(
                "/query_type",
                format!("expected a string, got {}", kind_of(other)),
            ));
            None
        }
    }
}

fn parse_columns(
    value: Option<&serde_json::Value>,
    errors: &mut Vec<ValidationError>,
) -> Option<Vec<OutputColumn>> {
    let arr = match value {
        None => {
            errors.push(missing("/output_columns", "output_columns is required"));
            return None;
        }
        Some(serde_json::Value::Array(arr)) => arr,
        Some(other) => {
            errors.push(constraint(
                "/output_columns",
                format!("expected an array, got {}", kind_of(other)),
            ));
            return None;
        }
    };
    if arr.is_empty() {
        errors.push(constraint(
            "/output_columns",
            "output_columns must not be empty",
        ));
        return None;
    }
    let mut columns = Vec::with_capacity(arr.len());
    let mut seen = HashSet::new();
    let mut ok = true;
    for (i, item) in arr.iter().enumerate() {
        let path = format!("/output_columns/{i}");
        match item.as_str() {
            Some(s) => match OutputColumn::parse(s) {
                Some(col) => {
                    if !seen.insert(col) {
                        errors.push(constraint(&path, format!("duplicate column '{s}'")));
                        ok = false;
                    }
                    columns.push(col);
                }
                None => {
                    errors.push(bad_enum(
                        &path,
                        format!(
                            "'{s}' is not an output column (expected one of: {})",
                            enum_list(&OutputColumn::ALL.map(|c| c.as_str()))
                        ),
                    ));
                    ok = false;
                }
            },
            None => {
                errors.push(bad_enum(
                    &path,
                    format!("expected a string, got {}", kind_of(item)),
                ));
                ok = false;
            }
        }
    }
    ok.then_some(columns)
}

fn parse_limit(
    value: Option<&serde_json::Value>,
    errors: &mut Vec<ValidationError>,
) -> Option<u32> {
    match value {
        None => None,
        Some(v) => match v.as_u64() {
            Some(n) if n >= 1 && n <= u64::from(u32::MAX) => Some(n as u32),
            _ => {
                errors.push(constraint("/limit", "limit must be a positive integer"));
                None
            }
        },
    }
}

fn parse_filter(
    value: Option<&serde_json::Value>,
    errors: &mut Vec<ValidationError>,
) -> Option<StructuralFilter> {
    let obj = match value {
        None => return None,
        Some(serde_json::Value::Object(obj)) => obj,
        Some(other) => {
            errors.push(constraint(
                "/filter",
                format!("expected an object, got {}", kind_of(other)),
            ));
            return None;
        }
    };
    const FILTER_FIELDS: [&str; 5] = [
        "method_name",
        "type_name",
        "modifier",
        "annotation",
        "target_identifier",
    ];
    for key in obj.keys() {
        if !FILTER_FIELDS.contains(&key.as_str()) {
            errors.push(ValidationError::new(
                format!("/filter/{key}"),
                ValidationReason::UnknownField,
                format!("unknown field '{key}'"),
            ));
        }
    }
    let before = errors.len();
    let filter = StructuralFilter {
        method_name: regex_field(obj.get("method_name"), "/filter/method_name", errors),
        type_name: regex_field(obj.get("type_name"), "/filter/type_name", errors),
        modifier: modifier_field(obj.get("modifier"), errors),
        annotation: identifier_field(obj.get("annotation"), "/filter/annotation", errors),
        target_identifier: identifier_field(
            obj.get("target_identifier"),
            "/filter/target_identifier",
            errors,
        ),
    };
    if filter.is_empty() && errors.len() == before {
        errors.push(constraint("/filter", "filter must set at least one field"));
        return None;
    }
    Some(filter)
}

fn regex_field(
    value: Option<&serde_json::Value>,
    path: &str,
    errors: &mut Vec<ValidationError>,
) -> Option<String> {
    let s = string_field(value, path, errors)?;
    if s.chars().any(char::is_control) {
        errors.push(constraint(path, "control characters are not allowed"));
        return None;
    }
    if let Err(e) = regex::Regex::new(&s) {
        errors.push(constraint(
            path,
            format!("invalid regex: {}", first_line(&e.to_string())),
        ));
        return None;
    }
    Some(s)
}

fn identifier_field(
    value: Option<&serde_json::Value>,
    path: &str,
    errors: &mut Vec<ValidationError>,
) -> Option<String> {
    let s = string_field(value, path, errors)?;
    if s.is_empty() {
        errors.push(constraint(path, "identifier must not be empty"));
        return None;
    }
    if s.chars().any(char::is_control) {
        errors.push(constraint(path, "control characters are not allowed"));
        return None;
    }
    Some(s)
}

fn modifier_field(
    value: Option<&serde_json::Value>,
    errors: &mut Vec<ValidationError>,
) -> Option<Modifier> {
    let s = string_field(value, "/filter/modifier", errors)?;
    match Modifier::parse(&s) {
        Some(m) => Some(m),
        None => {
            errors.push(bad_enum(
                "/filter/modifier",
                format!(
                    "'{s}' is not a modifier (expected one of: {})",
                    enum_list(&Modifier::ALL.map(|m| m.as_str()))
                ),
            ));
            None
        }
    }
}

fn string_field(
    value: Option<&serde_json::Value>,
    path: &str,
    errors: &mut Vec<ValidationError>,
) -> Option<String> {
    match value {
        None => None,
        Some(serde_json::Value::String(s)) => Some(s.clone()),
        Some(other) => {
            errors.push(constraint(
                path,
                format!("expected a string, got {}", kind_of(other)),
            ));
            None
        }
    }
}

fn parse_endpoint(
    value: Option<&serde_json::Value>,
    path: &str,
    errors: &mut Vec<ValidationError>,
) -> Option<FlowEndpoint> {
    let obj = match value {
        None => return None,
        Some(serde_json::Value::Object(obj)) => obj,
        Some(other) => {
            errors.push(constraint(
                path,
                format!("expected an object, got {}", kind_of(other)),
            ));
            return None;
        }
    };
    const ENDPOINT_FIELDS: [&str; 4] = ["kind", "method", "name", "value"];
    for key in obj.keys() {
        if !ENDPOINT_FIELDS.contains(&key.as_str()) {
            errors.push(ValidationError::new(
                format!("{path}/{key}"),
                ValidationReason::UnknownField,
                format!("unknown field '{key}'"),
            ));
        }
    }
    let kind = match obj.get("kind") {
        None => {
            errors.push(missing(format!("{path}/kind"), "endpoint kind is required"));
            None
        }
        Some(serde_json::Value::String(s)) => match EndpointKind::parse(s) {
            Some(k) => Some(k),
            None => {
                errors.push(bad_enum(
                    format!("{path}/kind"),
                    format!(
                        "'{s}' is not an endpoint kind (expected one of: {})",
                        enum_list(&EndpointKind::ALL.map(|k| k.as_str()))
                    ),
                ));
                None
            }
        },
        Some(other) => {
            errors.push(bad_enum(
                format!("{path}/kind"),
                format!("expected a string, got {}", kind_of(other)),
            ));
            None
        }
    };
    let method = {
        let p = format!("{path}/method");
        identifier_field(obj.get("method"), &p, errors)
    };
    let name = {
        let p = format!("{path}/name");
        identifier_field(obj.get("name"), &p, errors)
    };
    let value_field = {
        let p = format!("{path}/value");
        identifier_field(obj.get("value"), &p, errors)
    };

    let kind = kind?;
    // The kind decides which single field must be present; the others must
    // be absent.
    let required = match kind {
        EndpointKind::Parameter => "method",
        EndpointKind::Call => "name",
        EndpointKind::Literal => "value",
    };
    if !obj.contains_key(required) {
        errors.push(missing(
            format!("{path}/{required}"),
            format!("kind={} requires '{required}'", kind.as_str()),
        ));
    }
    for field in ["method", "name", "value"] {
        if field != required && obj.contains_key(field) {
            errors.push(constraint(
                format!("{path}/{field}"),
                format!("kind={} does not take '{field}'", kind.as_str()),
            ));
        }
    }

    Some(FlowEndpoint {
        kind,
        method,
        name,
        value: value_field,
    })
}

/// Validates a standalone endpoint object. Tool argument parsing reuses the
/// schema's endpoint rules through this.
pub fn endpoint_from_value(
    value: &serde_json::Value,
    path: &str,
) -> Result<FlowEndpoint, Vec<ValidationError>> {
    let mut errors = Vec::new();
    let endpoint = parse_endpoint(Some(value), path, &mut errors);
    match endpoint {
        Some(e) if errors.is_empty() => Ok(e),
        _ => {
            if errors.is_empty() {
                errors.push(missing(path, "endpoint object is required"));
            }
            Err(errors)
        }
    }
}

fn kind_of(v: &serde_json::Value) -> &'static str {
    match v {
        serde_json::Value::Null => "null",
        serde_json::Value::Bool(_) => "a boolean",
        serde_json::Value::Number(_) => "a number",
        serde_json::Value::String(_) => "a string",
        serde_json::Value::Array(_) => "an array",
        serde_json::Value::Object(_) => "an object",
    }
}

fn enum_list(names: &[&str]) -> String {
    names.join(", ")
}

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap_or(s)
}

// ---------------------------------------------------------------------------
// Canonical serialization
// ---------------------------------------------------------------------------

/// Canonical serialization of a valid spec.
///
/// Fields are emitted in a fixed order, absent options are omitted, and
/// `output_columns` keeps its declared (semantic) order. Two specs are equal
/// iff their fingerprints are byte-equal.
pub fn spec_fingerprint(spec: &QuerySpec) -> String {
    serde_json::to_string(spec).expect("spec serialization is infallible")
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING_DOC: &str = r#"{
  "query_type": "data_flow",
  "source": {
    "kind": "parameter",
    "method": "processOrder"
  },
  "sink": {
    "kind": "call",
    "name": "execute"
  },
  "output_columns": ["code", "lineNumber"]
}"#;

    fn flow_spec() -> QuerySpec {
        QuerySpec {
            query_type: QueryType::DataFlow,
            filter: None,
            source: Some(FlowEndpoint::parameter("processOrder")),
            sink: Some(FlowEndpoint::call("execute")),
            output_columns: vec![OutputColumn::Code, OutputColumn::LineNumber],
            limit: None,
        }
    }

    #[test]
    fn parses_data_flow_example() {
        let spec = parse_spec(LISTING_DOC).unwrap();
        assert_eq!(spec, flow_spec());
    }

    #[test]
    fn parses_when_wrapped_in_prose_and_fences() {
        let doc =
            format!("Here is the query specification:\n```json\n{LISTING_DOC}\n```\nLet me know!");
        assert_eq!(parse_spec(&doc).unwrap(), flow_spec());

        let doc = format!("Sure — {LISTING_DOC} — that should do it.");
        assert_eq!(parse_spec(&doc).unwrap(), flow_spec());
    }

    #[test]
    fn prefers_fenced_block_over_earlier_raw_object() {
        let doc = format!("{{\"not\": \"the spec\"}}\n```json\n{LISTING_DOC}\n```");
        assert_eq!(parse_spec(&doc).unwrap(), flow_spec());
    }

    #[test]
    fn empty_object_reports_missing_required_fields() {
        let errs = parse_spec("{}").unwrap_err();
        assert!(errs
            .iter()
            .any(|e| e.path == "/query_type" && e.reason == ValidationReason::MissingField));
        assert!(errs
            .iter()
            .any(|e| e.path == "/output_columns" && e.reason == ValidationReason::MissingField));
    }

    #[test]
    fn no_json_at_all_is_a_parse_error() {
        let errs = parse_spec("I could not produce a specification, sorry.").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].reason, ValidationReason::ParseError);
        assert_eq!(errs[0].path, "");
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        let errs = parse_spec("{\"query_type\": }").unwrap_err();
        assert_eq!(errs[0].reason, ValidationReason::ParseError);
    }

    /// Each endpoint kind requires exactly one field; dropping it must produce
    /// a missing_field error at the right path. The case list below is the
    /// required-field invariant list itself.
    #[test]
    fn endpoint_required_field_cases() {
        let cases = [
            ("parameter", "/source/method"),
            ("call", "/source/name"),
            ("literal", "/source/value"),
        ];
        for (kind, want_path) in cases {
            let doc = format!(
                r#"{{"query_type": "data_flow",
                    "source": {{"kind": "{kind}"}},
                    "sink": {{"kind": "call", "name": "execute"}},
                    "output_columns": ["code"]}}"#
            );
            let errs = parse_spec(&doc).unwrap_err();
            assert!(
                errs.iter()
                    .any(|e| e.path == want_path && e.reason == ValidationReason::MissingField),
                "kind={kind}: got {errs:?}"
            );
        }
    }

    #[test]
    fn extra_endpoint_fields_are_rejected() {
        let doc = r#"{"query_type": "data_flow",
            "source": {"kind": "parameter", "method": "f", "name": "x"},
            "sink": {"kind": "call", "name": "g"},
            "output_columns": ["code"]}"#;
        let errs = parse_spec(doc).unwrap_err();
        assert!(
            errs.iter()
                .any(|e| e.path == "/source/name"
                    && e.reason == ValidationReason::ConstraintViolation)
        );
    }

    #[test]
    fn unknown_fields_are_errors_not_ignored() {
        let doc = r#"{"query_type": "method_query",
            "filter": {"method_name": ".*", "scope": "all"},
            "output_columns": ["name"],
            "comment": "hi"}"#;
        let errs = parse_spec(doc).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| e.path == "/comment" && e.reason == ValidationReason::UnknownField));
        assert!(errs
            .iter()
            .any(|e| e.path == "/filter/scope" && e.reason == ValidationReason::UnknownField));
    }

    #[test]
    fn structural_queries_reject_endpoints_and_require_filter() {
        let doc = r#"{"query_type": "call_query",
            "source": {"kind": "call", "name": "f"},
            "output_columns": ["name"]}"#;
        let errs = parse_spec(doc).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| e.path == "/source" && e.reason == ValidationReason::ConstraintViolation));
        assert!(errs
            .iter()
            .any(|e| e.path == "/filter" && e.reason == ValidationReason::MissingField));
    }

    #[test]
    fn data_flow_rejects_filter() {
        let doc = r#"{"query_type": "data_flow",
            "filter": {"method_name": ".*"},
            "source": {"kind": "call", "name": "f"},
            "sink": {"kind": "call", "name": "g"},
            "output_columns": ["code"]}"#;
        let errs = parse_spec(doc).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| e.path == "/filter" && e.reason == ValidationReason::ConstraintViolation));
    }

    #[test]
    fn composite_requires_filter_and_endpoints() {
        let doc = r#"{"query_type": "composite", "output_columns": ["code"]}"#;
        let errs = parse_spec(doc).unwrap_err();
        for path in ["/filter", "/source", "/sink"] {
            assert!(
                errs.iter()
                    .any(|e| e.path == path && e.reason == ValidationReason::MissingField),
                "{path}"
            );
        }
    }

    #[test]
    fn duplicate_columns_are_rejected() {
        let doc = r#"{"query_type": "method_query",
            "filter": {"method_name": ".*"},
            "output_columns": ["name", "code", "name"]}"#;
        let errs = parse_spec(doc).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| e.path == "/output_columns/2"
                && e.reason == ValidationReason::ConstraintViolation));
    }

    #[test]
    fn empty_filter_is_rejected() {
        let doc = r#"{"query_type": "method_query", "filter": {}, "output_columns": ["name"]}"#;
        let errs = parse_spec(doc).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| e.path == "/filter" && e.reason == ValidationReason::ConstraintViolation));
    }

    #[test]
    fn bad_enums_everywhere() {
        for (doc, path) in [
            (
                r#"{"query_type": "select", "output_columns": ["name"]}"#,
                "/query_type",
            ),
            (
                r#"{"query_type": "method_query", "filter": {"method_name": ".*"}, "output_columns": ["rowid"]}"#,
                "/output_columns/0",
            ),
            (
                r#"{"query_type": "method_query", "filter": {"modifier": "final"}, "output_columns": ["name"]}"#,
                "/filter/modifier",
            ),
            (
                r#"{"query_type": "data_flow", "source": {"kind": "field"}, "sink": {"kind": "call", "name": "g"}, "output_columns": ["code"]}"#,
                "/source/kind",
            ),
        ] {
            let errs = parse_spec(doc).unwrap_err();
            assert!(
                errs.iter()
                    .any(|e| e.path == path && e.reason == ValidationReason::BadEnum),
                "{path}: {errs:?}"
            );
        }
    }

    #[test]
    fn invalid_regex_and_bad_limit_are_constraint_violations() {
        let doc = r#"{"query_type": "method_query",
            "filter": {"method_name": "("},
            "output_columns": ["name"],
            "limit": 0}"#;
        let errs = parse_spec(doc).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "/filter/method_name"
            && e.reason == ValidationReason::ConstraintViolation));
        assert!(errs
            .iter()
            .any(|e| e.path == "/limit" && e.reason == ValidationReason::ConstraintViolation));
    }

    #[test]
    fn control_characters_in_identifiers_are_rejected() {
        let doc = "{\"query_type\": \"data_flow\", \"source\": {\"kind\": \"parameter\", \"method\": \"a\\u0007b\"}, \"sink\": {\"kind\": \"call\", \"name\": \"g\"}, \"output_columns\": [\"code\"]}";
        let errs = parse_spec(doc).unwrap_err();
        assert!(errs.iter().any(
            |e| e.path == "/source/method" && e.reason == ValidationReason::ConstraintViolation
        ));
    }

    #[test]
    fn fingerprint_is_field_order_independent() {
        let reordered = r#"{
            "output_columns": ["code", "lineNumber"],
            "sink": {"name": "execute", "kind": "call"},
            "source": {"method": "processOrder", "kind": "parameter"},
            "query_type": "data_flow"
        }"#;
        let a = parse_spec(LISTING_DOC).unwrap();
        let b = parse_spec(reordered).unwrap();
        assert_eq!(a, b);
        assert_eq!(spec_fingerprint(&a), spec_fingerprint(&b));
    }

    #[test]
    fn fingerprint_depends_on_column_order() {
        let a = flow_spec();
        let b = QuerySpec {
            output_columns: vec![OutputColumn::LineNumber, OutputColumn::Code],
            ..a.clone()
        };
        assert_ne!(spec_fingerprint(&a), spec_fingerprint(&b));
    }

    #[test]
    fn fingerprint_round_trips() {
        let spec = flow_spec();
        let parsed = parse_spec(&spec_fingerprint(&spec)).unwrap();
        assert_eq!(parsed, spec);
    }
}
