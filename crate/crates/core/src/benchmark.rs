//! The 20-task benchmark: loading, structural gates, ground-truth
//! validation, and the prompt leakage check.
//!
//! The task set is fixed by construction: 7 structural, 7 data-flow, and 6
//! composite tasks across two Java projects (9 against Commons Lang, 11
//! against WebGoat). `load_benchmark` refuses anything that deviates and
//! reports every violation it finds.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::joern::JoernClient;

/// Complexity tiers, increasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Structural,
    DataFlow,
    Composite,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Structural, Tier::DataFlow, Tier::Composite];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Structural => "structural",
            Tier::DataFlow => "data_flow",
            Tier::Composite => "composite",
        }
    }

    /// Task ids are prefixed by tier: S, D, or C.
    pub fn id_prefix(self) -> char {
        match self {
            Tier::Structural => 'S',
            Tier::DataFlow => 'D',
            Tier::Composite => 'C',
        }
    }

    /// Human-readable label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Tier::Structural => "Structural",
            Tier::DataFlow => "Data flow",
            Tier::Composite => "Composite",
        }
    }
}

/// The two target projects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Project {
    CommonsLang,
    Webgoat,
}

/// One benchmark unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub tier: Tier,
    pub project: Project,
    pub request: String,
    pub ground_truth_query: String,
}

/// The full validated task set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSet {
    pub tasks: Vec<Task>,
}

impl BenchmarkSet {
    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Tasks in id order, the deterministic iteration order for runs.
    pub fn tasks_sorted(&self) -> Vec<&Task> {
        let mut tasks: Vec<&Task> = self.tasks.iter().collect();
        tasks.sort_by(|a, b| a.id.cmp(&b.id));
        tasks
    }
}

pub const EXPECTED_TOTAL: usize = 20;
pub const EXPECTED_STRUCTURAL: usize = 7;
pub const EXPECTED_DATA_FLOW: usize = 7;
pub const EXPECTED_COMPOSITE: usize = 6;
pub const EXPECTED_COMMONS_LANG: usize = 9;
pub const EXPECTED_WEBGOAT: usize = 11;

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("cannot read benchmark file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("benchmark file {path} is not valid JSON: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("benchmark violates {} invariant(s):\n{}", .0.len(), .0.join("\n"))]
    Invalid(Vec<String>),
}

/// Loads the benchmark and verifies every structural invariant, reporting
/// all violations at once.
pub fn load_benchmark(path: &Path) -> Result<BenchmarkSet, BenchmarkError> {
    let data = fs::read_to_string(path).map_err(|source| BenchmarkError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let set: BenchmarkSet =
        serde_json::from_str(&data).map_err(|source| BenchmarkError::Format {
            path: path.to_path_buf(),
            source,
        })?;
    validate_set(&set).map_err(BenchmarkError::Invalid)?;
    Ok(set)
}

/// All invariant checks, usable on in-memory sets as well.
pub fn validate_set(set: &BenchmarkSet) -> Result<(), Vec<String>> {
    let mut problems = Vec::new();

    if set.tasks.len() != EXPECTED_TOTAL {
        problems.push(format!(
            "expected {EXPECTED_TOTAL} tasks, found {}",
            set.tasks.len()
        ));
    }

    let mut seen = std::collections::HashSet::new();
    for task in &set.tasks {
        if !seen.insert(task.id.as_str()) {
            problems.push(format!("duplicate task id {}", task.id));
        }
        if !id_well_formed(&task.id) {
            problems.push(format!(
                "task id '{}' does not match ^[SDC][0-9]{{2}}$",
                task.id
            ));
        } else if !task.id.starts_with(task.tier.id_prefix()) {
            problems.push(format!(
                "task {} has tier {} but ids for that tier start with '{}'",
                task.id,
                task.tier.as_str(),
                task.tier.id_prefix()
            ));
        }
        if task.request.trim().is_empty() {
            problems.push(format!("task {} has an empty request", task.id));
        }
        if task.ground_truth_query.trim().is_empty() {
            problems.push(format!("task {} has an empty ground-truth query", task.id));
        }
    }

    let count = |tier: Tier| set.tasks.iter().filter(|t| t.tier == tier).count();
    for (tier, expected) in [
        (Tier::Structural, EXPECTED_STRUCTURAL),
        (Tier::DataFlow, EXPECTED_DATA_FLOW),
        (Tier::Composite, EXPECTED_COMPOSITE),
    ] {
        let n = count(tier);
        if n != expected {
            problems.push(format!(
                "expected {expected} {} tasks, found {n}",
                tier.as_str()
            ));
        }
    }

    let commons = set
        .tasks
        .iter()
        .filter(|t| t.project == Project::CommonsLang)
        .count();
    let webgoat = set
        .tasks
        .iter()
        .filter(|t| t.project == Project::Webgoat)
        .count();
    if commons != EXPECTED_COMMONS_LANG || webgoat != EXPECTED_WEBGOAT {
        problems.push(format!(
            "expected a {EXPECTED_COMMONS_LANG}/{EXPECTED_WEBGOAT} commons_lang/webgoat split, found {commons}/{webgoat}"
        ));
    }

    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}

fn id_well_formed(id: &str) -> bool {
    let bytes = id.as_bytes();
    bytes.len() == 3
        && matches!(bytes[0], b'S' | b'D' | b'C')
        && bytes[1].is_ascii_digit()
        && bytes[2].is_ascii_digit()
}

// ---------------------------------------------------------------------------
// Ground-truth validation
// ---------------------------------------------------------------------------

/// Per-task result of running the ground-truth query.
#[derive(Debug, Clone, Serialize)]
pub struct TaskValidation {
    pub task_id: String,
    pub passed: bool,
    pub normalized_output: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Executes every ground-truth query; a task passes iff the query ran
/// without error and returned a non-empty result. Never aborts early, so a
/// dead backend still yields a complete report.
pub fn validate_ground_truth(set: &BenchmarkSet, joern: &JoernClient) -> Vec<TaskValidation> {
    set.tasks_sorted()
        .into_iter()
        .map(|task| {
            let result = joern.execute(&task.ground_truth_query);
            let (passed, error) = if !result.ok {
                (false, result.error_message.clone())
            } else if result.normalized_output.is_empty() {
                (false, Some("empty result".to_string()))
            } else {
                (true, None)
            };
            TaskValidation {
                task_id: task.id.clone(),
                passed,
                normalized_output: result.normalized_output,
                error,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Leakage check
// ---------------------------------------------------------------------------

/// What leaked and where.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeakFinding {
    pub task_id: String,
    pub prompt_name: String,
    pub kind: LeakKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakKind {
    Request,
    GroundTruthQuery,
}

/// Flags prompt files containing a task's request (case-folded, whitespace
/// collapsed) or its ground-truth query (whitespace collapsed). Generic
/// query syntax is allowed; only full task content counts.
pub fn leakage_check(set: &BenchmarkSet, prompt_files: &[(&str, String)]) -> Vec<LeakFinding> {
    let mut findings = Vec::new();
    for (name, content) in prompt_files {
        let folded = collapse_ws(&content.to_lowercase());
        let collapsed = collapse_ws(content);
        for task in &set.tasks {
            if folded.contains(&collapse_ws(&task.request.to_lowercase())) {
                findings.push(LeakFinding {
                    task_id: task.id.clone(),
                    prompt_name: name.to_string(),
                    kind: LeakKind::Request,
                });
            }
            if collapsed.contains(&collapse_ws(&task.ground_truth_query)) {
                findings.push(LeakFinding {
                    task_id: task.id.clone(),
                    prompt_name: name.to_string(),
                    kind: LeakKind::GroundTruthQuery,
                });
            }
        }
    }
    findings
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
