//! Trial judging and metric rollups.
//!
//! Result match is the primary metric: the normalized output of the
//! generated query (or the agent's final answer) against the normalized
//! output of the ground-truth query, tolerating element order. Relaxed match
//! compares the sets of quoted strings. Exact match is byte equality of the
//! query text and only exists for the two query-producing pipelines.
//!
//! Trials that failed at the infrastructure level never enter a rate
//! denominator; they are counted separately.

pub mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::benchmark::{BenchmarkSet, Task, Tier};
use crate::joern::JoernClient;
use crate::pipelines::{ApproachId, TrialRecord, TrialStatus};

/// Per-trial comparison verdict.
///
/// `result_match` implies `relaxed_match`: agreement under the stricter
/// comparison counts as agreement under the weaker one by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MatchVerdict {
    pub result_match: bool,
    pub relaxed_match: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_match: Option<bool>,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("ground-truth query for task {task_id} failed: {message}")]
    GroundTruthFailed { task_id: String, message: String },
    #[error("{0}")]
    Domain(String),
}

/// Judges one trial against its task's ground truth.
///
/// The ground-truth query must execute; if it cannot, the benchmark is
/// broken and that is an error, not a trial failure.
pub fn judge_trial(
    record: &TrialRecord,
    task: &Task,
    joern: &JoernClient,
) -> Result<MatchVerdict, MetricsError> {
    let gt = joern.execute(&task.ground_truth_query);
    if !gt.ok {
        return Err(MetricsError::GroundTruthFailed {
            task_id: task.id.clone(),
            message: gt.error_message.unwrap_or_default(),
        });
    }

    let result_match = match &record.outcome.final_output {
        Some(out) => outputs_equivalent(out, &gt.normalized_output),
        None => false,
    };
    let relaxed_raw = match &record.outcome.final_output {
        Some(out) => quoted_strings(out) == quoted_strings(&gt.normalized_output),
        None => false,
    };
    let exact_match = match record.approach {
        ApproachId::A3Agentic => None,
        _ => Some(
            record.outcome.generated_query.as_deref() == Some(task.ground_truth_query.as_str()),
        ),
    };

    Ok(MatchVerdict {
        result_match,
        // Set comparison is strictly weaker; semantic agreement implies it.
        relaxed_match: relaxed_raw || result_match,
        exact_match,
    })
}

/// Order-insensitive output comparison: when both sides render as a
/// collection (`List(...)`-style), their top-level elements are compared as
/// multisets; otherwise the normalized strings must be equal.
pub fn outputs_equivalent(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    match (collection_elements(a), collection_elements(b)) {
        (Some(mut xs), Some(mut ys)) => {
            xs.sort();
            ys.sort();
            xs == ys
        }
        _ => false,
    }
}

/// Splits a `Container(e1, e2, ...)` rendering into its top-level elements.
/// The container name is not compared; `List` and `Iterator` render the same
/// results.
fn collection_elements(s: &str) -> Option<Vec<String>> {
    let open = s.find('(')?;
    let name = &s[..open];
    if name.is_empty()
        || !name.chars().next().is_some_and(|c| c.is_ascii_uppercase())
        || !name.chars().all(|c| c.is_ascii_alphanumeric())
        || !s.ends_with(')')
    {
        return None;
    }
    let inner = &s[open + 1..s.len() - 1];
    if inner.trim().is_empty() {
        return Some(Vec::new());
    }
    let mut elements = Vec::new();
    let mut depth = 0i32;
    let mut in_string = false;
    let mut escaped = false;
    let mut current = String::new();
    for c in inner.chars() {
        if in_string {
            current.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                current.push(c);
            }
            '(' | '[' => {
                depth += 1;
                current.push(c);
            }
            ')' | ']' => {
                depth -= 1;
                current.push(c);
            }
            ',' if depth == 0 => {
                elements.push(current.trim().to_string());
                current = String::new();
            }
            _ => current.push(c),
        }
    }
    if in_string || depth != 0 {
        return None;
    }
    elements.push(current.trim().to_string());
    Some(elements)
}

/// Extracts double-quoted segments, honoring backslash escapes, and returns
/// them as a set.
pub fn quoted_strings(s: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '"' {
            continue;
        }
        let mut segment = String::new();
        let mut escaped = false;
        for c in chars.by_ref() {
            if escaped {
                segment.push(c);
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                break;
            } else {
                segment.push(c);
            }
        }
        out.insert(segment);
    }
    out
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Five-number summary (inclusive quartile method: for an odd-length half
/// the median datum is part of both halves).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Computes the five-number summary over unsorted values.
pub fn five_number_summary(values: &[u64]) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    let mut sorted: Vec<u64> = values.to_vec();
    sorted.sort_unstable();
    let median = median_of(&sorted);
    let n = sorted.len();
    let (lower, upper) = if n == 1 {
        (&sorted[..], &sorted[..])
    } else if n % 2 == 0 {
        (&sorted[..n / 2], &sorted[n / 2..])
    } else {
        // Inclusive method: the median datum belongs to both halves.
        (&sorted[..=n / 2], &sorted[n / 2..])
    };
    Some(FiveNumber {
        min: sorted[0] as f64,
        q1: median_of(lower),
        median,
        q3: median_of(upper),
        max: sorted[n - 1] as f64,
    })
}

fn median_of(sorted: &[u64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// Percentage rounded to one decimal, half away from zero.
pub fn percentage(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        return 0.0;
    }
    round1(numerator as f64 / denominator as f64 * 100.0)
}

pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Per model×approach rollup.
#[derive(Debug, Clone, Serialize)]
pub struct CellAggregate {
    pub model_id: String,
    pub approach: ApproachId,
    /// Trials entering the denominators; infrastructure failures excluded.
    pub trials: usize,
    pub infrastructure_failures: usize,
    pub result_match_rate: f64,
    pub exec_success_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_match_rate: Option<f64>,
    pub mean_attempts: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_steps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token_stats: Option<FiveNumber>,
}

/// One row of the per-tier result-match table.
#[derive(Debug, Clone, Serialize)]
pub struct TierRow {
    pub model_id: String,
    pub approach: ApproachId,
    pub tier: Tier,
    pub matched: usize,
    pub trials: usize,
    pub rate: f64,
}

/// Cells plus per-tier rows, both deterministically ordered.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AggregateReport {
    pub cells: Vec<CellAggregate>,
    pub tiers: Vec<TierRow>,
}

/// Execution success per the per-approach definitions: the direct pipeline's
/// query ran, the structured pipeline's JSON validated *and* its single
/// execution succeeded, the agent loop ended with a final answer. All three
/// coincide with trial success in the outcome encoding.
pub fn exec_success(record: &TrialRecord) -> bool {
    record.outcome.status == TrialStatus::Success
}

/// Rolls trial records and verdicts up into cells and tier rows.
///
/// `verdicts` is keyed by trial id. Records without a verdict count as
/// non-matching; infrastructure failures are excluded from every denominator
/// and surfaced in `infrastructure_failures`.
pub fn aggregate(
    records: &[TrialRecord],
    verdicts: &HashMap<String, MatchVerdict>,
    benchmark: &BenchmarkSet,
) -> AggregateReport {
    let mut groups: BTreeMap<(String, ApproachId), Vec<&TrialRecord>> = BTreeMap::new();
    for record in records {
        groups
            .entry((record.model_id.clone(), record.approach))
            .or_default()
            .push(record);
    }

    let mut cells = Vec::new();
    let mut tiers = Vec::new();
    for ((model_id, approach), group) in groups {
        let (included, infra): (Vec<_>, Vec<_>) = group
            .into_iter()
            .partition(|r| r.outcome.status != TrialStatus::FailInfrastructure);

        let verdict_of = |r: &TrialRecord| {
            verdicts
                .get(&r.trial_id())
                .copied()
                .unwrap_or(MatchVerdict {
                    result_match: false,
                    relaxed_match: false,
                    exact_match: None,
                })
        };

        let matches = included
            .iter()
            .filter(|r| verdict_of(r).result_match)
            .count();
        let execs = included.iter().filter(|r| exec_success(r)).count();
        let exact_match_rate = match approach {
            ApproachId::A3Agentic => None,
            _ => {
                let exact = included
                    .iter()
                    .filter(|r| verdict_of(r).exact_match.unwrap_or(false))
                    .count();
                Some(percentage(exact, included.len()))
            }
        };
        let mean_attempts = mean(included.iter().map(|r| f64::from(r.outcome.attempts)));
        let mean_steps = match approach {
            ApproachId::A3Agentic => Some(mean(
                included
                    .iter()
                    .map(|r| f64::from(r.outcome.steps.unwrap_or(0))),
            )),
            _ => None,
        };
        let tokens: Vec<u64> = included.iter().map(|r| r.usage.total()).collect();

        cells.push(CellAggregate {
            model_id: model_id.clone(),
            approach,
            trials: included.len(),
            infrastructure_failures: infra.len(),
            result_match_rate: percentage(matches, included.len()),
            exec_success_rate: percentage(execs, included.len()),
            exact_match_rate,
            mean_attempts,
            mean_steps,
            token_stats: five_number_summary(&tokens),
        });

        for tier in Tier::ALL {
            let in_tier: Vec<_> = included
                .iter()
                .filter(|r| benchmark.task(&r.task_id).is_some_and(|t| t.tier == tier))
                .collect();
            let matched = in_tier
                .iter()
                .filter(|r| verdict_of(r).result_match)
                .count();
            tiers.push(TierRow {
                model_id: model_id.clone(),
                approach,
                tier,
                matched,
                trials: in_tier.len(),
                rate: percentage(matched, in_tier.len()),
            });
        }
    }

    AggregateReport { cells, tiers }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

// ---------------------------------------------------------------------------
// Coverage analysis
// ---------------------------------------------------------------------------

/// How many repetitions of one task an approach solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub matched: u32,
    pub reps: u32,
}

impl Tally {
    /// Table glyph: solved in all reps, in some, or in none.
    pub fn glyph(&self) -> &'static str {
        if self.reps == 0 || self.matched == 0 {
            "—"
        } else if self.matched == self.reps {
            "✓"
        } else {
            "•"
        }
    }
}

/// Relation between two approaches' solved sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SetRelation {
    Equal,
    StrictSubset,
    StrictSuperset,
    Incomparable,
}

impl SetRelation {
    pub fn as_str(self) -> &'static str {
        match self {
            SetRelation::Equal => "equal",
            SetRelation::StrictSubset => "strict subset",
            SetRelation::StrictSuperset => "strict superset",
            SetRelation::Incomparable => "incomparable",
        }
    }

    fn of(left: &BTreeSet<String>, right: &BTreeSet<String>) -> Self {
        if left == right {
            SetRelation::Equal
        } else if left.is_subset(right) {
            SetRelation::StrictSubset
        } else if right.is_subset(left) {
            SetRelation::StrictSuperset
        } else {
            SetRelation::Incomparable
        }
    }
}

/// `left`'s solved set stands in `relation` to `right`'s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoverageRelation {
    pub left: ApproachId,
    pub right: ApproachId,
    pub relation: SetRelation,
}

/// Per-task tally row.
#[derive(Debug, Clone, Serialize)]
pub struct TaskTally {
    pub task_id: String,
    pub per_approach: BTreeMap<ApproachId, Tally>,
}

/// Solved-set comparison for one model.
#[derive(Debug, Clone, Serialize)]
pub struct ModelCoverage {
    pub model_id: String,
    pub approaches: Vec<ApproachId>,
    pub task_tallies: Vec<TaskTally>,
    pub solved: BTreeMap<ApproachId, BTreeSet<String>>,
    pub relations: Vec<CoverageRelation>,
}

/// Coverage rollup across all models present in the records.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CoverageReport {
    pub models: Vec<ModelCoverage>,
}

/// For each approach, the set of tasks solved at least once, with pairwise
/// subset relations and the per-task repetition tally. Infrastructure
/// failures do not count as repetitions.
pub fn coverage_analysis(
    records: &[TrialRecord],
    verdicts: &HashMap<String, MatchVerdict>,
) -> CoverageReport {
    let mut per_model: BTreeMap<String, Vec<&TrialRecord>> = BTreeMap::new();
    for record in records {
        if record.outcome.status != TrialStatus::FailInfrastructure {
            per_model
                .entry(record.model_id.clone())
                .or_default()
                .push(record);
        }
    }

    let mut models = Vec::new();
    for (model_id, group) in per_model {
        let mut tallies: BTreeMap<String, BTreeMap<ApproachId, Tally>> = BTreeMap::new();
        let mut approaches: BTreeSet<ApproachId> = BTreeSet::new();
        for record in group {
            approaches.insert(record.approach);
            let matched = verdicts
                .get(&record.trial_id())
                .map(|v| v.result_match)
                .unwrap_or(false);
            let tally = tallies
                .entry(record.task_id.clone())
                .or_default()
                .entry(record.approach)
                .or_insert(Tally {
                    matched: 0,
                    reps: 0,
                });
            tally.reps += 1;
            if matched {
                tally.matched += 1;
            }
        }

        let mut solved: BTreeMap<ApproachId, BTreeSet<String>> = BTreeMap::new();
        for approach in &approaches {
            let set: BTreeSet<String> = tallies
                .iter()
                .filter(|(_, per)| per.get(approach).is_some_and(|t| t.matched > 0))
                .map(|(task, _)| task.clone())
                .collect();
            solved.insert(*approach, set);
        }

        let approaches: Vec<ApproachId> = approaches.into_iter().collect();
        let mut relations = Vec::new();
        for &left in &approaches {
            for &right in &approaches {
                if left != right {
                    relations.push(CoverageRelation {
                        left,
                        right,
                        relation: SetRelation::of(&solved[&left], &solved[&right]),
                    });
                }
            }
        }

        models.push(ModelCoverage {
            model_id,
            approaches,
            task_tallies: tallies
                .into_iter()
                .map(|(task_id, per_approach)| TaskTally {
                    task_id,
                    per_approach,
                })
                .collect(),
            solved,
            relations,
        });
    }

    CoverageReport { models }
}

// ---------------------------------------------------------------------------
// Compounding arithmetic
// ---------------------------------------------------------------------------

/// End-to-end success probability of a chain of `steps` independent steps at
/// `per_step_accuracy` each: `p^steps`. Fractional step counts model
/// observed averages.
pub fn compound_success(per_step_accuracy: f64, steps: f64) -> Result<f64, MetricsError> {
    if !per_step_accuracy.is_finite() || !(0.0..=1.0).contains(&per_step_accuracy) {
        return Err(MetricsError::Domain(format!(
            "per-step accuracy must be within [0, 1], got {per_step_accuracy}"
        )));
    }
    if !steps.is_finite() || steps < 0.0 {
        return Err(MetricsError::Domain(format!(
            "steps must be non-negative, got {steps}"
        )));
    }
    Ok(per_step_accuracy.powf(steps))
}
