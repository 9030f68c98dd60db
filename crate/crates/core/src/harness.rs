//! Batch trial execution with resumable JSONL output.
//!
//! A run plan is the cross product approaches × models × tasks × seeds,
//! executed in that deterministic order. Each finished trial appends one
//! JSON line; reruns skip trials whose key (approach, model, task, seed) is
//! already present, so an interrupted run resumes where it stopped.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmark::{load_benchmark, BenchmarkError, BenchmarkSet};
use crate::joern::{BackendConfig, JoernClient, JoernError};
use crate::llm::{LlmBackendKind, LlmConfig, LlmError};
use crate::pipelines::{
    run_approach_with, trial_id, ApproachId, PipelineError, PipelineOptions, TrialContext,
    TrialRecord, TrialStatus,
};

/// Default seeds: three repetitions per task.
pub const DEFAULT_SEEDS: [i64; 3] = [42, 43, 44];

/// Everything one batch run needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunPlan {
    pub approaches: Vec<ApproachId>,
    pub model_ids: Vec<String>,
    pub seeds: Vec<i64>,
    pub benchmark_path: PathBuf,
    pub llm: LlmTemplate,
    pub joern: BackendConfig,
    pub output_path: PathBuf,
    /// Concurrent trials; only allowed with replay + fixture backends, where
    /// results are deterministic by construction.
    #[serde(default)]
    pub parallel: bool,
}

/// Model-independent part of the LLM config; the plan instantiates it per
/// model and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlmTemplate {
    pub backend: LlmBackendKind,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay_path: Option<PathBuf>,
}

impl LlmTemplate {
    pub fn replay(path: impl Into<PathBuf>) -> Self {
        LlmTemplate {
            backend: LlmBackendKind::Replay,
            temperature: 0.0,
            endpoint: None,
            replay_path: Some(path.into()),
        }
    }

    fn instantiate(&self, model_id: &str, seed: i64) -> LlmConfig {
        LlmConfig {
            model_id: model_id.to_string(),
            temperature: self.temperature,
            seed,
            backend: self.backend,
            endpoint: self.endpoint.clone(),
            replay_path: self.replay_path.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run plan: {0}")]
    BadPlan(String),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error(transparent)]
    Joern(#[from] JoernError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("cannot use {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("records file {path} line {line} is not a trial record: {message}")]
    BadRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl From<PipelineError> for HarnessError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Llm(e) => HarnessError::Llm(e),
            PipelineError::Joern(e) => HarnessError::Joern(e),
        }
    }
}

/// What a run did.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub executed: usize,
    pub skipped: usize,
    pub infrastructure_failures: usize,
}

impl RunPlan {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.approaches.is_empty() {
            return Err(HarnessError::BadPlan("no approaches selected".into()));
        }
        if self.model_ids.is_empty() {
            return Err(HarnessError::BadPlan("no models selected".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::BadPlan("no seeds selected".into()));
        }
        if self.parallel
            && !(self.llm.backend == LlmBackendKind::Replay
                && self.joern.mode == crate::joern::BackendMode::Fixture)
        {
            return Err(HarnessError::BadPlan(
                "parallel execution is only allowed with replay + fixture backends".into(),
            ));
        }
        Ok(())
    }
}

/// Executes the plan, appending one JSONL record per finished trial.
///
/// Trials already present in the output file are skipped. Infrastructure
/// failures are recorded in-line and the run continues.
pub fn execute_plan(plan: &RunPlan) -> Result<RunSummary, HarnessError> {
    plan.validate()?;
    let benchmark = load_benchmark(&plan.benchmark_path)?;
    let joern = JoernClient::connect(&plan.joern)?;
    let existing = existing_keys(&plan.output_path)?;

    // Deterministic order: approach, model, task id, seed.
    let mut pending = Vec::new();
    let mut skipped = 0usize;
    for &approach in &plan.approaches {
        for model_id in &plan.model_ids {
            for task in benchmark.tasks_sorted() {
                for &seed in &plan.seeds {
                    if existing.contains(&trial_id(approach, model_id, &task.id, seed)) {
                        skipped += 1;
                    } else {
                        pending.push((approach, model_id.clone(), task.id.clone(), seed));
                    }
                }
            }
        }
    }

    let opts = PipelineOptions::default();
    let run_one = |(approach, model_id, task_id, seed): &TrialKey| {
        let task = benchmark
            .task(task_id)
            .expect("task came from this benchmark");
        let llm = plan.llm.instantiate(model_id, *seed);
        let ctx = TrialContext {
            task,
            model_id,
            seed: *seed,
        };
        run_approach_with(*approach, ctx, &llm, &joern, &opts)
    };

    let records: Vec<TrialRecord> = if plan.parallel {
        run_parallel(&pending, &run_one)?
    } else {
        let mut records = Vec::with_capacity(pending.len());
        for key in &pending {
            records.push(run_one(key)?);
        }
        records
    };

    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&plan.output_path)
        .map_err(|source| HarnessError::Io {
            path: plan.output_path.clone(),
            source,
        })?;
    let mut infrastructure_failures = 0usize;
    for record in &records {
        if record.outcome.status == TrialStatus::FailInfrastructure {
            infrastructure_failures += 1;
        }
        let line = serde_json::to_string(record).expect("records serialize");
        writeln!(file, "{line}").map_err(|source| HarnessError::Io {
            path: plan.output_path.clone(),
            source,
        })?;
    }
    file.flush().map_err(|source| HarnessError::Io {
        path: plan.output_path.clone(),
        source,
    })?;

    Ok(RunSummary {
        executed: records.len(),
        skipped,
        infrastructure_failures,
    })
}

/// One pending trial: approach, model, task, seed.
type TrialKey = (ApproachId, String, String, i64);

/// Trials are independent under replay + fixture, so plain threads suffice;
/// results are reassembled in plan order before writing.
fn run_parallel(
    pending: &[TrialKey],
    run_one: &(dyn Fn(&TrialKey) -> Result<TrialRecord, PipelineError> + Sync),
) -> Result<Vec<TrialRecord>, HarnessError> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(4);
    let results: Vec<Result<TrialRecord, PipelineError>> = std::thread::scope(|scope| {
        let chunks: Vec<&[TrialKey]> = pending
            .chunks(pending.len().div_ceil(workers).max(1))
            .collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| scope.spawn(move || chunk.iter().map(run_one).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    results
        .into_iter()
        .map(|r| r.map_err(HarnessError::from))
        .collect()
}

fn existing_keys(path: &Path) -> Result<HashSet<String>, HarnessError> {
    if !path.exists() {
        return Ok(HashSet::new());
    }
    Ok(read_records(path)?
        .iter()
        .map(TrialRecord::trial_id)
        .collect())
}

/// Reads a JSONL records file; blank lines are tolerated.
pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>, HarnessError> {
    let file = fs::File::open(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrialRecord =
            serde_json::from_str(&line).map_err(|e| HarnessError::BadRecord {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

/// Loads and judges records against their benchmark, producing the full
/// report document.
pub fn judge_and_report(
    records: &[TrialRecord],
    benchmark: &BenchmarkSet,
    joern: &JoernClient,
) -> Result<crate::metrics::report::ReportDocument, crate::metrics::MetricsError> {
    use std::collections::HashMap;
    let mut verdicts = HashMap::new();
    for record in records {
        let Some(task) = benchmark.task(&record.task_id) else {
            continue;
        };
        let verdict = crate::metrics::judge_trial(record, task, joern)?;
        verdicts.insert(record.trial_id(), verdict);
    }
    Ok(crate::metrics::report::ReportDocument {
        aggregates: crate::metrics::aggregate(records, &verdicts, benchmark),
        coverage: crate::metrics::coverage_analysis(records, &verdicts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_validation() {
        let plan = RunPlan {
            approaches: vec![],
            model_ids: vec!["m".into()],
            seeds: vec![42],
            benchmark_path: "b.json".into(),
            llm: LlmTemplate::replay("r.json"),
            joern: BackendConfig::fixture("f.json"),
            output_path: "out.jsonl".into(),
            parallel: false,
        };
        assert!(matches!(plan.validate(), Err(HarnessError::BadPlan(_))));

        let mut live_parallel = plan.clone();
        live_parallel.approaches = vec![ApproachId::A1Direct];
        live_parallel.parallel = true;
        live_parallel.joern = BackendConfig::live("http://localhost:8080");
        assert!(matches!(
            live_parallel.validate(),
            Err(HarnessError::BadPlan(_))
        ));

        let mut ok = plan;
        ok.approaches = vec![ApproachId::A1Direct];
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn default_seeds_are_the_three_repetitions() {
        assert_eq!(DEFAULT_SEEDS, [42, 43, 44]);
    }
}
