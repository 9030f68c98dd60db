//! Command-line entry point wiring the whole toolkit: compile specs,
//! validate the benchmark, run evaluation trials, and render reports.
//!
//! Exit codes: 0 success, 1 domain failure (invalid spec, failed gate, bad
//! records), 2 I/O or usage problems.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nl2cpgql_core::benchmark::{
    leakage_check, load_benchmark, validate_ground_truth, BenchmarkError,
};
use nl2cpgql_core::harness::{
    execute_plan, judge_and_report, read_records, HarnessError, LlmTemplate, RunPlan, DEFAULT_SEEDS,
};
use nl2cpgql_core::ir::{format_errors, parse_spec};
use nl2cpgql_core::joern::{BackendConfig, JoernClient};
use nl2cpgql_core::llm::LlmBackendKind;
use nl2cpgql_core::mapper::compile;
use nl2cpgql_core::metrics::report::{emit_report, ReportFormat};
use nl2cpgql_core::pipelines::{prompts, ApproachId};

#[derive(Parser)]
#[command(
    name = "nl2cpgql",
    version,
    about = "Translate code-analysis requests into CPGQL and evaluate the pipelines that do it"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a query-specification JSON file to a CPGQL query on stdout.
    Compile {
        /// Path to the specification document.
        spec: PathBuf,
    },
    /// Check the benchmark: structural gates, ground-truth execution, and
    /// prompt leakage.
    Validate {
        #[arg(long)]
        benchmark: PathBuf,
        #[command(flatten)]
        joern: JoernArgs,
        /// Additional prompt files to leak-check (the shipped prompts are
        /// always checked).
        #[arg(long = "prompt")]
        prompts: Vec<PathBuf>,
    },
    /// Run trials for the selected approaches, models, and seeds, appending
    /// JSONL records. Already-recorded trials are skipped.
    Run {
        #[arg(long)]
        benchmark: PathBuf,
        /// Comma-separated subset of A1,A2,A3. Defaults to all three.
        #[arg(long, value_delimiter = ',')]
        approaches: Vec<String>,
        /// Comma-separated model identifiers.
        #[arg(long, value_delimiter = ',', required = true)]
        models: Vec<String>,
        /// Comma-separated seeds; one repetition per seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<i64>,
        /// Replay script path (selects the replay backend).
        #[arg(long, conflicts_with = "llm_endpoint")]
        replay: Option<PathBuf>,
        /// Chat-completions endpoint (selects the http backend; the API
        /// token is read from NL2CPGQL_API_TOKEN).
        #[arg(long)]
        llm_endpoint: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        temperature: f64,
        #[command(flatten)]
        joern: JoernArgs,
        /// Output records file (JSONL, one trial per line).
        #[arg(long)]
        out: PathBuf,
        /// Run trials concurrently (replay + fixture backends only).
        #[arg(long)]
        parallel: bool,
    },
    /// Judge recorded trials against the benchmark and emit the report.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        benchmark: PathBuf,
        #[command(flatten)]
        joern: JoernArgs,
        /// markdown, csv, or json.
        #[arg(long, default_value = "markdown")]
        format: String,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct JoernArgs {
    /// Recorded fixture file (offline backend).
    #[arg(long, conflicts_with = "joern_endpoint")]
    fixture: Option<PathBuf>,
    /// Live query-server endpoint.
    #[arg(long)]
    joern_endpoint: Option<String>,
    /// Per-query timeout in seconds (live backend).
    #[arg(long, default_value_t = 30)]
    joern_timeout_secs: u64,
}

impl JoernArgs {
    fn config(&self) -> Result<BackendConfig, CliError> {
        let mut config = match (&self.fixture, &self.joern_endpoint) {
            (Some(path), None) => BackendConfig::fixture(path),
            (None, Some(url)) => BackendConfig::live(url),
            _ => {
                return Err(CliError::Usage(
                    "exactly one of --fixture or --joern-endpoint is required".into(),
                ))
            }
        };
        config.timeout_millis = self.joern_timeout_secs * 1000;
        Ok(config)
    }
}

enum CliError {
    /// The inputs were readable but wrong: exit 1.
    Domain(String),
    /// Files or flags could not be used at all: exit 2.
    Usage(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Io { .. } => CliError::Usage(e.to_string()),
            HarnessError::Benchmark(BenchmarkError::Io { .. }) => CliError::Usage(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Domain(message)) => {
            eprintln!("{message}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(message)) => {
            eprintln!("{message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Compile { spec } => cmd_compile(&spec),
        Command::Validate {
            benchmark,
            joern,
            prompts,
        } => cmd_validate(&benchmark, &joern, &prompts),
        Command::Run {
            benchmark,
            approaches,
            models,
            seeds,
            replay,
            llm_endpoint,
            temperature,
            joern,
            out,
            parallel,
        } => {
            let approaches = parse_approaches(&approaches)?;
            let seeds = if seeds.is_empty() {
                DEFAULT_SEEDS.to_vec()
            } else {
                seeds
            };
            let llm = match (replay, llm_endpoint) {
                (Some(path), None) => LlmTemplate {
                    backend: LlmBackendKind::Replay,
                    temperature,
                    endpoint: None,
                    replay_path: Some(path),
                },
                (None, Some(endpoint)) => LlmTemplate {
                    backend: LlmBackendKind::Http,
                    temperature,
                    endpoint: Some(endpoint),
                    replay_path: None,
                },
                _ => {
                    return Err(CliError::Usage(
                        "exactly one of --replay or --llm-endpoint is required".into(),
                    ))
                }
            };
            let plan = RunPlan {
                approaches,
                model_ids: models,
                seeds,
                benchmark_path: benchmark,
                llm,
                joern: joern.config()?,
                output_path: out,
                parallel,
            };
            let summary = execute_plan(&plan)?;
            println!(
                "executed {} trial(s), skipped {} already recorded, {} infrastructure failure(s)",
                summary.executed, summary.skipped, summary.infrastructure_failures
            );
            Ok(())
        }
        Command::Report {
            records,
            benchmark,
            joern,
            format,
            out,
        } => cmd_report(&records, &benchmark, &joern, &format, out.as_deref()),
    }
}

fn cmd_compile(spec_path: &std::path::Path) -> Result<(), CliError> {
    let document = std::fs::read_to_string(spec_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", spec_path.display())))?;
    let spec = parse_spec(&document).map_err(|errors| {
        CliError::Domain(format!(
            "invalid specification:\n{}",
            format_errors(&errors)
        ))
    })?;
    let query = compile(&spec).map_err(|defect| CliError::Domain(defect.to_string()))?;
    println!("{}", query.text);
    Ok(())
}

fn cmd_validate(
    benchmark_path: &std::path::Path,
    joern_args: &JoernArgs,
    extra_prompts: &[PathBuf],
) -> Result<(), CliError> {
    let benchmark = match load_benchmark(benchmark_path) {
        Ok(set) => set,
        Err(e @ BenchmarkError::Io { .. }) => return Err(CliError::Usage(e.to_string())),
        Err(e) => return Err(CliError::Domain(e.to_string())),
    };
    println!(
        "benchmark: {} tasks, structural gates OK",
        benchmark.tasks.len()
    );

    let joern =
        JoernClient::connect(&joern_args.config()?).map_err(|e| CliError::Usage(e.to_string()))?;
    let validations = validate_ground_truth(&benchmark, &joern);
    let passed = validations.iter().filter(|v| v.passed).count();
    for v in &validations {
        if v.passed {
            println!("ground truth {}: PASS", v.task_id);
        } else {
            println!(
                "ground truth {}: FAIL ({})",
                v.task_id,
                v.error.as_deref().unwrap_or("unknown")
            );
        }
    }
    println!("ground truth: {passed}/{} passed", validations.len());

    let mut prompt_files: Vec<(String, String)> = prompts::shipped_prompts()
        .into_iter()
        .map(|(name, content)| (name.to_string(), content))
        .collect();
    for path in extra_prompts {
        let content = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        prompt_files.push((path.display().to_string(), content));
    }
    let borrowed: Vec<(&str, String)> = prompt_files
        .iter()
        .map(|(n, c)| (n.as_str(), c.clone()))
        .collect();
    let findings = leakage_check(&benchmark, &borrowed);
    for finding in &findings {
        println!(
            "leakage: task {} {} appears in prompt '{}'",
            finding.task_id,
            match finding.kind {
                nl2cpgql_core::benchmark::LeakKind::Request => "request",
                nl2cpgql_core::benchmark::LeakKind::GroundTruthQuery => "ground-truth query",
            },
            finding.prompt_name
        );
    }
    if findings.is_empty() {
        println!(
            "leakage: no findings across {} prompt file(s)",
            prompt_files.len()
        );
    }

    if passed == validations.len() && findings.is_empty() {
        Ok(())
    } else {
        Err(CliError::Domain("validation failed".into()))
    }
}

fn cmd_report(
    records_path: &std::path::Path,
    benchmark_path: &std::path::Path,
    joern_args: &JoernArgs,
    format: &str,
    out: Option<&std::path::Path>,
) -> Result<(), CliError> {
    let format = ReportFormat::parse(format).ok_or_else(|| {
        CliError::Domain(format!(
            "unknown format '{format}'; expected one of: markdown, csv, json"
        ))
    })?;
    if !records_path.exists() {
        return Err(CliError::Usage(format!(
            "records file {} does not exist",
            records_path.display()
        )));
    }
    let records = read_records(records_path).map_err(|e| CliError::Domain(e.to_string()))?;
    let benchmark = match load_benchmark(benchmark_path) {
        Ok(set) => set,
        Err(e @ BenchmarkError::Io { .. }) => return Err(CliError::Usage(e.to_string())),
        Err(e) => return Err(CliError::Domain(e.to_string())),
    };
    let joern =
        JoernClient::connect(&joern_args.config()?).map_err(|e| CliError::Usage(e.to_string()))?;
    let document = judge_and_report(&records, &benchmark, &joern)
        .map_err(|e| CliError::Domain(e.to_string()))?;
    let rendered = emit_report(&document, format);
    match out {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{rendered}"),
    }
    Ok(())
}

fn parse_approaches(raw: &[String]) -> Result<Vec<ApproachId>, CliError> {
    if raw.is_empty() {
        return Ok(ApproachId::ALL.to_vec());
    }
    raw.iter()
        .map(|s| {
            ApproachId::parse(s).ok_or_else(|| {
                CliError::Usage(format!("unknown approach '{s}'; expected A1, A2, or A3"))
            })
        })
        .collect()
}
