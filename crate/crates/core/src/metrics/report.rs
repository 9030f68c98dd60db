//! Deterministic report rendering in markdown, CSV, and JSON.

use std::fmt::Write as _;

use serde::Serialize;

use crate::pipelines::ApproachId;

use super::{AggregateReport, CellAggregate, CoverageReport, FiveNumber};

/// Output format for `emit_report`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "markdown" | "md" => Some(ReportFormat::Markdown),
            "csv" => Some(ReportFormat::Csv),
            "json" => Some(ReportFormat::Json),
            _ => None,
        }
    }
}

/// Everything a rendered report contains.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ReportDocument {
    pub aggregates: AggregateReport,
    pub coverage: CoverageReport,
}

/// Renders the document. Same input, same bytes.
pub fn emit_report(document: &ReportDocument, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(document),
        ReportFormat::Csv => render_csv(document),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(document).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

fn models_of(cells: &[CellAggregate]) -> Vec<String> {
    let mut models: Vec<String> = cells.iter().map(|c| c.model_id.clone()).collect();
    models.sort();
    models.dedup();
    models
}

fn cell<'a>(
    cells: &'a [CellAggregate],
    model: &str,
    approach: ApproachId,
) -> Option<&'a CellAggregate> {
    cells
        .iter()
        .find(|c| c.model_id == model && c.approach == approach)
}

fn render_markdown(document: &ReportDocument) -> String {
    let cells = &document.aggregates.cells;
    let mut out = String::new();
    out.push_str("# Evaluation report\n\n");

    // Result/execution table, one model per row, Res./Exec. pair per approach.
    out.push_str("## Result match and execution success (%)\n\n");
    out.push_str("| Model | A1 Res. | A1 Exec. | A2 Res. | A2 Exec. | A3 Res. | A3 Exec. |\n");
    out.push_str("|:--|--:|--:|--:|--:|--:|--:|\n");
    for model in models_of(cells) {
        let mut row = format!("| {model} |");
        for approach in ApproachId::ALL {
            match cell(cells, &model, approach) {
                Some(c) if c.trials > 0 => {
                    let _ = write!(
                        row,
                        " {:.1} | {:.1} |",
                        c.result_match_rate, c.exec_success_rate
                    );
                }
                _ => row.push_str(" — | — |"),
            }
        }
        out.push_str(&row);
        out.push('\n');
    }

    // Per-tier result match, one section per model.
    out.push_str("\n## Result match by tier\n");
    for model in models_of(cells) {
        let _ = write!(out, "\n### {model}\n\n");
        out.push_str(
            "| Tier | A1 # | A1 of | A1 % | A2 # | A2 of | A2 % | A3 # | A3 of | A3 % |\n",
        );
        out.push_str("|:--|--:|--:|--:|--:|--:|--:|--:|--:|--:|\n");
        let mut totals = std::collections::BTreeMap::new();
        for tier in crate::benchmark::Tier::ALL {
            let mut row = format!("| {} |", tier.label());
            for approach in ApproachId::ALL {
                let found = document
                    .aggregates
                    .tiers
                    .iter()
                    .find(|t| t.model_id == model && t.approach == approach && t.tier == tier);
                match found {
                    Some(t) if t.trials > 0 => {
                        let entry = totals.entry(approach).or_insert((0usize, 0usize));
                        entry.0 += t.matched;
                        entry.1 += t.trials;
                        let _ = write!(row, " {} | {} | {:.1} |", t.matched, t.trials, t.rate);
                    }
                    _ => row.push_str(" — | — | — |"),
                }
            }
            out.push_str(&row);
            out.push('\n');
        }
        let mut row = "| All |".to_string();
        for approach in ApproachId::ALL {
            match totals.get(&approach) {
                Some((matched, trials)) if *trials > 0 => {
                    let _ = write!(
                        row,
                        " {} | {} | {:.1} |",
                        matched,
                        trials,
                        super::percentage(*matched, *trials)
                    );
                }
                _ => row.push_str(" — | — | — |"),
            }
        }
        out.push_str(&row);
        out.push('\n');
    }

    // Per-task coverage with the repetition glyphs and solved-set relations.
    out.push_str("\n## Per-task coverage\n");
    for model in &document.coverage.models {
        let _ = write!(out, "\n### {}\n\n", model.model_id);
        out.push_str("| Task | A1 | A2 | A3 |\n|:--|:--:|:--:|:--:|\n");
        for tally in &model.task_tallies {
            let mut row = format!("| {} |", tally.task_id);
            for approach in ApproachId::ALL {
                match tally.per_approach.get(&approach) {
                    Some(t) => {
                        let _ = write!(row, " {} |", t.glyph());
                    }
                    None => row.push_str("  |"),
                }
            }
            out.push_str(&row);
            out.push('\n');
        }
        out.push_str("\nSolved-set relations (tasks solved at least once):\n\n");
        for relation in &model.relations {
            let _ = writeln!(
                out,
                "- {} vs {}: {} ({} vs {} tasks)",
                relation.left,
                relation.right,
                relation.relation.as_str(),
                model.solved[&relation.left].len(),
                model.solved[&relation.right].len(),
            );
        }
    }

    // Cost and interaction profile.
    out.push_str("\n## Cost and interaction profile\n\n");
    out.push_str(
        "| Model | Approach | Trials | Infra. excluded | Exact match % | Mean attempts | Mean steps | Tokens min/Q1/median/Q3/max |\n",
    );
    out.push_str("|:--|:--|--:|--:|--:|--:|--:|:--|\n");
    for c in cells {
        let exact = match c.exact_match_rate {
            Some(rate) => format!("{rate:.1}"),
            None => "—".to_string(),
        };
        let attempts = match c.approach {
            ApproachId::A3Agentic => "—".to_string(),
            _ => format!("{:.1}", c.mean_attempts),
        };
        let steps = match c.mean_steps {
            Some(s) => format!("{s:.1}"),
            None => "—".to_string(),
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            c.model_id,
            c.approach,
            c.trials,
            c.infrastructure_failures,
            exact,
            attempts,
            steps,
            tokens_cell(c.token_stats.as_ref()),
        );
    }

    out
}

fn tokens_cell(stats: Option<&FiveNumber>) -> String {
    match stats {
        Some(s) => format!("{}/{}/{}/{}/{}", s.min, s.q1, s.median, s.q3, s.max),
        None => "—".to_string(),
    }
}

/// One row per cell plus a header.
fn render_csv(document: &ReportDocument) -> String {
    let mut out = String::from(
        "model,approach,trials,infrastructure_failures,result_match_pct,exec_success_pct,exact_match_pct,mean_attempts,mean_steps,tokens_min,tokens_q1,tokens_median,tokens_q3,tokens_max\n",
    );
    for c in &document.aggregates.cells {
        let exact = c
            .exact_match_rate
            .map(|r| format!("{r:.1}"))
            .unwrap_or_default();
        let steps = c.mean_steps.map(|s| format!("{s:.1}")).unwrap_or_default();
        let tokens = match &c.token_stats {
            Some(s) => format!("{},{},{},{},{}", s.min, s.q1, s.median, s.q3, s.max),
            None => ",,,,".to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{:.1},{:.1},{},{:.1},{},{}",
            c.model_id,
            c.approach,
            c.trials,
            c.infrastructure_failures,
            c.result_match_rate,
            c.exec_success_rate,
            exact,
            c.mean_attempts,
            steps,
            tokens,
        );
    }
    out
}
