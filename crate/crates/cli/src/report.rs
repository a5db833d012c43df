//! Report rendering.
//!
//! Machine output is JSON lines: one `header` record followed by one `batch`
//! record per sweep point, in sweep order. Human output is an aligned table
//! with the measured rate, its interval and the reference value. Both depend
//! only on the batch tallies, so equal inputs give byte-identical output.

use std::fmt::Write as _;

use dba_core::sim::REPORT_CONFIDENCE;
use dba_core::stats::RateEstimate;
use serde::Serialize;

use crate::config::{OutputFormat, SCHEMA_VERSION};
use crate::runner::{BatchOutcome, ScenarioOutcome};

#[derive(Serialize)]
struct Header<'a> {
    record: &'static str,
    schema_version: u32,
    scenario: &'a str,
    confidence: f64,
    batches: usize,
}

#[derive(Serialize)]
struct BatchRecord<'a> {
    record: &'static str,
    schema_version: u32,
    point: serde_json::Map<String, serde_json::Value>,
    #[serde(flatten)]
    outcome: &'a BatchOutcome,
}

pub fn emit_report(outcome: &ScenarioOutcome, format: OutputFormat) -> String {
    match format {
        OutputFormat::Machine => emit_machine(outcome),
        OutputFormat::Human => emit_human(outcome),
    }
}

fn emit_machine(outcome: &ScenarioOutcome) -> String {
    let header = Header {
        record: "header",
        schema_version: SCHEMA_VERSION,
        scenario: &outcome.scenario,
        confidence: REPORT_CONFIDENCE,
        batches: outcome.batches.len(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for b in &outcome.batches {
        let record = BatchRecord {
            record: "batch",
            schema_version: SCHEMA_VERSION,
            point: b
                .point
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
            outcome: b,
        };
        out.push_str(&serde_json::to_string(&record).expect("batch serializes"));
        out.push('\n');
    }
    out
}

struct Row {
    metric: &'static str,
    counts: String,
    measured: String,
    interval: String,
    expected: String,
}

fn rate_row(metric: &'static str, r: &RateEstimate, expected: String) -> Row {
    let applicable = r.trials > 0;
    Row {
        metric,
        counts: format!("{}/{}", r.count, r.trials),
        measured: if applicable {
            format!("{:.6}", r.rate)
        } else {
            "-".into()
        },
        interval: if applicable {
            format!("[{:.6}, {:.6}]", r.low, r.high)
        } else {
            "-".into()
        },
        expected,
    }
}

fn rows(b: &BatchOutcome) -> Vec<Row> {
    let r = &b.report.rates;
    let reference = &b.reference;
    let forge_expected = match &reference.forge_success {
        Some(f) => format!(
            "{:.6} {}{}",
            f.value,
            f.method,
            f.exact
                .as_ref()
                .map(|e| format!(" ({e})"))
                .unwrap_or_default()
        ),
        None => "-".into(),
    };
    let floor = reference
        .honest_success_expected
        .map(|f| format!("{f:.6} 1-forge"))
        .unwrap_or_else(|| "-".into());
    vec![
        rate_row("agreement", &r.agreement, "-".into()),
        rate_row("all_abort", &r.all_abort, "-".into()),
        rate_row("common_value", &r.common_value, "-".into()),
        rate_row("validity", &r.validity, "-".into()),
        rate_row("honest_success", &r.honest_success, floor),
        rate_row("forge_success", &r.forge_success, forge_expected),
        Row {
            metric: "forge_heuristic",
            counts: "-".into(),
            measured: "-".into(),
            interval: "-".into(),
            expected: format!("{:.6e} (1/2)^(M/3)", reference.forge_heuristic),
        },
        rate_row(
            "full_knowledge",
            &r.full_knowledge,
            format!("{:.6} p^d", reference.full_knowledge),
        ),
    ]
}

fn emit_human(outcome: &ScenarioOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "scenario {}  schema {}  {} batches  {:.0}% Wilson intervals",
        outcome.scenario,
        SCHEMA_VERSION,
        outcome.batches.len(),
        REPORT_CONFIDENCE * 100.0
    );
    for b in &outcome.batches {
        let cfg = &b.report.config;
        let _ = writeln!(
            out,
            "\n[{}] n={} d={} m={} p={} sender={} receiver={} trials={} seed={}",
            b.label_text(),
            cfg.participants,
            cfg.distributors,
            cfg.segment_length,
            cfg.adversary.disclosure_probability,
            cfg.adversary.sender_strategy,
            cfg.adversary.receiver_strategy,
            cfg.trials,
            cfg.master_seed
        );
        let rows = rows(b);
        let header = Row {
            metric: "metric",
            counts: "count".into(),
            measured: "measured".into(),
            interval: "interval".into(),
            expected: "expected".into(),
        };
        let w = |f: fn(&Row) -> usize| rows.iter().chain([&header]).map(f).max().unwrap_or(0);
        let widths = [
            w(|r| r.metric.len()),
            w(|r| r.counts.len()),
            w(|r| r.measured.len()),
            w(|r| r.interval.len()),
        ];
        for r in std::iter::once(&header).chain(&rows) {
            let line = format!(
                "{:<w0$}  {:>w1$}  {:>w2$}  {:<w3$}  {}",
                r.metric,
                r.counts,
                r.measured,
                r.interval,
                r.expected,
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3],
            );
            let _ = writeln!(out, "{}", line.trim_end());
        }
        for c in &b.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "check {status} {}: {}", c.name, c.detail);
        }
    }
    out
}
