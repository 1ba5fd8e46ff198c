use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use qgs_core::experiments::{fmt_f64, ExperimentReport, Verdict};
use serde_json::Value;

use crate::args::Format;

/// A rectangular result table.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Appends the running values of `report` under the series label.
    pub fn push_report(&mut self, series: &str, report: &ExperimentReport) {
        for &(n, v) in &report.running_values {
            let abs = (v - report.theoretical_limit).abs();
            let rel = if report.theoretical_limit == 0.0 { abs } else { abs / report.theoretical_limit.abs() };
            self.push(vec![series.to_string(), n.to_string(), f(v), f(report.theoretical_limit), f(abs), f(rel)]);
        }
    }

    pub fn report_header() -> Self {
        Self::new(&["series", "N", "empirical", "limit", "abs_error", "rel_error"])
    }
}

pub fn f(x: f64) -> String {
    fmt_f64(x)
}

/// Result of one command: the emitted table and document plus a verdict
/// when the command judges anything.
#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    pub json: Value,
    pub verdict: Option<Verdict>,
    pub summary: String,
}

pub fn emit(outcome: &Outcome, format: Format, out: Option<&Path>) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&outcome.table.header)?;
            for row in &outcome.table.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, &outcome.json)?;
            buf.push(b'\n');
        }
    }
    match out {
        Some(path) => std::fs::write(path, &buf).with_context(|| format!("cannot write `{}`", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&buf)?;
            stdout.flush()?;
        }
    }
    Ok(())
}
