use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::graph::MetricGraph;
use crate::secular::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

/// Running empirical values next to their theoretical limit.
///
/// The verdict compares the final value: `|empirical − limit| ≤ tolerance·|limit|`,
/// or `≤ tolerance` when the limit is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub running_values: Vec<(usize, f64)>,
    pub theoretical_limit: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub metadata: BTreeMap<String, Value>,
}

impl ExperimentReport {
    pub fn new(name: &str, running_values: Vec<(usize, f64)>, theoretical_limit: f64, tolerance: f64) -> Self {
        let mut r = Self {
            name: name.to_string(),
            running_values,
            theoretical_limit,
            tolerance,
            verdict: Verdict::Fail,
            metadata: BTreeMap::new(),
        };
        r.verdict = r.judge();
        r
    }

    fn judge(&self) -> Verdict {
        let Some(value) = self.final_value() else {
            return Verdict::Fail;
        };
        let err = (value - self.theoretical_limit).abs();
        let allowed =
            if self.theoretical_limit == 0.0 { self.tolerance } else { self.tolerance * self.theoretical_limit.abs() };
        Verdict::from_bool(err <= allowed)
    }

    /// Same data judged against another tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.verdict = self.judge();
        self
    }

    /// Records graph hash, size and solver tolerances.
    pub fn with_context(mut self, g: &MetricGraph, cfg: &SolverConfig) -> Self {
        self.metadata.insert("graph_hash".into(), json!(graph_hash(g)));
        self.metadata.insert("edges".into(), json!(g.edges().len()));
        self.metadata.insert("total_length".into(), json!(g.total_length()));
        self.metadata.insert("rank_tol".into(), json!(cfg.rank_tol));
        self.metadata.insert("bracket_tol".into(), json!(cfg.bracket_tol));
        self.metadata.insert("merge_tol".into(), json!(cfg.merge_tol));
        self
    }

    pub fn with_meta(mut self, key: &str, value: Value) -> Self {
        self.metadata.insert(key.to_string(), value);
        self
    }

    pub fn final_value(&self) -> Option<f64> {
        self.running_values.last().map(|&(_, v)| v)
    }

    pub fn final_n(&self) -> Option<usize> {
        self.running_values.last().map(|&(n, _)| n)
    }

    /// Value at index `n` of the running sequence.
    pub fn value_at(&self, n: usize) -> Option<f64> {
        self.running_values.iter().find(|&&(m, _)| m == n).map(|&(_, v)| v)
    }

    pub fn abs_error(&self) -> Option<f64> {
        self.final_value().map(|v| (v - self.theoretical_limit).abs())
    }

    pub fn rel_error(&self) -> Option<f64> {
        self.abs_error().map(|e| relative(e, self.theoretical_limit))
    }

    /// Columns `N, empirical, limit, abs_error, rel_error`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["N", "empirical", "limit", "abs_error", "rel_error"])?;
        for &(n, v) in &self.running_values {
            let abs = (v - self.theoretical_limit).abs();
            w.write_record([
                n.to_string(),
                fmt_f64(v),
                fmt_f64(self.theoretical_limit),
                fmt_f64(abs),
                fmt_f64(relative(abs, self.theoretical_limit)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    /// Verdict summary without the running values.
    pub fn summary_json(&self) -> Value {
        json!({
            "name": self.name,
            "final_n": self.final_n(),
            "final_value": self.final_value(),
            "theoretical_limit": self.theoretical_limit,
            "abs_error": self.abs_error(),
            "rel_error": self.rel_error(),
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "metadata": self.metadata,
        })
    }
}

fn relative(abs: f64, limit: f64) -> f64 {
    if limit == 0.0 {
        abs
    } else {
        abs / limit.abs()
    }
}

/// Shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// FNV-1a of the canonical JSON form; stable across runs and platforms.
pub fn graph_hash(g: &MetricGraph) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in g.to_json().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}
