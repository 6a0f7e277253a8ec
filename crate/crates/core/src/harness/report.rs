//! Comparison tables shaped like the paper's result tables.
//!
//! Columns, in order: `method, init, eta, mean, std, best, mean_iters`.
//! `std` is the population standard deviation over trials and `best` the
//! minimum final objective.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ExperimentStats;
use crate::error::{GmmError, Result};

pub const COLUMNS: [&str; 7] = ["method", "init", "eta", "mean", "std", "best", "mean_iters"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub init: String,
    pub eta: f64,
    pub mean: f64,
    pub std: f64,
    pub best: f64,
    pub mean_iters: f64,
}

impl ComparisonRow {
    fn cells(&self) -> [String; 7] {
        [
            self.method.clone(),
            self.init.clone(),
            self.eta.to_string(),
            format!("{:.6}", self.mean),
            format!("{:.6}", self.std),
            format!("{:.6}", self.best),
            format!("{:.2}", self.mean_iters),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub fingerprint: String,
    pub rows: Vec<ComparisonRow>,
}

/// One row per (method, init) across the given experiments. All experiments
/// must have been run on the same data.
pub fn compare_report(stats: &[ExperimentStats]) -> Result<ComparisonReport> {
    let first = stats
        .first()
        .ok_or_else(|| GmmError::InvalidArgument("nothing to compare".into()))?;
    for s in &stats[1..] {
        if s.fingerprint != first.fingerprint {
            return Err(GmmError::FingerprintMismatch(
                first.fingerprint.clone(),
                s.fingerprint.clone(),
            ));
        }
    }
    let rows = stats
        .iter()
        .flat_map(|s| &s.methods)
        .map(|m| ComparisonRow {
            method: m.method.clone(),
            init: m.init.clone(),
            eta: m.eta,
            mean: m.summary.mean,
            std: m.summary.std,
            best: m.summary.best,
            mean_iters: m.summary.iters_mean,
        })
        .collect();
    Ok(ComparisonReport {
        fingerprint: first.fingerprint.clone(),
        rows,
    })
}

impl ComparisonReport {
    /// Full-precision CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(COLUMNS)?;
        for r in &self.rows {
            out.write_record([
                r.method.clone(),
                r.init.clone(),
                r.eta.to_string(),
                r.mean.to_string(),
                r.std.to_string(),
                r.best.to_string(),
                r.mean_iters.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Column-aligned text table.
    pub fn to_text(&self) -> String {
        let body: Vec<[String; 7]> = self.rows.iter().map(ComparisonRow::cells).collect();
        let mut widths = COLUMNS.map(str::len);
        for cells in &body {
            for (w, c) in widths.iter_mut().zip(cells) {
                *w = (*w).max(c.len());
            }
        }
        let mut text = String::new();
        let mut line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            text.push_str(parts.join("  ").trim_end());
            text.push('\n');
        };
        line(&COLUMNS.map(String::from));
        for cells in &body {
            line(cells);
        }
        text
    }
}
