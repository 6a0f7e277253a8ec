use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{LatentConfig, Solution};
use crate::error::Result;

/// One row of a run's history. Row `t = 0` describes the initial point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// `F(w_t)`.
    pub objective: f64,
    /// `b_t(w_t)`.
    pub bound: f64,
    /// `v_t`.
    pub v: f64,
    /// `d_t`.
    pub d: f64,
    pub latent_changes: usize,
    pub wall_ms: f64,
    /// `b_t(w_{t-1})`.
    pub bound_at_prev: f64,
    /// `|w_t - w_{t-1}|^2`.
    pub step_sq: f64,
    pub strong_convexity: Option<f64>,
}

impl IterationRecord {
    pub(crate) fn initial(f0: f64) -> Self {
        IterationRecord {
            t: 0,
            objective: f0,
            bound: f0,
            v: f0,
            d: 0.0,
            latent_changes: 0,
            wall_ms: 0.0,
            bound_at_prev: f0,
            step_sq: 0.0,
            strong_convexity: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// `d_t < epsilon`.
    Converged,
    MaxIters,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max-iters",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub eta: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub solution: Solution,
    /// Configuration of the last bound.
    pub latent: LatentConfig,
    pub initial_latent: Option<LatentConfig>,
}

pub const TRACE_CSV_HEADER: [&str; 7] = ["t", "objective", "bound", "v", "d", "latent_changes", "wall_ms"];

impl RunTrace {
    pub fn initial_objective(&self) -> f64 {
        self.records[0].objective
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("trace always holds the initial row")
    }

    pub fn final_objective(&self) -> f64 {
        self.final_record().objective
    }

    /// Number of engine iterations (excluding the initial row).
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    /// Fraction of latent variables whose final value differs from the
    /// initializer's configuration.
    pub fn latent_change_fraction(&self) -> Option<f64> {
        let init = self.initial_latent.as_ref()?;
        if init.is_empty() {
            return Some(0.0);
        }
        Some(init.hamming(&self.latent) as f64 / init.len() as f64)
    }

    /// One row per iteration with columns `t, objective, bound, v, d, latent_changes, wall_ms`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(TRACE_CSV_HEADER)?;
        for r in &self.records {
            out.write_record([
                r.t.to_string(),
                r.objective.to_string(),
                r.bound.to_string(),
                r.v.to_string(),
                r.d.to_string(),
                r.latent_changes.to_string(),
                format!("{:.3}", r.wall_ms),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
