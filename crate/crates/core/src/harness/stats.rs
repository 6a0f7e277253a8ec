//! Aggregation over seeded trials.

use serde::{Deserialize, Serialize};

use crate::engine::{RunTrace, Termination};

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Fraction of latent variables whose final value differs from the initial one.
    pub latent_change_fraction: Option<f64>,
}

impl TrialRow {
    pub fn from_trace(trial: usize, seed: u64, trace: &RunTrace) -> Self {
        TrialRow {
            trial,
            seed,
            initial_objective: trace.initial_objective(),
            final_objective: trace.final_objective(),
            iterations: trace.iterations(),
            termination: trace.termination,
            latent_change_fraction: trace.latent_change_fraction(),
        }
    }
}

/// Mean, population standard deviation and best (minimum) final objective,
/// plus iteration-count statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
    pub best: f64,
    pub iters_mean: f64,
    pub iters_std: f64,
}

/// Mean and population standard deviation (divisor `n`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl Summary {
    pub fn from_rows(rows: &[TrialRow]) -> Self {
        let finals: Vec<f64> = rows.iter().map(|r| r.final_objective).collect();
        let iters: Vec<f64> = rows.iter().map(|r| r.iterations as f64).collect();
        let (mean, std) = mean_std(&finals);
        let (iters_mean, iters_std) = mean_std(&iters);
        Summary {
            trials: rows.len(),
            mean,
            std,
            best: finals.iter().copied().fold(f64::INFINITY, f64::min),
            iters_mean,
            iters_std,
        }
    }
}

/// Exact two-sided sign test on paired differences; ties are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    pub p_value: f64,
}

/// `wins` counts pairs where `a < b`.
pub fn sign_test(a: &[f64], b: &[f64]) -> SignTest {
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Less) => wins += 1,
            Some(std::cmp::Ordering::Greater) => losses += 1,
            _ => ties += 1,
        }
    }
    let n = wins + losses;
    let tail = binomial_half_cdf(n, wins.min(losses));
    SignTest {
        wins,
        losses,
        ties,
        p_value: (2.0 * tail).min(1.0),
    }
}

/// `P(X <= k)` for `X ~ Binomial(n, 1/2)`, summed in log space.
fn binomial_half_cdf(n: usize, k: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut ln_choose = 0.0;
    let mut total = 0.0;
    for i in 0..=k {
        if i > 0 {
            ln_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        total += (ln_choose + ln_half_n).exp();
    }
    total.min(1.0)
}
