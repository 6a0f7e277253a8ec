//! The generalized majorization-minimization loop.
//!
//! A [`Problem`] supplies an objective `F`, a family of upper bounds indexed by
//! a [`LatentConfig`], and a minimizer for each bound. At iteration `t` the
//! engine asks a [`Selector`] for a bound whose value at the previous solution
//! is below the threshold `v_{t-1}`, minimizes it, measures the gap
//! `d_t = b_t(w_t) - F(w_t)` and lowers the threshold to `b_t(w_t) - eta * d_t`.
//! With `eta = 1` every admissible bound touches `F`, which is classic MM.

pub mod diagnostics;
pub mod selector;
pub mod trace;

use std::ops::{Deref, DerefMut};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{GmmError, Result};
use crate::rng::{self, Stream};

pub use diagnostics::{check_theorem_diagnostics, fixed_point_residual, DiagnosticReport, StrongConvexityCheck};
pub use selector::{repair_to_valid, BiasFunction, Biased, Greedy, RandomWalk, SelectContext, Selector, WalkOutcome};
pub use trace::{IterationRecord, RunTrace, Termination};

/// Relative tolerance for every inequality check, scaled by `max(1, |F(w_0)|)`.
pub const TOL_NUM_REL: f64 = 1e-9;

/// Default relative gap threshold, scaled by `max(1, |F(w_0)|)`.
pub const DEFAULT_EPSILON_REL: f64 = 1e-6;

pub const DEFAULT_MAX_ITERS: usize = 500;

pub fn tol_num(initial_objective: f64) -> f64 {
    TOL_NUM_REL * initial_objective.abs().max(1.0)
}

/// A point in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Solution(pub Vec<f64>);

impl Solution {
    pub fn zeros(dim: usize) -> Self {
        Solution(vec![0.0; dim])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn sq_distance(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Solution {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Solution {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Solution {
    fn from(v: Vec<f64>) -> Self {
        Solution(v)
    }
}

/// A full assignment of the latent variables; identifies one bound in the family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentConfig(pub Vec<usize>);

impl LatentConfig {
    /// Number of coordinates at which the two configurations differ.
    pub fn hamming(&self, other: &LatentConfig) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl Deref for LatentConfig {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl DerefMut for LatentConfig {
    fn deref_mut(&mut self) -> &mut [usize] {
        &mut self.0
    }
}

impl From<Vec<usize>> for LatentConfig {
    fn from(v: Vec<usize>) -> Self {
        LatentConfig(v)
    }
}

/// The interface the engine consumes.
///
/// Bounds must be separable over latent coordinates at a fixed solution:
/// [`Problem::coordinate_delta`] of coordinate `i` may not depend on the
/// values of the other coordinates. Both built-in problems satisfy this.
pub trait Problem: Sync {
    /// Dimension of the solution vector.
    fn dim(&self) -> usize;

    /// Number of latent variables.
    fn latent_len(&self) -> usize;

    /// Number of values latent variable `i` can take (values are `0..size`).
    fn domain_size(&self, i: usize) -> usize;

    fn objective(&self, w: &[f64]) -> f64;

    fn bound_value(&self, w: &[f64], z: &LatentConfig) -> f64;

    /// Minimizer of the bound indexed by `z`. `warm_start` is the previous
    /// solution; closed-form problems ignore it.
    fn optimize_bound(&self, z: &LatentConfig, warm_start: &[f64]) -> Result<Solution>;

    /// The configuration whose bound touches `F` at `w`.
    fn touching_config(&self, w: &[f64]) -> LatentConfig;

    /// `b(w; z with z_i := value) - b(w; z)`.
    fn coordinate_delta(&self, w: &[f64], z: &LatentConfig, i: usize, value: usize) -> f64;

    /// Strong-convexity modulus `m` of the bound indexed by `z`, in the
    /// convention `b(u) >= b(w) + g.(u - w) + (m/2)|u - w|^2`, if it has one.
    fn strong_convexity(&self, _z: &LatentConfig) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    /// Progress coefficient in `(0, 1]`.
    pub eta: f64,
    /// Gap stopping threshold; multiplied by `max(1, |F(w_0)|)` when
    /// `relative_epsilon` is set.
    pub epsilon: f64,
    pub relative_epsilon: bool,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            eta: 1.0,
            epsilon: DEFAULT_EPSILON_REL,
            relative_epsilon: true,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
        }
    }
}

impl GmmConfig {
    pub fn with_eta(eta: f64) -> Self {
        GmmConfig {
            eta,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(GmmError::config("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(GmmError::config(
                "epsilon",
                format!("must be positive, got {}", self.epsilon),
            ));
        }
        if self.max_iters == 0 {
            return Err(GmmError::config("max_iters", "must be at least 1"));
        }
        Ok(())
    }

    pub fn effective_epsilon(&self, initial_objective: f64) -> f64 {
        if self.relative_epsilon {
            self.epsilon * initial_objective.abs().max(1.0)
        } else {
            self.epsilon
        }
    }
}

/// Engine state after a completed iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmState {
    pub t: usize,
    pub eta: f64,
    pub w: Solution,
    pub bound_value: f64,
    pub objective_value: f64,
}

impl GmmState {
    pub fn gap(&self) -> f64 {
        self.bound_value - self.objective_value
    }

    pub fn validity_threshold(&self) -> f64 {
        validity_threshold(self.bound_value, self.objective_value, self.eta)
    }
}

/// `v = b(w) - eta * (b(w) - F(w))`.
pub fn validity_threshold(bound_value: f64, objective_value: f64, eta: f64) -> f64 {
    bound_value - eta * (bound_value - objective_value)
}

/// Membership in `B(w_prev, v_prev)`, with `tol` absorbing rounding.
pub fn is_valid<P: Problem + ?Sized>(
    problem: &P,
    candidate: &LatentConfig,
    w_prev: &[f64],
    v_prev: f64,
    tol: f64,
) -> bool {
    problem.bound_value(w_prev, candidate) <= v_prev + tol
}

/// How a run begins.
#[derive(Debug, Clone)]
pub enum Start {
    /// From a solution `w_0`, with `v_0 = F(w_0)`; the first selected bound
    /// must touch `F` at `w_0`. `latent` is the configuration the initializer
    /// produced, if any, and only feeds the latent-change bookkeeping.
    Point { w: Solution, latent: Option<LatentConfig> },
    /// From an initial bound: `w_0` minimizes the bound indexed by the
    /// configuration, which acts as `b_0`, so `v_0 = b_0(w_0) - eta * d_0`.
    /// This is how latent-variable models are usually initialized.
    Bound(LatentConfig),
}

impl Start {
    pub fn point(w: Solution) -> Self {
        Start::Point { w, latent: None }
    }

    pub fn point_with_latent(w: Solution, latent: LatentConfig) -> Self {
        Start::Point {
            w,
            latent: Some(latent),
        }
    }

    pub fn bound(latent: LatentConfig) -> Self {
        Start::Bound(latent)
    }

    pub fn latent(&self) -> Option<&LatentConfig> {
        match self {
            Start::Point { latent, .. } => latent.as_ref(),
            Start::Bound(z) => Some(z),
        }
    }
}

/// What the observer callback sees after each iteration.
pub struct IterationView<'a> {
    pub record: &'a IterationRecord,
    pub w: &'a Solution,
    pub latent: &'a LatentConfig,
}

pub fn run<P, S>(problem: &P, start: &Start, cfg: &GmmConfig, selector: &mut S) -> Result<RunTrace>
where
    P: Problem + ?Sized,
    S: Selector<P> + ?Sized,
{
    run_observed(problem, start, cfg, selector, |_| {})
}

/// Runs the loop, calling `observer` after every iteration `t >= 1`.
pub fn run_observed<P, S, O>(
    problem: &P,
    start: &Start,
    cfg: &GmmConfig,
    selector: &mut S,
    mut observer: O,
) -> Result<RunTrace>
where
    P: Problem + ?Sized,
    S: Selector<P> + ?Sized,
    O: FnMut(&IterationView<'_>),
{
    cfg.validate()?;
    if let Some(z) = start.latent() {
        if z.len() != problem.latent_len() {
            return Err(GmmError::InvalidArgument(format!(
                "initial latent configuration has length {}, problem expects {}",
                z.len(),
                problem.latent_len()
            )));
        }
    }
    let w0 = match start {
        Start::Point { w, .. } => w.clone(),
        Start::Bound(z) => problem.optimize_bound(z, &[])?,
    };
    if w0.len() != problem.dim() {
        return Err(GmmError::InvalidArgument(format!(
            "initial solution has dimension {}, problem expects {}",
            w0.len(),
            problem.dim()
        )));
    }
    let f0 = problem.objective(&w0);
    if !f0.is_finite() {
        return Err(GmmError::NonFiniteObjective { t: 0, value: f0 });
    }
    let initial = match start {
        Start::Point { .. } => IterationRecord::initial(f0),
        Start::Bound(z) => {
            let b0 = problem.bound_value(&w0, z);
            if !b0.is_finite() {
                return Err(GmmError::NonFiniteObjective { t: 0, value: b0 });
            }
            IterationRecord {
                bound: b0,
                v: b0 - cfg.eta * (b0 - f0),
                d: b0 - f0,
                bound_at_prev: b0,
                ..IterationRecord::initial(f0)
            }
        }
    };
    let tol = tol_num(f0);
    let epsilon = cfg.effective_epsilon(f0);

    let mut w = w0;
    let mut v = initial.v;
    let mut objective_prev = f0;
    let mut z_prev = start.latent().cloned();
    let mut termination = Termination::MaxIters;
    let skip_loop = matches!(start, Start::Bound(_)) && initial.d < epsilon;
    let mut records = vec![initial];
    if skip_loop {
        termination = Termination::Converged;
    }

    for t in (1..=cfg.max_iters).take_while(|_| !skip_loop) {
        let clock = Instant::now();
        let mut rng = rng::stream(cfg.seed, Stream::Iteration(t));
        let ctx = SelectContext {
            t,
            run_seed: cfg.seed,
            eta: cfg.eta,
            w_prev: &w,
            z_prev: z_prev.as_ref(),
            v_prev: v,
            objective_prev,
            tol,
        };
        let z = selector.select(problem, &ctx, &mut rng)?;
        let bound_at_prev = problem.bound_value(&w, &z);
        if !(bound_at_prev <= v + tol) {
            return Err(GmmError::InvalidBound {
                t,
                value: bound_at_prev,
                threshold: v,
            });
        }

        let w_next = problem.optimize_bound(&z, &w)?;
        let bound = problem.bound_value(&w_next, &z);
        let objective = problem.objective(&w_next);
        if !objective.is_finite() || !bound.is_finite() {
            return Err(GmmError::NonFiniteObjective { t, value: objective });
        }
        let d = bound - objective;
        let v_next = bound - cfg.eta * d;
        let latent_changes = match &z_prev {
            Some(prev) => prev.hamming(&z),
            None => 0,
        };

        let record = IterationRecord {
            t,
            objective,
            bound,
            v: v_next,
            d,
            latent_changes,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
            bound_at_prev,
            step_sq: w_next.sq_distance(&w),
            strong_convexity: problem.strong_convexity(&z),
        };
        observer(&IterationView {
            record: &record,
            w: &w_next,
            latent: &z,
        });
        records.push(record);

        w = w_next;
        v = v_next;
        objective_prev = objective;
        z_prev = Some(z);
        if d < epsilon {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(RunTrace {
        eta: cfg.eta,
        epsilon,
        tol,
        records,
        termination,
        solution: w,
        latent: z_prev.expect("at least one iteration ran"),
        initial_latent: start.latent().cloned(),
    })
}
