//! Bound selectors.

use rand::Rng;

use super::{LatentConfig, Problem, Solution};
use crate::error::Result;
use crate::rng::GmmRng;

/// Number of accepted walk moves between full recomputations of the bound
/// value, which caps drift in the incremental bookkeeping.
pub const WALK_RECOMPUTE_EVERY: usize = 1024;

/// Everything a selector may look at when choosing `b_t`.
#[derive(Debug, Clone, Copy)]
pub struct SelectContext<'a> {
    pub t: usize,
    pub run_seed: u64,
    pub eta: f64,
    pub w_prev: &'a Solution,
    /// Configuration chosen at `t - 1`, or the initializer's configuration at `t = 1`.
    pub z_prev: Option<&'a LatentConfig>,
    pub v_prev: f64,
    pub objective_prev: f64,
    pub tol: f64,
}

pub trait Selector<P: Problem + ?Sized> {
    /// Returns a configuration in `B(w_prev, v_prev)`.
    fn select(&mut self, problem: &P, ctx: &SelectContext<'_>, rng: &mut GmmRng) -> Result<LatentConfig>;
}

impl<P: Problem + ?Sized, S: Selector<P> + ?Sized> Selector<P> for Box<S> {
    fn select(&mut self, problem: &P, ctx: &SelectContext<'_>, rng: &mut GmmRng) -> Result<LatentConfig> {
        (**self).select(problem, ctx, rng)
    }
}

/// The MM choice: the touching bound, which maximizes `g(b, w) = -b(w)`
/// over the whole family.
#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy;

impl<P: Problem + ?Sized> Selector<P> for Greedy {
    fn select(&mut self, problem: &P, ctx: &SelectContext<'_>, _rng: &mut GmmRng) -> Result<LatentConfig> {
        Ok(problem.touching_config(ctx.w_prev))
    }
}

/// Random walk over valid configurations, starting at the touching one.
///
/// Each step proposes a single-coordinate change (uniform coordinate,
/// uniform new value) and accepts it iff the bound value at `w_prev` stays
/// below the threshold.
#[derive(Debug, Clone, Copy)]
pub struct RandomWalk {
    pub steps_per_example: usize,
}

impl Default for RandomWalk {
    fn default() -> Self {
        RandomWalk { steps_per_example: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct WalkOutcome {
    pub config: LatentConfig,
    /// Incrementally maintained `b(w_prev; config)`.
    pub value: f64,
    pub accepted: usize,
}

impl RandomWalk {
    pub fn walk<P: Problem + ?Sized>(
        problem: &P,
        w: &[f64],
        threshold: f64,
        steps: usize,
        rng: &mut GmmRng,
    ) -> WalkOutcome {
        let mut z = problem.touching_config(w);
        let mut value = problem.bound_value(w, &z);
        let n = problem.latent_len();
        let mut accepted = 0;
        if n == 0 {
            return WalkOutcome {
                config: z,
                value,
                accepted,
            };
        }
        for _ in 0..steps {
            let i = rng.random_range(0..n);
            let size = problem.domain_size(i);
            if size < 2 {
                continue;
            }
            let current = z[i];
            let mut proposal = rng.random_range(0..size - 1);
            if proposal >= current {
                proposal += 1;
            }
            let delta = problem.coordinate_delta(w, &z, i, proposal);
            if value + delta <= threshold {
                z[i] = proposal;
                value += delta;
                accepted += 1;
                if accepted % WALK_RECOMPUTE_EVERY == 0 {
                    value = problem.bound_value(w, &z);
                }
            }
        }
        WalkOutcome {
            config: z,
            value,
            accepted,
        }
    }
}

impl<P: Problem + ?Sized> Selector<P> for RandomWalk {
    fn select(&mut self, problem: &P, ctx: &SelectContext<'_>, rng: &mut GmmRng) -> Result<LatentConfig> {
        let steps = self.steps_per_example * problem.latent_len();
        let outcome = Self::walk(problem, ctx.w_prev, ctx.v_prev + ctx.tol, steps, rng);
        Ok(outcome.config)
    }
}

/// Moves coordinates of `proposal` to their touching values, largest bound
/// decrease first, until the bound at `w_prev` drops below `v_prev`.
///
/// Every intermediate configuration is pushed onto `path` when given; the
/// returned configuration is the first valid one on it. Terminates because
/// the fully repaired configuration ties the touching bound.
pub fn repair_to_valid<P: Problem + ?Sized>(
    problem: &P,
    w_prev: &[f64],
    v_prev: f64,
    tol: f64,
    mut proposal: LatentConfig,
    mut path: Option<&mut Vec<LatentConfig>>,
) -> LatentConfig {
    let threshold = v_prev + tol;
    if let Some(p) = path.as_deref_mut() {
        p.push(proposal.clone());
    }
    let mut value = problem.bound_value(w_prev, &proposal);
    if value <= threshold {
        return proposal;
    }
    let touching = problem.touching_config(w_prev);
    let mut moves: Vec<(usize, f64)> = (0..proposal.len())
        .filter(|&i| proposal[i] != touching[i])
        .map(|i| (i, problem.coordinate_delta(w_prev, &proposal, i, touching[i])))
        .filter(|&(_, delta)| delta < 0.0)
        .collect();
    moves.sort_by(|a, b| a.1.total_cmp(&b.1));
    for (i, delta) in moves {
        proposal[i] = touching[i];
        value += delta;
        if let Some(p) = path.as_deref_mut() {
            p.push(proposal.clone());
        }
        if value <= threshold {
            break;
        }
    }
    if problem.bound_value(w_prev, &proposal) <= threshold {
        proposal
    } else {
        if let Some(p) = path {
            p.push(touching.clone());
        }
        touching
    }
}

/// A preference over bounds, `g(b, w)`, whose unconstrained maximizer is
/// separable over latent coordinates.
pub trait BiasFunction<P: Problem + ?Sized> {
    /// Prepares the bias for the current context and returns the
    /// configuration maximizing it over the whole family.
    fn proposal(&mut self, problem: &P, ctx: &SelectContext<'_>, rng: &mut GmmRng) -> Result<LatentConfig>;

    /// `g(b_z, w_prev)` for the context of the last `proposal` call.
    fn value(&self, problem: &P, z: &LatentConfig) -> f64;
}

/// Deterministic selection by a bias function: the bias-maximizing
/// configuration, repaired to validity with [`repair_to_valid`].
#[derive(Debug, Clone)]
pub struct Biased<B> {
    pub bias: B,
    pub record_path: bool,
    /// Candidates considered at the last call, in order, when `record_path` is set.
    pub last_path: Vec<LatentConfig>,
}

impl<B> Biased<B> {
    pub fn new(bias: B) -> Self {
        Biased {
            bias,
            record_path: false,
            last_path: Vec::new(),
        }
    }
}

impl<P: Problem + ?Sized, B: BiasFunction<P>> Selector<P> for Biased<B> {
    fn select(&mut self, problem: &P, ctx: &SelectContext<'_>, rng: &mut GmmRng) -> Result<LatentConfig> {
        let proposal = self.bias.proposal(problem, ctx, rng)?;
        self.last_path.clear();
        let path = if self.record_path {
            Some(&mut self.last_path)
        } else {
            None
        };
        Ok(repair_to_valid(
            problem, ctx.w_prev, ctx.v_prev, ctx.tol, proposal, path,
        ))
    }
}
