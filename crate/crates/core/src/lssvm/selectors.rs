use rand::seq::{index, SliceRandom};
use rayon::prelude::*;

use super::{solve_bound, LssvmProblem};
use crate::engine::{repair_to_valid, BiasFunction, LatentConfig, Problem, SelectContext, Selector, Solution};
use crate::error::Result;
use crate::rng::{self, GmmRng, Stream};

/// Re-imputes the latent values of a uniformly sampled subset of examples
/// and keeps the rest, then repairs the result to validity.
///
/// The subset grows as `min(n, ceil(n * t / ramp))`, so from iteration
/// `ramp` on every step is a full greedy update.
#[derive(Debug, Clone, Copy)]
pub struct StochasticSubset {
    pub ramp: usize,
}

impl Default for StochasticSubset {
    fn default() -> Self {
        StochasticSubset { ramp: 10 }
    }
}

impl StochasticSubset {
    pub fn subset_size(&self, n: usize, t: usize) -> usize {
        (n * t).div_ceil(self.ramp.max(1)).min(n)
    }
}

impl<P: Problem + ?Sized> Selector<P> for StochasticSubset {
    fn select(&mut self, problem: &P, ctx: &SelectContext<'_>, rng: &mut GmmRng) -> Result<LatentConfig> {
        let n = problem.latent_len();
        let touching = problem.touching_config(ctx.w_prev);
        let mut z = ctx.z_prev.cloned().unwrap_or_else(|| touching.clone());
        for i in index::sample(rng, n, self.subset_size(n, ctx.t)) {
            z[i] = touching[i];
        }
        Ok(repair_to_valid(problem, ctx.w_prev, ctx.v_prev, ctx.tol, z, None))
    }
}

/// Bias that scores each example's latent value by the loss of a model
/// trained without that example's fold:
/// `g(b, w) = -sum_i loss(w_fold(i), x_i, y_i, z_i)`.
///
/// Folds are a round-robin split of one seeded shuffle, fixed for the run.
/// Each fold model minimizes the bound over the other folds with their
/// latent values fixed at the previous configuration.
#[derive(Debug, Clone)]
pub struct MultifoldBias {
    pub folds: usize,
    fold_of: Vec<usize>,
    models: Vec<Solution>,
}

impl MultifoldBias {
    pub fn new(folds: usize) -> Self {
        MultifoldBias {
            folds,
            fold_of: Vec::new(),
            models: Vec::new(),
        }
    }

    /// Fold index of every example, once assigned.
    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    /// Fold models from the last proposal.
    pub fn models(&self) -> &[Solution] {
        &self.models
    }

    pub fn assign_folds(&mut self, n: usize, seed: u64) {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(seed, Stream::Folds));
        self.fold_of = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            self.fold_of[i] = pos % self.folds;
        }
    }

    /// Trains the fold models for the given latent configuration.
    pub fn train(&mut self, problem: &LssvmProblem, z: &LatentConfig, warm_start: &[f64]) -> Result<()> {
        let n = problem.n();
        let folds = self.folds;
        let fold_of = &self.fold_of;
        self.models = (0..folds)
            .into_par_iter()
            .map(|k| {
                let rest: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k).collect();
                solve_bound(problem, &rest, z, warm_start, &problem.solver).map(|s| s.w)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(())
    }

    /// Per-example argmin of the held-out loss. Ties go to the value the
    /// greedy (CCCP) step would pick under `w_prev`, then to the lowest index.
    pub fn preferred(&self, problem: &LssvmProblem, w_prev: &[f64]) -> LatentConfig {
        LatentConfig(
            (0..problem.n())
                .map(|i| {
                    let model = &self.models[self.fold_of[i]];
                    let greedy = problem.best_latent(w_prev, i);
                    let losses: Vec<f64> = (0..problem.examples[i].latent_count())
                        .map(|z| problem.example_loss(model, i, z))
                        .collect();
                    let lowest = losses.iter().copied().fold(f64::INFINITY, f64::min);
                    if losses[greedy] == lowest {
                        greedy
                    } else {
                        losses.iter().position(|&l| l == lowest).expect("nonempty domain")
                    }
                })
                .collect(),
        )
    }
}

impl BiasFunction<LssvmProblem> for MultifoldBias {
    fn proposal(&mut self, problem: &LssvmProblem, ctx: &SelectContext<'_>, _rng: &mut GmmRng) -> Result<LatentConfig> {
        if self.fold_of.len() != problem.n() {
            if self.folds < 2 || self.folds > problem.n() {
                return Err(crate::error::GmmError::config(
                    "folds",
                    format!("need 2 <= K <= n, got K = {} with n = {}", self.folds, problem.n()),
                ));
            }
            self.assign_folds(problem.n(), ctx.run_seed);
        }
        let previous = match ctx.z_prev {
            Some(z) => z.clone(),
            None => problem.touching_config(ctx.w_prev),
        };
        self.train(problem, &previous, ctx.w_prev)?;
        Ok(self.preferred(problem, ctx.w_prev))
    }

    fn value(&self, problem: &LssvmProblem, z: &LatentConfig) -> f64 {
        -(0..problem.n())
            .map(|i| problem.example_loss(&self.models[self.fold_of[i]], i, z[i]))
            .sum::<f64>()
    }
}
