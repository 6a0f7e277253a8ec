//! Latent structural SVM as a bound-optimization problem.
//!
//! Objective, with feature map `phi` and label loss `delta`:
//!
//! ```text
//! F(w) = lambda/2 |w|^2
//!      + 1/n sum_i [ max_{y,z} (w.phi(x_i,y,z) + delta(y,y_i)) - max_z w.phi(x_i,y_i,z) ]
//! ```
//!
//! Fixing `z_i` in the subtracted term gives a convex piecewise-quadratic
//! upper bound. CCCP is the greedy choice `z_i = argmax_z w.phi(x_i,y_i,z)`.

mod selectors;
pub mod shift;
pub mod solver;

use serde::{Deserialize, Serialize};

use crate::engine::{LatentConfig, Problem, Solution};
use crate::error::{GmmError, Result};

pub use selectors::{MultifoldBias, StochasticSubset};
pub use solver::{min_norm_subgradient, solve_bound, BoundSolution, SolverConfig};

/// Per-example latent values, `z_i in 0..|Z_i|`.
pub type LatentAssignment = LatentConfig;

/// One training example with its feature map tabulated over `(y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredExample {
    pub label: usize,
    label_count: usize,
    latent_count: usize,
    dim: usize,
    /// `phi(x, y, z)` at offset `(y * latent_count + z) * dim`.
    features: Vec<f64>,
}

impl StructuredExample {
    /// `phi(y, z)` is called for every label and latent value.
    pub fn tabulate(
        label: usize,
        label_count: usize,
        latent_count: usize,
        dim: usize,
        mut phi: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        if label >= label_count {
            return Err(GmmError::InvalidArgument(format!(
                "label {label} outside 0..{label_count}"
            )));
        }
        if latent_count == 0 {
            return Err(GmmError::InvalidArgument("latent domain must be nonempty".into()));
        }
        let mut features = Vec::with_capacity(label_count * latent_count * dim);
        for y in 0..label_count {
            for z in 0..latent_count {
                let f = phi(y, z);
                if f.len() != dim || f.iter().any(|v| !v.is_finite()) {
                    return Err(GmmError::InvalidArgument(format!(
                        "feature map for (y={y}, z={z}) must be {dim} finite values"
                    )));
                }
                features.extend(f);
            }
        }
        Ok(StructuredExample {
            label,
            label_count,
            latent_count,
            dim,
            features,
        })
    }

    pub fn latent_count(&self) -> usize {
        self.latent_count
    }

    pub fn phi(&self, y: usize, z: usize) -> &[f64] {
        let off = (y * self.latent_count + z) * self.dim;
        &self.features[off..off + self.dim]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct LssvmProblem {
    pub examples: Vec<StructuredExample>,
    pub label_count: usize,
    pub dim: usize,
    pub lambda: f64,
    /// `delta[y_true * label_count + y]`.
    pub delta: Vec<f64>,
    pub solver: SolverConfig,
}

impl LssvmProblem {
    pub fn new(examples: Vec<StructuredExample>, label_count: usize, lambda: f64, delta: Vec<f64>) -> Result<Self> {
        if label_count < 2 {
            return Err(GmmError::InvalidArgument("need at least two labels".into()));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(GmmError::config("lambda", format!("must be positive, got {lambda}")));
        }
        if delta.len() != label_count * label_count {
            return Err(GmmError::InvalidArgument("loss table must be |Y| x |Y|".into()));
        }
        for y in 0..label_count {
            for y2 in 0..label_count {
                let v = delta[y * label_count + y2];
                if !(v >= 0.0) || (y == y2 && v != 0.0) {
                    return Err(GmmError::InvalidArgument(format!(
                        "loss must be nonnegative and zero on the diagonal; delta({y},{y2}) = {v}"
                    )));
                }
            }
        }
        let dim = examples.first().map_or(0, |e| e.dim);
        if examples.is_empty() || examples.iter().any(|e| e.dim != dim || e.label_count != label_count) {
            return Err(GmmError::InvalidArgument(
                "examples must be nonempty and share label set and dimension".into(),
            ));
        }
        Ok(LssvmProblem {
            examples,
            label_count,
            dim,
            lambda,
            delta,
            solver: SolverConfig::default(),
        })
    }

    pub fn zero_one_loss(label_count: usize) -> Vec<f64> {
        (0..label_count * label_count)
            .map(|i| if i / label_count == i % label_count { 0.0 } else { 1.0 })
            .collect()
    }

    pub fn n(&self) -> usize {
        self.examples.len()
    }

    pub fn delta(&self, y_true: usize, y: usize) -> f64 {
        self.delta[y_true * self.label_count + y]
    }

    pub fn score(&self, w: &[f64], i: usize, y: usize, z: usize) -> f64 {
        dot(w, self.examples[i].phi(y, z))
    }

    /// `max_{y,z} (w.phi(x_i,y,z) + delta(y, y_i))`.
    pub fn loss_augmented_max(&self, w: &[f64], i: usize) -> f64 {
        let ex = &self.examples[i];
        let mut best = f64::NEG_INFINITY;
        for y in 0..self.label_count {
            let d = self.delta(ex.label, y);
            for z in 0..ex.latent_count {
                best = best.max(dot(w, ex.phi(y, z)) + d);
            }
        }
        best
    }

    /// `argmax_z w.phi(x_i, y_i, z)`, ties to the lowest index.
    pub fn best_latent(&self, w: &[f64], i: usize) -> usize {
        let ex = &self.examples[i];
        let mut best = (0, f64::NEG_INFINITY);
        for z in 0..ex.latent_count {
            let s = dot(w, ex.phi(ex.label, z));
            if s > best.1 {
                best = (z, s);
            }
        }
        best.0
    }

    /// Per-example term with the latent value fixed:
    /// `max_{y',z'} (w.phi(x_i,y',z') + delta(y',y_i)) - w.phi(x_i,y_i,z)`.
    pub fn example_loss(&self, w: &[f64], i: usize, z: usize) -> f64 {
        let ex = &self.examples[i];
        self.loss_augmented_max(w, i) - dot(w, ex.phi(ex.label, z))
    }

    fn regularizer(&self, w: &[f64]) -> f64 {
        0.5 * self.lambda * dot(w, w)
    }

    /// Bound restricted to `subset` and normalized by its size.
    pub fn bound_value_on(&self, w: &[f64], subset: &[usize], z: &LatentConfig) -> f64 {
        let sum: f64 = subset.iter().map(|&i| self.example_loss(w, i, z[i])).sum();
        self.regularizer(w) + sum / subset.len() as f64
    }

    /// Exhaustive `argmax_{y,z} w.phi(x,y,z)`, ties to the lowest `(y, z)`.
    pub fn predict(&self, w: &[f64], example: &StructuredExample) -> (usize, usize) {
        let mut best = ((0, 0), f64::NEG_INFINITY);
        for y in 0..self.label_count {
            for z in 0..example.latent_count {
                let s = dot(w, example.phi(y, z));
                if s > best.1 {
                    best = ((y, z), s);
                }
            }
        }
        best.0
    }

    /// Fraction of training examples whose predicted label is wrong.
    pub fn training_error(&self, w: &[f64]) -> f64 {
        let wrong = self
            .examples
            .iter()
            .filter(|ex| self.predict(w, ex).0 != ex.label)
            .count();
        wrong as f64 / self.n() as f64
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.n()).collect()
    }
}

impl Problem for LssvmProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn latent_len(&self) -> usize {
        self.n()
    }

    fn domain_size(&self, i: usize) -> usize {
        self.examples[i].latent_count
    }

    fn objective(&self, w: &[f64]) -> f64 {
        let sum: f64 = (0..self.n())
            .map(|i| self.example_loss(w, i, self.best_latent(w, i)))
            .sum();
        self.regularizer(w) + sum / self.n() as f64
    }

    fn bound_value(&self, w: &[f64], z: &LatentConfig) -> f64 {
        let sum: f64 = (0..self.n()).map(|i| self.example_loss(w, i, z[i])).sum();
        self.regularizer(w) + sum / self.n() as f64
    }

    fn optimize_bound(&self, z: &LatentConfig, warm_start: &[f64]) -> Result<Solution> {
        Ok(solve_bound(self, &self.all_indices(), z, warm_start, &self.solver)?.w)
    }

    fn touching_config(&self, w: &[f64]) -> LatentConfig {
        LatentConfig((0..self.n()).map(|i| self.best_latent(w, i)).collect())
    }

    fn coordinate_delta(&self, w: &[f64], z: &LatentConfig, i: usize, value: usize) -> f64 {
        let ex = &self.examples[i];
        (dot(w, ex.phi(ex.label, z[i])) - dot(w, ex.phi(ex.label, value))) / self.n() as f64
    }

    /// `lambda/2 |w|^2` plus a convex function: modulus `lambda`.
    fn strong_convexity(&self, _z: &LatentConfig) -> Option<f64> {
        Some(self.lambda)
    }
}

/// Trained weights with the metadata needed to reload them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub d: usize,
    pub labels: usize,
    pub lambda: f64,
    pub w: Vec<f64>,
}

impl WeightsFile {
    pub fn new(problem: &LssvmProblem, w: &[f64]) -> Self {
        WeightsFile {
            d: problem.dim,
            labels: problem.label_count,
            lambda: problem.lambda,
            w: w.to_vec(),
        }
    }
}
