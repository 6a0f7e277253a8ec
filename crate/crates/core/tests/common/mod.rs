//! Independent reference implementations used as test oracles. None of them
//! calls into the engine; they share only the data types and, for the
//! standalone CCCP loop, the convex bound solver.

#![allow(dead_code)]

use gmm_core::lssvm::{solve_bound, LssvmProblem};
use gmm_core::{Dataset, LatentConfig};

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Nearest center with strict comparison, so ties go to the lowest index.
pub fn lloyd_assign(data: &Dataset, centers: &[Vec<f64>]) -> Vec<usize> {
    data.points()
        .map(|x| {
            let mut best = (0, f64::INFINITY);
            for (j, c) in centers.iter().enumerate() {
                let d = sq_dist(x, c);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best.0
        })
        .collect()
}

/// Cluster means, accumulated in point order; empty clusters at the origin.
pub fn lloyd_means(data: &Dataset, z: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; data.dim()]; k];
    let mut counts = vec![0usize; k];
    for (x, &j) in data.points().zip(z) {
        counts[j] += 1;
        for (s, v) in sums[j].iter_mut().zip(x) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

/// Textbook Lloyd iteration: returns the centers after every update, stopping
/// once an update leaves the assignment unchanged.
pub fn lloyd(data: &Dataset, init: Vec<Vec<f64>>, max_iters: usize) -> Vec<Vec<Vec<f64>>> {
    let k = init.len();
    let mut centers = init;
    let mut history = Vec::new();
    for _ in 0..max_iters {
        let z = lloyd_assign(data, &centers);
        centers = lloyd_means(data, &z, k);
        history.push(centers.clone());
        if lloyd_assign(data, &centers) == z {
            break;
        }
    }
    history
}

pub fn sse(data: &Dataset, centers: &[Vec<f64>]) -> f64 {
    data.points()
        .map(|x| centers.iter().map(|c| sq_dist(x, c)).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Calls `f` on every configuration in `{0..k}^n`, in lexicographic order.
pub fn for_each_config(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut z = vec![0usize; n];
    loop {
        f(&z);
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            z[i] += 1;
            if z[i] < k {
                break;
            }
            z[i] = 0;
            i += 1;
        }
    }
}

/// Global minimum of the k-means objective by enumerating all partitions.
pub fn kmeans_global_min(data: &Dataset, k: usize) -> f64 {
    let mut best = f64::INFINITY;
    for_each_config(data.n(), k, |z| {
        let centers = lloyd_means(data, z, k);
        let value: f64 = data.points().zip(z).map(|(x, &j)| sq_dist(x, &centers[j])).sum();
        best = best.min(value);
    });
    best
}

/// `max_{y,z} (w.phi(x_i,y,z) + delta(y,y_i))` by direct enumeration.
fn augmented_max(p: &LssvmProblem, w: &[f64], i: usize) -> f64 {
    let ex = &p.examples[i];
    let mut best = f64::NEG_INFINITY;
    for y in 0..p.label_count {
        for z in 0..ex.latent_count() {
            best = best.max(dot(w, ex.phi(y, z)) + p.delta[ex.label * p.label_count + y]);
        }
    }
    best
}

/// Objective of the latent structural SVM, enumerating both maxima.
pub fn lssvm_objective(p: &LssvmProblem, w: &[f64]) -> f64 {
    let n = p.n();
    let sum: f64 = (0..n)
        .map(|i| {
            let ex = &p.examples[i];
            let latent = (0..ex.latent_count())
                .map(|z| dot(w, ex.phi(ex.label, z)))
                .fold(f64::NEG_INFINITY, f64::max);
            augmented_max(p, w, i) - latent
        })
        .sum();
    0.5 * p.lambda * dot(w, w) + sum / n as f64
}

/// Bound of the latent structural SVM with the latent values fixed.
pub fn lssvm_bound(p: &LssvmProblem, w: &[f64], z: &[usize]) -> f64 {
    let n = p.n();
    let sum: f64 = (0..n)
        .map(|i| {
            let ex = &p.examples[i];
            augmented_max(p, w, i) - dot(w, ex.phi(ex.label, z[i]))
        })
        .sum();
    0.5 * p.lambda * dot(w, w) + sum / n as f64
}

/// Latent imputation of CCCP: best latent value for the true label, ties to
/// the lowest index.
pub fn impute(p: &LssvmProblem, w: &[f64]) -> Vec<usize> {
    p.examples
        .iter()
        .map(|ex| {
            let mut best = (0, f64::NEG_INFINITY);
            for z in 0..ex.latent_count() {
                let s = dot(w, ex.phi(ex.label, z));
                if s > best.1 {
                    best = (z, s);
                }
            }
            best.0
        })
        .collect()
}

pub struct CccpStep {
    pub latent: Vec<usize>,
    pub w: Vec<f64>,
}

/// Standalone CCCP from an initial latent configuration: fit, impute, refit,
/// until the imputation leaves the objective gap below `epsilon`.
pub fn cccp(p: &LssvmProblem, z0: &[usize], epsilon: f64, max_iters: usize) -> (Vec<f64>, Vec<CccpStep>) {
    let all: Vec<usize> = (0..p.n()).collect();
    let mut w = solve_bound(p, &all, &LatentConfig(z0.to_vec()), &[], &p.solver)
        .unwrap()
        .w
        .0;
    let mut steps = Vec::new();
    if lssvm_bound(p, &w, z0) - lssvm_objective(p, &w) < epsilon {
        return (w, steps);
    }
    for _ in 0..max_iters {
        let z = impute(p, &w);
        w = solve_bound(p, &all, &LatentConfig(z.clone()), &w, &p.solver)
            .unwrap()
            .w
            .0;
        let gap = lssvm_bound(p, &w, &z) - lssvm_objective(p, &w);
        steps.push(CccpStep {
            latent: z,
            w: w.clone(),
        });
        if gap < epsilon {
            break;
        }
    }
    (w, steps)
}

/// Held-out bias of a latent configuration: minus the summed per-example
/// loss under the model of each example's fold.
pub fn multifold_bias(p: &LssvmProblem, models: &[Vec<f64>], fold_of: &[usize], z: &[usize]) -> f64 {
    -(0..p.n())
        .map(|i| {
            let w = &models[fold_of[i]];
            let ex = &p.examples[i];
            augmented_max(p, w, i) - dot(w, ex.phi(ex.label, z[i]))
        })
        .sum::<f64>()
}
