//! Exact minimization of a fixed-latent bound.
//!
//! The bound restricted to examples `S` is a structural SVM primal
//!
//! ```text
//! P(w) = lambda/2 |w|^2 + 1/m sum_{i in S} max_k (c_ik + a_ik . w)
//! ```
//!
//! with one candidate `k = (y, z')` per label and latent value,
//! `a_ik = phi(x_i,y,z') - phi(x_i,y_i,z_i)` and `c_ik = delta(y, y_i)`.
//! Its dual is a concave quadratic over a product of simplices,
//! `w(alpha) = -1/(lambda m) sum alpha_ik a_ik`, which we maximize by
//! cyclic block coordinate ascent with pairwise (SMO-style) moves and exact
//! line search. Near-duplicate examples make that slow, so every
//! [`FACE_STEP_EVERY`] epochs the solver also moves toward the exact dual
//! maximizer on the current support (a Newton step on the face), which is
//! kept only if it raises the dual. The duality gap `1/m sum_i (max_k s_ik - sum_k alpha_ik s_ik)`,
//! with `s_ik = c_ik + a_ik . w`, certifies the primal suboptimality.

use serde::{Deserialize, Serialize};

use super::{dot, LssvmProblem};
use crate::engine::{LatentConfig, Solution};
use crate::error::{GmmError, Result};

/// Epochs between face steps.
pub const FACE_STEP_EVERY: usize = 10;

/// Proximal weight of the face steps, relative to the largest Gram diagonal.
const PROXIMAL_WEIGHT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Contract tolerance: a returned `w` is within `tau_rel * (1 + |P(w)|)` of optimal.
    pub tau_rel: f64,
    /// Gap at which the solver stops early, relative to `1 + |P(w)|`.
    pub target_rel: f64,
    pub max_epochs: usize,
    /// Pairwise moves per block visit.
    pub inner_moves: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau_rel: 1e-6,
            target_rel: 1e-13,
            max_epochs: 20_000,
            inner_moves: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundSolution {
    pub w: Solution,
    /// Primal value `P(w)`.
    pub value: f64,
    /// Certified duality gap.
    pub gap: f64,
    pub epochs: usize,
    /// Dual weights per example of the subset, over candidates `y * |Z_i| + z'`.
    pub alpha: Vec<Vec<f64>>,
}

struct Block {
    /// Candidate directions, row-major `K x d`.
    a: Vec<f64>,
    c: Vec<f64>,
}

impl Block {
    fn new(problem: &LssvmProblem, i: usize, zi: usize) -> Self {
        let ex = &problem.examples[i];
        let d = problem.dim;
        let anchor = ex.phi(ex.label, zi);
        let k = problem.label_count * ex.latent_count();
        let mut a = Vec::with_capacity(k * d);
        let mut c = Vec::with_capacity(k);
        for y in 0..problem.label_count {
            for z in 0..ex.latent_count() {
                a.extend(ex.phi(y, z).iter().zip(anchor).map(|(f, g)| f - g));
                c.push(problem.delta(ex.label, y));
            }
        }
        Block { a, c }
    }

    fn len(&self) -> usize {
        self.c.len()
    }

    fn row(&self, k: usize, d: usize) -> &[f64] {
        &self.a[k * d..(k + 1) * d]
    }

    fn scores(&self, w: &[f64], out: &mut Vec<f64>) {
        let d = w.len();
        out.clear();
        out.extend((0..self.len()).map(|k| self.c[k] + dot(self.row(k, d), w)));
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Minimizes the bound indexed by `z` over the examples in `subset`.
///
/// The dual starts from the candidates that are active at `warm_start`,
/// which makes consecutive solves along a run cheap. Deterministic.
pub fn solve_bound(
    problem: &LssvmProblem,
    subset: &[usize],
    z: &LatentConfig,
    warm_start: &[f64],
    cfg: &SolverConfig,
) -> Result<BoundSolution> {
    if subset.is_empty() {
        return Err(GmmError::InvalidArgument(
            "bound solver needs at least one example".into(),
        ));
    }
    let d = problem.dim;
    let m = subset.len() as f64;
    let scale = problem.lambda * m;
    let blocks: Vec<Block> = subset.iter().map(|&i| Block::new(problem, i, z[i])).collect();

    let warm = warm_start.len() == d && warm_start.iter().all(|v| v.is_finite());
    let mut scores = Vec::new();
    let mut alpha: Vec<Vec<f64>> = blocks
        .iter()
        .zip(subset)
        .map(|(b, &i)| {
            let mut a = vec![0.0; b.len()];
            let k = if warm {
                b.scores(warm_start, &mut scores);
                argmax(&scores)
            } else {
                problem.examples[i].label * problem.examples[i].latent_count() + z[i]
            };
            a[k] = 1.0;
            a
        })
        .collect();

    let recompute_w = |alpha: &[Vec<f64>]| -> Vec<f64> {
        let mut u = vec![0.0; d];
        for (b, al) in blocks.iter().zip(alpha) {
            for (k, &ak) in al.iter().enumerate() {
                if ak != 0.0 {
                    for (uj, aj) in u.iter_mut().zip(b.row(k, d)) {
                        *uj += ak * aj;
                    }
                }
            }
        }
        u.iter().map(|uj| -uj / scale).collect()
    };

    let primal_and_gap = |w: &[f64], alpha: &[Vec<f64>], scores: &mut Vec<f64>| -> (f64, f64) {
        let mut loss = 0.0;
        let mut gap = 0.0;
        for (b, al) in blocks.iter().zip(alpha) {
            b.scores(w, scores);
            let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let avg: f64 = al.iter().zip(scores.iter()).map(|(a, s)| a * s).sum();
            loss += top;
            gap += (top - avg).max(0.0);
        }
        (0.5 * problem.lambda * dot(w, w) + loss / m, gap / m)
    };

    let mut w = recompute_w(&alpha);
    let (mut value, mut gap) = primal_and_gap(&w, &alpha, &mut scores);
    let mut epochs = 0;
    while gap > cfg.target_rel * (1.0 + value.abs()) && epochs < cfg.max_epochs {
        epochs += 1;
        for (b, al) in blocks.iter().zip(alpha.iter_mut()) {
            for _ in 0..cfg.inner_moves {
                b.scores(&w, &mut scores);
                let up = argmax(&scores);
                let mut down = None;
                for (k, &ak) in al.iter().enumerate() {
                    if ak > 0.0 && down.is_none_or(|j: usize| scores[k] < scores[j]) {
                        down = Some(k);
                    }
                }
                let down = down.expect("alpha lies on the simplex");
                let diff = scores[up] - scores[down];
                if up == down || diff <= 0.0 {
                    break;
                }
                let (ru, rd) = (b.row(up, d), b.row(down, d));
                let q: f64 = ru.iter().zip(rd).map(|(x, y)| (x - y) * (x - y)).sum();
                let theta = if q > 0.0 {
                    (scale * diff / q).min(al[down])
                } else {
                    al[down]
                };
                if theta <= 0.0 {
                    break;
                }
                al[up] += theta;
                al[down] -= theta;
                if al[down] < 1e-300 {
                    al[down] = 0.0;
                }
                for ((wj, x), y) in w.iter_mut().zip(ru).zip(rd) {
                    *wj -= theta * (x - y) / scale;
                }
            }
        }
        w = recompute_w(&alpha);
        if epochs % FACE_STEP_EVERY == 0 && face_step(&blocks, &mut alpha, &w, scale) {
            w = recompute_w(&alpha);
        }
        (value, gap) = primal_and_gap(&w, &alpha, &mut scores);
    }

    let tolerance = cfg.tau_rel * (1.0 + value.abs());
    if gap > tolerance {
        return Err(GmmError::SolverNotConverged { gap, tolerance, epochs });
    }
    Ok(BoundSolution {
        w: Solution(w),
        value,
        gap,
        epochs,
        alpha,
    })
}

/// Scaled dual objective `sum alpha.c - scale/2 |w(alpha)|^2`.
fn dual_value(blocks: &[Block], alpha: &[Vec<f64>], w: &[f64], scale: f64) -> f64 {
    let linear: f64 = blocks
        .iter()
        .zip(alpha)
        .map(|(b, al)| al.iter().zip(&b.c).map(|(a, c)| a * c).sum::<f64>())
        .sum();
    linear - 0.5 * scale * dot(w, w)
}

/// Active-set refinement of the dual on the faces of the simplices.
///
/// Starting from the support of `alpha`, repeatedly takes a proximal Newton
/// step toward the dual maximizer over the affine hull of the current
/// support, as far as the simplices allow. The small proximal term keeps the
/// face system nonsingular when the Gram matrix is not: along a direction in
/// which the dual rises linearly the step overshoots and is clipped. A
/// blocked move drops the blocking candidate; once the dual stops rising
/// on a face, the best-scoring outside candidate of every block whose score beats
/// the face level joins the support. Stops at a KKT point or after a bounded
/// number of rounds. The result is kept only if it raises the dual; returns
/// whether `alpha` changed.
fn face_step(blocks: &[Block], alpha: &mut [Vec<f64>], w: &[f64], scale: f64) -> bool {
    let d = w.len();
    let before = dual_value(blocks, alpha, w, scale);
    let saved: Vec<Vec<f64>> = alpha.to_vec();
    let mut support: Vec<Vec<bool>> = alpha.iter().map(|al| al.iter().map(|&a| a > 0.0).collect()).collect();
    let candidates: usize = blocks.iter().map(Block::len).sum();
    let mut level = before;
    let mut scores = Vec::new();

    for _round in 0..10 * candidates + 50 {
        let members: Vec<(usize, usize)> = support
            .iter()
            .enumerate()
            .flat_map(|(i, sup)| sup.iter().enumerate().filter(|(_, &on)| on).map(move |(k, _)| (i, k)))
            .collect();
        let Some(x) = solve_face(blocks, alpha, &members, scale, d) else {
            break;
        };

        let mut t = 1.0f64;
        let mut blocking = None;
        for (c, &(i, k)) in members.iter().enumerate() {
            let delta = x[c] - alpha[i][k];
            if delta < 0.0 && alpha[i][k] / -delta < t {
                t = alpha[i][k] / -delta;
                blocking = Some((i, k));
            }
        }
        for (c, &(i, k)) in members.iter().enumerate() {
            alpha[i][k] = (alpha[i][k] + t * (x[c] - alpha[i][k])).max(0.0);
        }
        if let Some((i, k)) = blocking {
            alpha[i][k] = 0.0;
            support[i][k] = false;
            for al in alpha.iter_mut() {
                let total: f64 = al.iter().sum();
                al.iter_mut().for_each(|a| *a /= total);
            }
            continue;
        }
        let current = weights(blocks, alpha, d, scale);
        let value = dual_value(blocks, alpha, &current, scale);
        let rising = value - level > 1e-14 * (1.0 + value.abs());
        level = level.max(value);
        if rising {
            continue;
        }

        let mut added = false;
        for (i, b) in blocks.iter().enumerate() {
            b.scores(&current, &mut scores);
            let face = (0..b.len())
                .filter(|&k| support[i][k])
                .map(|k| scores[k])
                .fold(f64::NEG_INFINITY, f64::max);
            let outside = (0..b.len())
                .filter(|&k| !support[i][k])
                .max_by(|&x, &y| scores[x].total_cmp(&scores[y]));
            if let Some(k) = outside {
                if scores[k] > face + 1e-13 * (1.0 + face.abs()) {
                    support[i][k] = true;
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
    }

    let current = weights(blocks, alpha, d, scale);
    if dual_value(blocks, alpha, &current, scale) > before {
        true
    } else {
        alpha.clone_from_slice(&saved);
        false
    }
}

/// `w(alpha) = -1/scale sum alpha_ik a_ik`.
fn weights(blocks: &[Block], alpha: &[Vec<f64>], d: usize, scale: f64) -> Vec<f64> {
    let mut u = vec![0.0; d];
    for (b, al) in blocks.iter().zip(alpha) {
        for (k, &ak) in al.iter().enumerate() {
            if ak != 0.0 {
                for (uj, aj) in u.iter_mut().zip(b.row(k, d)) {
                    *uj += ak * aj;
                }
            }
        }
    }
    u.iter().map(|v| -v / scale).collect()
}

/// Maximizer over the affine hull of the given support of the dual minus a
/// small proximal term around the current `alpha`. Returns the support
/// weights in the order given; `members` lists each block's support
/// contiguously.
///
/// Works in reduced coordinates: within a block the first support member
/// absorbs the simplex constraint and every other member `k` keeps a free
/// weight whose direction is `a_k - a_first`. The Newton system is then
/// square in the number of ties rather than in the support size.
fn solve_face(
    blocks: &[Block],
    alpha: &[Vec<f64>],
    members: &[(usize, usize)],
    scale: f64,
    d: usize,
) -> Option<Vec<f64>> {
    // (anchor position in `members`, member position, block, candidate)
    let mut free: Vec<(usize, usize, usize, usize)> = Vec::new();
    let mut anchor = 0;
    for (c, &(i, k)) in members.iter().enumerate() {
        if c == 0 || members[c - 1].0 != i {
            anchor = c;
        } else {
            free.push((anchor, c, i, k));
        }
    }
    let mut x: Vec<f64> = members.iter().map(|&(i, k)| alpha[i][k]).collect();
    let r = free.len();
    if r == 0 {
        return Some(x);
    }

    let u: Vec<f64> = {
        let mut u = vec![0.0; d];
        for &(i, k) in members {
            for (uj, aj) in u.iter_mut().zip(blocks[i].row(k, d)) {
                *uj += alpha[i][k] * aj;
            }
        }
        u
    };
    let directions: Vec<Vec<f64>> = free
        .iter()
        .map(|&(a, _, i, k)| {
            let first = blocks[i].row(members[a].1, d);
            blocks[i].row(k, d).iter().zip(first).map(|(x, y)| x - y).collect()
        })
        .collect();
    let mut mat = vec![0.0; r * r];
    let mut rhs = vec![0.0; r];
    for (p, (&(a, _, i, k), bp)) in free.iter().zip(&directions).enumerate() {
        for (q, bq) in directions.iter().enumerate().skip(p) {
            let v = dot(bp, bq) / scale;
            mat[p * r + q] = v;
            mat[q * r + p] = v;
        }
        rhs[p] = blocks[i].c[k] - blocks[i].c[members[a].1] - dot(bp, &u) / scale;
    }
    let diagonal = (0..r).map(|p| mat[p * r + p]).fold(0.0, f64::max);
    let rho = PROXIMAL_WEIGHT * diagonal.max(f64::MIN_POSITIVE);
    for p in 0..r {
        mat[p * r + p] += rho;
    }
    let step = solve_dense(mat, rhs, r)?;
    for (&(a, c, _, _), s) in free.iter().zip(step) {
        x[c] += s;
        x[a] -= s;
    }
    Some(x)
}

/// Solves a square system by Gaussian elimination with complete pivoting.
/// Rank-deficient systems get the solution with free unknowns at zero;
/// inconsistent ones return `None`.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
    let tol = 1e-12 * scale * n as f64;
    let mut col_of: Vec<usize> = (0..n).collect();
    let mut rank = 0;
    for r in 0..n {
        let mut best = (r, r, 0.0);
        for i in r..n {
            for j in r..n {
                let v = a[i * n + j].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 <= tol {
            break;
        }
        let (pi, pj, _) = best;
        if pi != r {
            for j in 0..n {
                a.swap(r * n + j, pi * n + j);
            }
            b.swap(r, pi);
        }
        if pj != r {
            for i in 0..n {
                a.swap(i * n + r, i * n + pj);
            }
            col_of.swap(r, pj);
        }
        let pivot = a[r * n + r];
        for i in r + 1..n {
            let f = a[i * n + r] / pivot;
            if f != 0.0 {
                for j in r..n {
                    a[i * n + j] -= f * a[r * n + j];
                }
                b[i] -= f * b[r];
            }
        }
        rank += 1;
    }
    let rhs_scale = b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    if b[rank..].iter().any(|v| v.abs() > 1e-9 * rhs_scale) {
        return None;
    }
    let mut y = vec![0.0; n];
    for r in (0..rank).rev() {
        let tail: f64 = (r + 1..rank).map(|j| a[r * n + j] * y[j]).sum();
        y[r] = (b[r] - tail) / a[r * n + r];
    }
    let mut x = vec![0.0; n];
    for (r, &c) in col_of.iter().enumerate() {
        x[c] = y[r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Norm of the smallest subgradient of the bound at `w`, taking as active
/// every candidate within `active_tol` of its example's maximum.
///
/// Computed from scratch by pairwise Frank-Wolfe over the active faces, so
/// it shares nothing with the solver's dual state.
pub fn min_norm_subgradient(
    problem: &LssvmProblem,
    subset: &[usize],
    z: &LatentConfig,
    w: &[f64],
    active_tol: f64,
) -> f64 {
    let m = subset.len() as f64;
    let mut faces: Vec<Vec<Vec<f64>>> = Vec::with_capacity(subset.len());
    for &i in subset {
        let ex = &problem.examples[i];
        let anchor = ex.phi(ex.label, z[i]);
        let mut cands = Vec::new();
        let mut top = f64::NEG_INFINITY;
        for y in 0..problem.label_count {
            for zz in 0..ex.latent_count() {
                let a: Vec<f64> = ex.phi(y, zz).iter().zip(anchor).map(|(f, g)| f - g).collect();
                let s = problem.delta(ex.label, y) + dot(&a, w);
                top = top.max(s);
                cands.push((s, a));
            }
        }
        faces.push(
            cands
                .into_iter()
                .filter(|(s, _)| *s >= top - active_tol)
                .map(|(_, a)| a)
                .collect(),
        );
    }

    let mut beta: Vec<Vec<f64>> = faces
        .iter()
        .map(|f| {
            let mut b = vec![0.0; f.len()];
            b[0] = 1.0;
            b
        })
        .collect();
    let mut g: Vec<f64> = w.iter().map(|x| problem.lambda * x).collect();
    for f in &faces {
        for (gj, aj) in g.iter_mut().zip(&f[0]) {
            *gj += aj / m;
        }
    }

    for _sweep in 0..10_000 {
        let mut moved = 0.0f64;
        for (f, b) in faces.iter().zip(beta.iter_mut()) {
            if f.len() < 2 {
                continue;
            }
            let inner: Vec<f64> = f.iter().map(|a| dot(a, &g)).collect();
            let toward = argmax(&inner.iter().map(|v| -v).collect::<Vec<_>>());
            let away = (0..f.len())
                .filter(|&k| b[k] > 0.0)
                .max_by(|&x, &y| inner[x].total_cmp(&inner[y]))
                .expect("beta lies on the simplex");
            if toward == away {
                continue;
            }
            let delta: Vec<f64> = f[toward].iter().zip(&f[away]).map(|(x, y)| (x - y) / m).collect();
            let dd = dot(&delta, &delta);
            if dd == 0.0 {
                continue;
            }
            let step = (-dot(&g, &delta) / dd).clamp(0.0, b[away]);
            if step <= 0.0 {
                continue;
            }
            b[toward] += step;
            b[away] -= step;
            for (gj, dj) in g.iter_mut().zip(&delta) {
                *gj += step * dj;
            }
            moved = moved.max(step);
        }
        if moved < 1e-15 {
            break;
        }
    }
    dot(&g, &g).sqrt()
}
