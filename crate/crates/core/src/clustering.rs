//! k-means as a bound-optimization problem.
//!
//! The objective is `F(mu) = sum_i min_j |x_i - mu_j|^2`. Fixing an
//! assignment `z` gives the quadratic upper bound `sum_i |x_i - mu_{z_i}|^2`,
//! minimized in closed form by cluster means. Lloyd's algorithm is the
//! greedy choice of `z` (nearest center).

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{LatentConfig, Problem, Solution};
use crate::error::{GmmError, Result};
use crate::rng::GmmRng;

/// Cluster assignment, `z_i in 0..k`.
pub type AssignConfig = LatentConfig;

/// `n` points of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(GmmError::InvalidArgument("dataset dimension must be at least 1".into()));
        }
        if values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(GmmError::InvalidArgument(format!(
                "{} values do not form rows of dimension {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(GmmError::InvalidArgument(format!(
                "non-finite value at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Dataset { dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(GmmError::InvalidArgument("rows have differing lengths".into()));
        }
        Dataset::new(rows.concat(), dim)
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for p in self.points() {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        let n = self.n() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// SHA-256 over the shape and the little-endian bytes of every value.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n() as u64).to_le_bytes());
        hasher.update((self.dim as u64).to_le_bytes());
        for v in &self.values {
            hasher.update(v.to_le_bytes());
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `k` centers of dimension `dim`, row-major. Flattened, this is the solution vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centers {
    pub k: usize,
    pub dim: usize,
    pub mu: Vec<f64>,
}

impl Centers {
    pub fn from_solution(w: &[f64], k: usize) -> Self {
        Centers {
            k,
            dim: w.len() / k,
            mu: w.to_vec(),
        }
    }

    pub fn center(&self, j: usize) -> &[f64] {
        &self.mu[j * self.dim..(j + 1) * self.dim]
    }

    pub fn to_solution(&self) -> Solution {
        Solution(self.mu.clone())
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest center; ties go to the lowest index.
#[inline]
fn nearest(x: &[f64], mu: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in mu.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// How empty clusters are placed by the bound minimizer. The bound does not
/// depend on an empty cluster's center, so any placement is a minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeadClusterRule {
    /// Collapse to the origin.
    #[default]
    Origin,
    /// Move to the points worst served by their assigned centers.
    RespawnFarthest,
}

#[derive(Debug, Clone, Copy)]
pub struct KMeansProblem<'a> {
    pub data: &'a Dataset,
    pub k: usize,
    pub dead_rule: DeadClusterRule,
}

impl<'a> KMeansProblem<'a> {
    pub fn new(data: &'a Dataset, k: usize) -> Self {
        KMeansProblem {
            data,
            k,
            dead_rule: DeadClusterRule::Origin,
        }
    }

    pub fn with_dead_rule(mut self, rule: DeadClusterRule) -> Self {
        self.dead_rule = rule;
        self
    }

    /// Sizes of the clusters under `z`.
    pub fn cluster_sizes(&self, z: &AssignConfig) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &j in z.iter() {
            sizes[j] += 1;
        }
        sizes
    }
}

/// `sum_i min_j |x_i - mu_j|^2`.
pub fn objective(data: &Dataset, centers: &[f64]) -> f64 {
    let dim = data.dim();
    data.points().map(|x| nearest(x, centers, dim).1).sum()
}

/// `sum_i |x_i - mu_{z_i}|^2`.
pub fn bound_value(data: &Dataset, centers: &[f64], z: &AssignConfig) -> f64 {
    let dim = data.dim();
    data.points()
        .zip(z.iter())
        .map(|(x, &j)| sq_dist(x, &centers[j * dim..(j + 1) * dim]))
        .sum()
}

/// Nearest-center assignment, ties to the lowest index.
pub fn nearest_assignment(data: &Dataset, centers: &[f64]) -> AssignConfig {
    let dim = data.dim();
    LatentConfig(data.points().map(|x| nearest(x, centers, dim).0).collect())
}

/// Cluster means under `z`; empty clusters go to the origin.
pub fn optimize_bound(data: &Dataset, z: &AssignConfig, k: usize) -> Centers {
    let dim = data.dim();
    let mut mu = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (x, &j) in data.points().zip(z.iter()) {
        counts[j] += 1;
        for (m, v) in mu[j * dim..(j + 1) * dim].iter_mut().zip(x) {
            *m += v;
        }
    }
    for (j, &c) in counts.iter().enumerate() {
        if c > 0 {
            let c = c as f64;
            mu[j * dim..(j + 1) * dim].iter_mut().for_each(|m| *m /= c);
        }
    }
    Centers { k, dim, mu }
}

fn respawn_dead(data: &Dataset, z: &AssignConfig, centers: &mut Centers) {
    let dim = data.dim();
    let mut counts = vec![0usize; centers.k];
    for &j in z.iter() {
        counts[j] += 1;
    }
    let dead: Vec<usize> = (0..centers.k).filter(|&j| counts[j] == 0).collect();
    if dead.is_empty() {
        return;
    }
    let mut residuals: Vec<(usize, f64)> = data
        .points()
        .zip(z.iter())
        .enumerate()
        .map(|(i, (x, &j))| (i, sq_dist(x, centers.center(j))))
        .collect();
    residuals.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (&j, &(i, _)) in dead.iter().zip(residuals.iter()) {
        centers.mu[j * dim..(j + 1) * dim].copy_from_slice(data.point(i));
    }
}

impl Problem for KMeansProblem<'_> {
    fn dim(&self) -> usize {
        self.k * self.data.dim()
    }

    fn latent_len(&self) -> usize {
        self.data.n()
    }

    fn domain_size(&self, _i: usize) -> usize {
        self.k
    }

    fn objective(&self, w: &[f64]) -> f64 {
        objective(self.data, w)
    }

    fn bound_value(&self, w: &[f64], z: &LatentConfig) -> f64 {
        bound_value(self.data, w, z)
    }

    fn optimize_bound(&self, z: &LatentConfig, _warm_start: &[f64]) -> Result<Solution> {
        let mut centers = optimize_bound(self.data, z, self.k);
        if self.dead_rule == DeadClusterRule::RespawnFarthest {
            respawn_dead(self.data, z, &mut centers);
        }
        Ok(centers.to_solution())
    }

    fn touching_config(&self, w: &[f64]) -> LatentConfig {
        nearest_assignment(self.data, w)
    }

    fn coordinate_delta(&self, w: &[f64], z: &LatentConfig, i: usize, value: usize) -> f64 {
        let dim = self.data.dim();
        let x = self.data.point(i);
        let old = z[i];
        sq_dist(x, &w[value * dim..(value + 1) * dim]) - sq_dist(x, &w[old * dim..(old + 1) * dim])
    }

    /// The Hessian of the bound in the block of cluster `j` is `2 |I_j| I`,
    /// so the bound is 2-strongly convex when no cluster is empty.
    fn strong_convexity(&self, z: &LatentConfig) -> Option<f64> {
        if self.cluster_sizes(z).iter().all(|&c| c > 0) {
            Some(2.0)
        } else {
            None
        }
    }
}

/// Initialization scheme for cluster centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initializer {
    Forgy,
    RandomPartition,
    #[serde(rename = "kmeans++")]
    KMeansPlusPlus,
}

impl Initializer {
    pub fn name(self) -> &'static str {
        match self {
            Initializer::Forgy => "forgy",
            Initializer::RandomPartition => "random-partition",
            Initializer::KMeansPlusPlus => "kmeans++",
        }
    }

    pub fn initialize(self, data: &Dataset, k: usize, rng: &mut GmmRng) -> Result<(Centers, AssignConfig)> {
        match self {
            Initializer::Forgy => init_forgy(data, k, rng),
            Initializer::RandomPartition => init_random_partition(data, k, rng),
            Initializer::KMeansPlusPlus => init_kmeanspp(data, k, rng),
        }
    }
}

impl std::str::FromStr for Initializer {
    type Err = GmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forgy" => Ok(Initializer::Forgy),
            "random-partition" | "random_partition" => Ok(Initializer::RandomPartition),
            "kmeans++" | "kmeanspp" | "k-means++" => Ok(Initializer::KMeansPlusPlus),
            other => Err(GmmError::config(
                "init",
                format!("unknown clustering initializer '{other}'"),
            )),
        }
    }
}

fn check_k(data: &Dataset, k: usize, needs_k_le_n: bool) -> Result<()> {
    if k == 0 {
        return Err(GmmError::InvalidArgument("k must be at least 1".into()));
    }
    if needs_k_le_n && k > data.n() {
        return Err(GmmError::InvalidArgument(format!("k = {k} exceeds n = {}", data.n())));
    }
    Ok(())
}

/// `k` distinct examples chosen uniformly as centers.
pub fn init_forgy(data: &Dataset, k: usize, rng: &mut GmmRng) -> Result<(Centers, AssignConfig)> {
    check_k(data, k, true)?;
    let picks = index::sample(rng, data.n(), k);
    let mu: Vec<f64> = picks.iter().flat_map(|i| data.point(i).iter().copied()).collect();
    let centers = Centers { k, dim: data.dim(), mu };
    let z = nearest_assignment(data, &centers.mu);
    Ok((centers, z))
}

/// Uniform random assignment; centers are its cluster means.
pub fn init_random_partition(data: &Dataset, k: usize, rng: &mut GmmRng) -> Result<(Centers, AssignConfig)> {
    check_k(data, k, false)?;
    let z = LatentConfig((0..data.n()).map(|_| rng.random_range(0..k)).collect());
    let centers = optimize_bound(data, &z, k);
    Ok((centers, z))
}

/// D^2-weighted seeding with exact weights.
pub fn init_kmeanspp(data: &Dataset, k: usize, rng: &mut GmmRng) -> Result<(Centers, AssignConfig)> {
    check_k(data, k, true)?;
    let n = data.n();
    let dim = data.dim();
    let mut mu = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    mu.extend_from_slice(data.point(first));
    let mut d2: Vec<f64> = data.points().map(|x| sq_dist(x, data.point(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            rng.random_range(0..n)
        };
        let c = data.point(pick);
        mu.extend_from_slice(c);
        for (d, x) in d2.iter_mut().zip(data.points()) {
            *d = d.min(sq_dist(x, c));
        }
    }
    let centers = Centers { k, dim, mu };
    let z = nearest_assignment(data, &centers.mu);
    Ok((centers, z))
}
