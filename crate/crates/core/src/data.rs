//! Seeded dataset generators and file loaders.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::Dataset;
use crate::engine::LatentConfig;
use crate::error::{GmmError, Result};
use crate::lssvm::shift::{self, BLOCK_DIM};
use crate::lssvm::LssvmProblem;
use crate::rng::{self, Stream};

/// Cap on rejection-sampling attempts when placing mixture means.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1_000_000;

/// Isotropic Gaussian mixture with means sampled uniformly in a hypercube,
/// subject to a pairwise separation floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub components: usize,
    pub dim: usize,
    pub sigma: f64,
    pub square_side: f64,
    /// Minimum pairwise mean distance, in multiples of `sigma`.
    pub min_separation: f64,
    pub samples_per_component: usize,
    pub seed: u64,
}

impl MixtureSpec {
    /// 200 components, 2-D, sigma 1, 70 x 70 square, means 2.5 sigma apart, 50 samples each.
    pub fn gmm200(seed: u64) -> Self {
        MixtureSpec {
            components: 200,
            dim: 2,
            sigma: 1.0,
            square_side: 70.0,
            min_separation: 2.5,
            samples_per_component: 50,
            seed,
        }
    }

    /// Desk-scale variant: 20 components on a 25 x 25 square.
    pub fn gmm20(seed: u64) -> Self {
        MixtureSpec {
            components: 20,
            square_side: 25.0,
            ..Self::gmm200(seed)
        }
    }

    /// A 25-component, 15-dimensional mixture in the spirit of Norm-25
    /// (unit-variance clusters in a cube of side 500). Not the original data.
    pub fn norm25_like(seed: u64) -> Self {
        MixtureSpec {
            components: 25,
            dim: 15,
            sigma: 1.0,
            square_side: 500.0,
            min_separation: 2.5,
            samples_per_component: 400,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components == 0 || self.dim == 0 || self.samples_per_component == 0 {
            return Err(GmmError::config(
                "mixture",
                "components, dim and samples must be positive",
            ));
        }
        if !(self.sigma > 0.0) {
            return Err(GmmError::config("sigma", "must be positive"));
        }
        if self.components > 1 && !(self.min_separation * self.sigma < self.square_side) {
            return Err(GmmError::config(
                "min_separation",
                "min_separation * sigma must be smaller than the square side",
            ));
        }
        Ok(())
    }
}

/// A generated mixture with its ground truth.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub data: Dataset,
    pub labels: Vec<usize>,
    pub means: Vec<Vec<f64>>,
}

pub fn gen_mixture(spec: &MixtureSpec) -> Result<Mixture> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, Stream::Data);
    let min_dist_sq = (spec.min_separation * spec.sigma).powi(2);
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(spec.components);
    let mut attempts = 0;
    while means.len() < spec.components {
        if attempts == MAX_PLACEMENT_ATTEMPTS {
            return Err(GmmError::InfeasibleMixture {
                attempts,
                placed: means.len(),
                wanted: spec.components,
            });
        }
        attempts += 1;
        let candidate: Vec<f64> = (0..spec.dim).map(|_| rng.random::<f64>() * spec.square_side).collect();
        let far_enough = means.iter().all(|m| {
            let d: f64 = m.iter().zip(&candidate).map(|(a, b)| (a - b) * (a - b)).sum();
            d >= min_dist_sq
        });
        if far_enough {
            means.push(candidate);
        }
    }
    let n = spec.components * spec.samples_per_component;
    let mut values = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for (j, mean) in means.iter().enumerate() {
        for _ in 0..spec.samples_per_component {
            for &m in mean {
                let e: f64 = rng.sample(StandardNormal);
                values.push(m + spec.sigma * e);
            }
            labels.push(j);
        }
    }
    Ok(Mixture {
        data: Dataset::new(values, spec.dim)?,
        labels,
        means,
    })
}

/// Points with an optional trailing ground-truth label column.
pub fn write_points_csv(path: &Path, data: &Dataset, labels: Option<&[usize]>) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for (i, p) in data.points().enumerate() {
        let mut row: Vec<String> = p.iter().map(f64::to_string).collect();
        if let Some(l) = labels {
            row.push(l[i].to_string());
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Delimiter {
    #[default]
    Auto,
    Comma,
    Whitespace,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub delimiter: Delimiter,
    /// Zero-based column to discard, e.g. a label column.
    pub drop_col: Option<usize>,
}

/// Reads a headerless numeric table, one point per row.
pub fn load_csv(path: &Path, opts: LoadOptions) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_table(&text, opts).map_err(|message| GmmError::Parse {
        path: path.to_path_buf(),
        message,
    })
}

fn parse_table(text: &str, opts: LoadOptions) -> std::result::Result<Dataset, String> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).collect();
    if lines.is_empty() {
        return Err("no rows".to_string());
    }
    let comma = match opts.delimiter {
        Delimiter::Comma => true,
        Delimiter::Whitespace => false,
        Delimiter::Auto => lines.iter().any(|(_, l)| l.contains(',')),
    };
    let mut values = Vec::new();
    let mut width = None;
    for (row, line) in lines {
        let cells: Vec<&str> = if comma {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        let mut kept = 0;
        for (col, cell) in cells.iter().enumerate() {
            if Some(col) == opts.drop_col {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| format!("row {}, column {}: '{}' is not a number", row + 1, col + 1, cell))?;
            if !v.is_finite() {
                return Err(format!("row {}, column {}: non-finite value", row + 1, col + 1));
            }
            values.push(v);
            kept += 1;
        }
        match width {
            None if kept == 0 => return Err(format!("row {}: no columns left", row + 1)),
            None => width = Some(kept),
            Some(w) if w != kept => {
                return Err(format!("row {}: expected {} columns, found {}", row + 1, w, kept));
            }
            _ => {}
        }
    }
    Dataset::new(values, width.expect("at least one row")).map_err(|e| e.to_string())
}

/// Radius of the circle holding the class prototypes of the latent-shift task.
/// Smaller than the default shift, so with two labels the observed
/// horizontal ranges of the classes interleave and the labels are only
/// recoverable after undoing the shifts.
pub const PROTOTYPE_RADIUS: f64 = 0.75;

/// Synthetic latent-shift classification task with its planted solution.
///
/// Class `y` has a prototype on a circle, starting on the negative
/// horizontal axis so that two labels differ horizontally; a clean example is a noisy draw
/// around its class prototype, and the observed base point is that draw
/// moved by `-s * true_shift` horizontally. Shifting back by the true latent
/// value recovers the clean point.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentShiftTask {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    /// Multipliers in `{-1, 0, 1}`.
    pub true_shifts: Vec<i8>,
    pub label_count: usize,
    pub shift_magnitude: f64,
    pub prototypes: Vec<[f64; 2]>,
    /// Scores `-kappa |q - m_y|^2 / 2`, scaled so the noiseless margin is 1.
    pub planted_w: Vec<f64>,
}

pub fn gen_latent_shift_task(
    n: usize,
    label_count: usize,
    shift_magnitude: f64,
    noise: f64,
    seed: u64,
) -> Result<LatentShiftTask> {
    if label_count < 2 {
        return Err(GmmError::config("task_labels", "need at least two labels"));
    }
    if n < 2 * label_count {
        return Err(GmmError::config(
            "task_n",
            format!("n = {n} must be at least twice the label count {label_count}"),
        ));
    }
    if !(shift_magnitude >= 0.0) || !(noise >= 0.0) {
        return Err(GmmError::config(
            "task_shift",
            "shift magnitude and noise must be nonnegative",
        ));
    }
    let prototypes: Vec<[f64; 2]> = (0..label_count)
        .map(|y| {
            let angle = std::f64::consts::PI + std::f64::consts::TAU * y as f64 / label_count as f64;
            [PROTOTYPE_RADIUS * angle.cos(), PROTOTYPE_RADIUS * angle.sin()]
        })
        .collect();

    let mut min_sq = f64::INFINITY;
    for (a, ma) in prototypes.iter().enumerate() {
        for (b, mb) in prototypes.iter().enumerate() {
            if a == b {
                continue;
            }
            for offset in -2..=2 {
                let dx = ma[0] - mb[0] + offset as f64 * shift_magnitude;
                let dy = ma[1] - mb[1];
                min_sq = min_sq.min(dx * dx + dy * dy);
            }
        }
    }
    if min_sq < 1e-6 {
        return Err(GmmError::config(
            "task_shift",
            format!("shift magnitude {shift_magnitude} moves one class prototype onto another"),
        ));
    }
    let kappa = 2.0 / min_sq;
    let mut planted_w = vec![0.0; label_count * BLOCK_DIM];
    for (y, m) in prototypes.iter().enumerate() {
        let block = &mut planted_w[y * BLOCK_DIM..(y + 1) * BLOCK_DIM];
        block.copy_from_slice(&[
            kappa * m[0],
            kappa * m[1],
            -0.5 * kappa,
            -0.5 * kappa * (m[0] * m[0] + m[1] * m[1]),
        ]);
    }

    let mut rng = rng::stream(seed, Stream::Data);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut true_shifts = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % label_count;
        let shift = rng.random_range(-1i8..=1);
        let e0: f64 = rng.sample(StandardNormal);
        let e1: f64 = rng.sample(StandardNormal);
        let clean = [prototypes[y][0] + noise * e0, prototypes[y][1] + noise * e1];
        points.push([clean[0] - shift as f64 * shift_magnitude, clean[1]]);
        labels.push(y);
        true_shifts.push(shift);
    }
    Ok(LatentShiftTask {
        points,
        labels,
        true_shifts,
        label_count,
        shift_magnitude,
        prototypes,
        planted_w,
    })
}

impl LatentShiftTask {
    pub fn problem(&self, lambda: f64) -> Result<LssvmProblem> {
        let examples = self
            .points
            .iter()
            .zip(&self.labels)
            .map(|(&x, &y)| shift::shift_example(x, y, self.label_count, self.shift_magnitude))
            .collect::<Result<Vec<_>>>()?;
        LssvmProblem::new(
            examples,
            self.label_count,
            lambda,
            LssvmProblem::zero_one_loss(self.label_count),
        )
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// SHA-256 over the label count, shift magnitude and every example.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.label_count as u64).to_le_bytes());
        hasher.update(self.shift_magnitude.to_le_bytes());
        for ((p, y), s) in self.points.iter().zip(&self.labels).zip(&self.true_shifts) {
            hasher.update(p[0].to_le_bytes());
            hasher.update(p[1].to_le_bytes());
            hasher.update((*y as u64).to_le_bytes());
            hasher.update(s.to_le_bytes());
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn true_latent(&self) -> LatentConfig {
        LatentConfig(self.true_shifts.iter().map(|&s| shift::latent_index(s)).collect())
    }

    /// Every latent value wrong: the opposite extreme for shifted examples,
    /// `+1` for unshifted ones.
    pub fn adversarial_latent(&self) -> LatentConfig {
        LatentConfig(
            self.true_shifts
                .iter()
                .map(|&s| shift::latent_index(if s == 0 { 1 } else { -s }))
                .collect(),
        )
    }

    /// Columns `x1, x2, y, true_shift`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["x1", "x2", "y", "true_shift"])?;
        for ((p, y), s) in self.points.iter().zip(&self.labels).zip(&self.true_shifts) {
            out.write_record([p[0].to_string(), p[1].to_string(), y.to_string(), s.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}
