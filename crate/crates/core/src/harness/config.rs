//! Experiment configuration: a flat TOML file whose keys mirror the CLI flags.
//!
//! ```toml
//! problem = "clustering"      # or "latent-svm"
//! dataset = "gmm20"           # gmm20 | gmm200 | norm25 | file | latent-shift
//! k = 20
//! init = "random-partition"   # forgy | random-partition | kmeans++ ; adversarial | truth | random | center
//! selector = "walk"           # greedy | walk | subset | multifold
//! eta = 0.02
//! trials = 50
//! seed = 1
//! out = "runs/gmm20"
//! ```
//!
//! Unknown keys are rejected so typos do not silently fall back to defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Delimiter, LoadOptions};
use crate::engine::GmmConfig;
use crate::error::{GmmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Clustering,
    LatentSvm,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Clustering => "clustering",
            ProblemKind::LatentSvm => "latent-svm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSource {
    Gmm20,
    Gmm200,
    Norm25,
    File,
    LatentShift,
}

impl DatasetSource {
    pub fn name(self) -> &'static str {
        match self {
            DatasetSource::Gmm20 => "gmm20",
            DatasetSource::Gmm200 => "gmm200",
            DatasetSource::Norm25 => "norm25",
            DatasetSource::File => "file",
            DatasetSource::LatentShift => "latent-shift",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorKind {
    Greedy,
    Walk,
    Subset,
    Multifold,
}

impl SelectorKind {
    pub fn name(self) -> &'static str {
        match self {
            SelectorKind::Greedy => "greedy",
            SelectorKind::Walk => "walk",
            SelectorKind::Subset => "subset",
            SelectorKind::Multifold => "multifold",
        }
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectorKind {
    type Err = GmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(SelectorKind::Greedy),
            "walk" => Ok(SelectorKind::Walk),
            "subset" => Ok(SelectorKind::Subset),
            "multifold" => Ok(SelectorKind::Multifold),
            other => Err(GmmError::config(
                "selector",
                format!("unknown selector '{other}' (expected greedy, walk, subset or multifold)"),
            )),
        }
    }
}

/// Initial latent values for the latent-shift task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatentInit {
    /// Every shift wrong.
    Adversarial,
    /// The planted shifts.
    Truth,
    /// Uniform per example.
    Random,
    /// No shift for every example.
    Center,
}

impl LatentInit {
    pub fn name(self) -> &'static str {
        match self {
            LatentInit::Adversarial => "adversarial",
            LatentInit::Truth => "truth",
            LatentInit::Random => "random",
            LatentInit::Center => "center",
        }
    }
}

impl FromStr for LatentInit {
    type Err = GmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adversarial" => Ok(LatentInit::Adversarial),
            "truth" => Ok(LatentInit::Truth),
            "random" => Ok(LatentInit::Random),
            "center" => Ok(LatentInit::Center),
            other => Err(GmmError::config(
                "init",
                format!("unknown latent initializer '{other}' (expected adversarial, truth, random or center)"),
            )),
        }
    }
}

fn default_trials() -> usize {
    1
}

fn default_eta() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    crate::engine::DEFAULT_EPSILON_REL
}

fn default_max_iters() -> usize {
    crate::engine::DEFAULT_MAX_ITERS
}

fn default_walk_steps() -> usize {
    10
}

fn default_folds() -> usize {
    10
}

fn default_lambda() -> f64 {
    0.4
}

fn default_true() -> bool {
    true
}

fn default_out() -> PathBuf {
    PathBuf::from("gmm-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub dataset: DatasetSource,
    /// Seed of the dataset generator; defaults to `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    /// Input file when `dataset = "file"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// `auto`, `comma` or `whitespace`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<String>,
    /// Zero-based column to drop from the input file (e.g. a label column).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_col: Option<usize>,

    /// Number of clusters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Clustering initializer or latent initializer, depending on `problem`.
    pub init: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub respawn_dead: Option<bool>,

    pub selector: SelectorKind,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Relative to `max(1, |F(w_0)|)`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Also run the MM baseline (`eta = 1`, greedy) on the same initializations.
    #[serde(default = "default_true")]
    pub baseline: bool,
    /// Worker threads for trials; defaults to the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,

    /// Random-walk steps per latent variable.
    #[serde(default = "default_walk_steps")]
    pub walk_steps: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_labels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_noise: Option<f64>,
}

/// Defaults of the latent-shift task parameters.
pub const DEFAULT_TASK_N: usize = 40;
pub const DEFAULT_TASK_LABELS: usize = 2;
pub const DEFAULT_TASK_SHIFT: f64 = 1.0;
pub const DEFAULT_TASK_NOISE: f64 = 0.3;

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| GmmError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GmmError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    pub fn task_n(&self) -> usize {
        self.task_n.unwrap_or(DEFAULT_TASK_N)
    }

    pub fn task_labels(&self) -> usize {
        self.task_labels.unwrap_or(DEFAULT_TASK_LABELS)
    }

    pub fn task_shift(&self) -> f64 {
        self.task_shift.unwrap_or(DEFAULT_TASK_SHIFT)
    }

    pub fn task_noise(&self) -> f64 {
        self.task_noise.unwrap_or(DEFAULT_TASK_NOISE)
    }

    pub fn load_options(&self) -> Result<LoadOptions> {
        let delimiter = match self.delimiter.as_deref() {
            None | Some("auto") => Delimiter::Auto,
            Some("comma") => Delimiter::Comma,
            Some("whitespace") => Delimiter::Whitespace,
            Some(other) => {
                return Err(GmmError::config(
                    "delimiter",
                    format!("unknown delimiter '{other}' (expected auto, comma or whitespace)"),
                ))
            }
        };
        Ok(LoadOptions {
            delimiter,
            drop_col: self.drop_col,
        })
    }

    /// Engine settings for one method.
    pub fn gmm_config(&self, eta: f64, seed: u64) -> GmmConfig {
        GmmConfig {
            eta,
            epsilon: self.epsilon,
            relative_epsilon: true,
            max_iters: self.max_iters,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(GmmError::config("trials", "must be at least 1"));
        }
        self.gmm_config(self.eta, self.seed).validate()?;
        if self.workers == Some(0) {
            return Err(GmmError::config("workers", "must be at least 1"));
        }
        if self.selector == SelectorKind::Walk && self.walk_steps == 0 {
            return Err(GmmError::config("walk_steps", "must be at least 1"));
        }
        match self.problem {
            ProblemKind::Clustering => {
                match self.dataset {
                    DatasetSource::LatentShift => {
                        return Err(GmmError::config(
                            "dataset",
                            "latent-shift is a latent-svm dataset; clustering needs gmm20, gmm200, norm25 or file",
                        ))
                    }
                    DatasetSource::File if self.path.is_none() => {
                        return Err(GmmError::config("path", "required when dataset = \"file\""))
                    }
                    _ => {}
                }
                match self.k {
                    None => return Err(GmmError::config("k", "required for clustering")),
                    Some(0) => return Err(GmmError::config("k", "must be at least 1")),
                    Some(_) => {}
                }
                self.init.parse::<crate::clustering::Initializer>()?;
                if self.selector == SelectorKind::Multifold {
                    return Err(GmmError::config("selector", "multifold is only defined for latent-svm"));
                }
                self.load_options()?;
            }
            ProblemKind::LatentSvm => {
                if self.dataset != DatasetSource::LatentShift {
                    return Err(GmmError::config("dataset", "latent-svm runs on the latent-shift task"));
                }
                self.init.parse::<LatentInit>()?;
                if !(self.lambda > 0.0) || !self.lambda.is_finite() {
                    return Err(GmmError::config(
                        "lambda",
                        format!("must be positive, got {}", self.lambda),
                    ));
                }
                let n = self.task_n();
                let labels = self.task_labels();
                if labels < 2 {
                    return Err(GmmError::config("task_labels", "need at least two labels"));
                }
                if n < 2 * labels {
                    return Err(GmmError::config(
                        "task_n",
                        format!("n = {n} must be at least twice the label count {labels}"),
                    ));
                }
                if !(self.task_shift() >= 0.0) || !(self.task_noise() >= 0.0) {
                    return Err(GmmError::config(
                        "task_shift",
                        "shift magnitude and noise must be nonnegative",
                    ));
                }
                if self.selector == SelectorKind::Multifold && (self.folds < 2 || self.folds > n) {
                    return Err(GmmError::config(
                        "folds",
                        format!("need 2 <= folds <= n, got {} with n = {n}", self.folds),
                    ));
                }
            }
        }
        Ok(())
    }
}
