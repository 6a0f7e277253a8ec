//! Seeded multi-trial experiments, progress-coefficient sweeps and
//! comparison tables.
//!
//! Trial `i` uses seed `seed + i` for both the initialization and the
//! selector, and every method in an experiment starts trial `i` from the same
//! initial state. Trials run on a worker pool; results are folded in trial
//! order, so outputs do not depend on scheduling.

pub mod config;
pub mod report;
pub mod stats;

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{Dataset, DeadClusterRule, Initializer, KMeansProblem};
use crate::data::{self, LatentShiftTask, MixtureSpec};
use crate::engine::Biased;
use crate::engine::{run, Greedy, LatentConfig, Problem, RandomWalk, RunTrace, Selector, Start};
use crate::error::{GmmError, Result};
use crate::lssvm::{LssvmProblem, MultifoldBias, StochasticSubset};
use crate::rng::{self, Stream};

pub use config::{DatasetSource, ExperimentConfig, LatentInit, ProblemKind, SelectorKind};
pub use report::{compare_report, ComparisonReport, ComparisonRow};
pub use stats::{mean_std, sign_test, SignTest, Summary, TrialRow};

/// One optimization method of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub selector: SelectorKind,
    pub eta: f64,
}

impl MethodSpec {
    pub fn baseline() -> Self {
        MethodSpec {
            selector: SelectorKind::Greedy,
            eta: 1.0,
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.selector == SelectorKind::Greedy && self.eta == 1.0
    }

    /// `hard-em` / `cccp` for the MM baseline, otherwise `gmm-<selector>`.
    pub fn name(&self, problem: ProblemKind) -> String {
        match (self.is_baseline(), problem) {
            (true, ProblemKind::Clustering) => "hard-em".to_string(),
            (true, ProblemKind::LatentSvm) => "cccp".to_string(),
            (false, _) => format!("gmm-{}", self.selector),
        }
    }
}

/// Per-method results of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: String,
    pub selector: SelectorKind,
    pub eta: f64,
    pub init: String,
    pub summary: Summary,
    pub rows: Vec<TrialRow>,
}

/// Everything `stats.json` records. Contains no wall-clock values, so an
/// identical configuration reproduces it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStats {
    pub dataset: String,
    pub fingerprint: String,
    pub config: ExperimentConfig,
    pub methods: Vec<MethodStats>,
}

impl ExperimentStats {
    pub fn method(&self, name: &str) -> Option<&MethodStats> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| GmmError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Results of an experiment together with the per-trial traces, indexed
/// `[method][trial]`.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub stats: ExperimentStats,
    pub traces: Vec<Vec<RunTrace>>,
}

/// The input data of an experiment.
#[derive(Debug, Clone)]
pub enum LoadedData {
    Points(Dataset),
    LatentShift(LatentShiftTask),
}

impl LoadedData {
    pub fn fingerprint(&self) -> String {
        match self {
            LoadedData::Points(d) => d.fingerprint(),
            LoadedData::LatentShift(t) => t.fingerprint(),
        }
    }
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<LoadedData> {
    let seed = cfg.data_seed();
    let mixture = |spec: MixtureSpec| data::gen_mixture(&spec).map(|m| LoadedData::Points(m.data));
    match cfg.dataset {
        DatasetSource::Gmm20 => mixture(MixtureSpec::gmm20(seed)),
        DatasetSource::Gmm200 => mixture(MixtureSpec::gmm200(seed)),
        DatasetSource::Norm25 => mixture(MixtureSpec::norm25_like(seed)),
        DatasetSource::File => {
            let path = cfg
                .path
                .as_ref()
                .ok_or_else(|| GmmError::config("path", "required when dataset = \"file\""))?;
            data::load_csv(path, cfg.load_options()?).map(LoadedData::Points)
        }
        DatasetSource::LatentShift => data::gen_latent_shift_task(
            cfg.task_n(),
            cfg.task_labels(),
            cfg.task_shift(),
            cfg.task_noise(),
            seed,
        )
        .map(LoadedData::LatentShift),
    }
}

/// The configured method, preceded by the MM baseline when `baseline` is
/// set and the configured method is not already the baseline.
pub fn default_methods(cfg: &ExperimentConfig) -> Vec<MethodSpec> {
    let configured = MethodSpec {
        selector: cfg.selector,
        eta: cfg.eta,
    };
    if cfg.baseline && !configured.is_baseline() {
        vec![MethodSpec::baseline(), configured]
    } else {
        vec![configured]
    }
}

/// Runs every trial of every method on already-loaded data, without writing
/// files.
pub fn run_methods(cfg: &ExperimentConfig, data: &LoadedData, methods: &[MethodSpec]) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(GmmError::config("etas", "at least one method is required"));
    }
    for m in methods {
        cfg.gmm_config(m.eta, 0).validate()?;
    }
    let per_trial: Vec<Vec<RunTrace>> = with_pool(cfg.workers, || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| run_trial(cfg, data, methods, cfg.seed.wrapping_add(trial as u64)))
            .collect::<Result<Vec<_>>>()
    })??;

    let mut traces: Vec<Vec<RunTrace>> = methods.iter().map(|_| Vec::with_capacity(cfg.trials)).collect();
    for trial_traces in per_trial {
        for (slot, trace) in traces.iter_mut().zip(trial_traces) {
            slot.push(trace);
        }
    }
    let method_stats = methods
        .iter()
        .zip(&traces)
        .map(|(m, ts)| {
            let rows: Vec<TrialRow> = ts
                .iter()
                .enumerate()
                .map(|(trial, t)| TrialRow::from_trace(trial, cfg.seed.wrapping_add(trial as u64), t))
                .collect();
            MethodStats {
                method: m.name(cfg.problem),
                selector: m.selector,
                eta: m.eta,
                init: cfg.init.clone(),
                summary: Summary::from_rows(&rows),
                rows,
            }
        })
        .collect();
    Ok(ExperimentOutcome {
        stats: ExperimentStats {
            dataset: cfg.dataset.name().to_string(),
            fingerprint: data.fingerprint(),
            config: cfg.clone(),
            methods: method_stats,
        },
        traces,
    })
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| GmmError::config("workers", format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn run_trial(cfg: &ExperimentConfig, data: &LoadedData, methods: &[MethodSpec], seed: u64) -> Result<Vec<RunTrace>> {
    match data {
        LoadedData::Points(points) => {
            let k = cfg.k.ok_or_else(|| GmmError::config("k", "required for clustering"))?;
            let rule = if cfg.respawn_dead.unwrap_or(false) {
                DeadClusterRule::RespawnFarthest
            } else {
                DeadClusterRule::Origin
            };
            let problem = KMeansProblem::new(points, k).with_dead_rule(rule);
            let init: Initializer = cfg.init.parse()?;
            let (centers, z) = init.initialize(points, k, &mut rng::stream(seed, Stream::Init))?;
            let start = Start::point_with_latent(centers.to_solution(), z);
            methods
                .iter()
                .map(|m| {
                    let mut selector = generic_selector::<KMeansProblem>(cfg, m.selector)?;
                    run(&problem, &start, &cfg.gmm_config(m.eta, seed), &mut selector)
                })
                .collect()
        }
        LoadedData::LatentShift(task) => {
            let problem = task.problem(cfg.lambda)?;
            let init: LatentInit = cfg.init.parse()?;
            let start = Start::bound(initial_latent(task, init, seed));
            methods
                .iter()
                .map(|m| {
                    let mut selector = lssvm_selector(cfg, m.selector)?;
                    run(&problem, &start, &cfg.gmm_config(m.eta, seed), &mut selector)
                })
                .collect()
        }
    }
}

/// Initial latent configuration of trial `seed`.
pub fn initial_latent(task: &LatentShiftTask, init: LatentInit, seed: u64) -> LatentConfig {
    match init {
        LatentInit::Adversarial => task.adversarial_latent(),
        LatentInit::Truth => task.true_latent(),
        LatentInit::Center => LatentConfig(vec![crate::lssvm::shift::latent_index(0); task.n()]),
        LatentInit::Random => {
            let mut r = rng::stream(seed, Stream::Init);
            let domain = crate::lssvm::shift::SHIFTS.len();
            LatentConfig((0..task.n()).map(|_| r.random_range(0..domain)).collect())
        }
    }
}

fn generic_selector<'a, P: Problem + ?Sized + 'a>(
    cfg: &ExperimentConfig,
    kind: SelectorKind,
) -> Result<Box<dyn Selector<P> + 'a>> {
    match kind {
        SelectorKind::Greedy => Ok(Box::new(Greedy)),
        SelectorKind::Walk => Ok(Box::new(RandomWalk {
            steps_per_example: cfg.walk_steps,
        })),
        SelectorKind::Subset => Ok(Box::new(StochasticSubset::default())),
        SelectorKind::Multifold => Err(GmmError::config("selector", "multifold is only defined for latent-svm")),
    }
}

fn lssvm_selector(cfg: &ExperimentConfig, kind: SelectorKind) -> Result<Box<dyn Selector<LssvmProblem>>> {
    match kind {
        SelectorKind::Multifold => Ok(Box::new(Biased::new(MultifoldBias::new(cfg.folds)))),
        other => generic_selector(cfg, other),
    }
}

/// Refuses to overwrite results in `out` that were computed on the same
/// named dataset but a different fingerprint: the data changed under an
/// unchanged configuration.
fn verify_previous(out: &Path, stats: &ExperimentStats) -> Result<()> {
    let path = out.join("stats.json");
    if !path.exists() {
        return Ok(());
    }
    let Ok(previous) = ExperimentStats::load(&path) else {
        return Ok(());
    };
    let same_source = previous.dataset == stats.dataset
        && previous.config.data_seed() == stats.config.data_seed()
        && previous.config.path == stats.config.path
        && previous.config.drop_col == stats.config.drop_col
        && previous.config.task_n == stats.config.task_n
        && previous.config.task_labels == stats.config.task_labels
        && previous.config.task_shift == stats.config.task_shift
        && previous.config.task_noise == stats.config.task_noise;
    if same_source && previous.fingerprint != stats.fingerprint {
        return Err(GmmError::FingerprintMismatch(
            previous.fingerprint,
            stats.fingerprint.clone(),
        ));
    }
    Ok(())
}

fn write_traces(out: &Path, stats: &ExperimentStats, traces: &[Vec<RunTrace>]) -> Result<()> {
    let dir = out.join("traces");
    fs::create_dir_all(&dir)?;
    for (m, ts) in stats.methods.iter().zip(traces) {
        for (trial, trace) in ts.iter().enumerate() {
            let name = format!("{}-eta{}-trial{:03}.csv", m.method, m.eta, trial);
            trace.write_csv(fs::File::create(dir.join(name))?)?;
        }
    }
    Ok(())
}

fn write_results_csv(path: &Path, stats: &ExperimentStats) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record([
        "method",
        "selector",
        "eta",
        "init",
        "trial",
        "seed",
        "initial_objective",
        "final_objective",
        "iterations",
        "termination",
        "latent_change_fraction",
    ])?;
    for m in &stats.methods {
        for r in &m.rows {
            out.write_record([
                m.method.clone(),
                m.selector.to_string(),
                m.eta.to_string(),
                m.init.clone(),
                r.trial.to_string(),
                r.seed.to_string(),
                r.initial_objective.to_string(),
                r.final_objective.to_string(),
                r.iterations.to_string(),
                r.termination.name().to_string(),
                r.latent_change_fraction.map(|f| f.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Runs the configured experiment and writes `stats.json`, `results.csv`,
/// `report.csv`, `report.txt` and `traces/*.csv` under `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let data = load_data(cfg)?;
    let outcome = run_methods(cfg, &data, &default_methods(cfg))?;
    let out = &cfg.out;
    fs::create_dir_all(out)?;
    verify_previous(out, &outcome.stats)?;
    fs::write(out.join("stats.json"), outcome.stats.to_json()?)?;
    write_results_csv(&out.join("results.csv"), &outcome.stats)?;
    let report = compare_report(std::slice::from_ref(&outcome.stats))?;
    report.write_csv(fs::File::create(out.join("report.csv"))?)?;
    fs::File::create(out.join("report.txt"))?.write_all(report.to_text().as_bytes())?;
    write_traces(out, &outcome.stats, &outcome.traces)?;
    Ok(outcome)
}

/// Runs the configured selector at every `eta` on shared initializations and
/// writes `sweep.csv` (columns `eta, trial, final_objective, iters`),
/// `sweep_stats.json` and the traces under `cfg.out`.
pub fn sweep_eta(cfg: &ExperimentConfig, etas: &[f64]) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if etas.is_empty() {
        return Err(GmmError::config("etas", "need at least one value"));
    }
    for &eta in etas {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(GmmError::config(
                "etas",
                format!("every value must lie in (0, 1], got {eta}"),
            ));
        }
    }
    let data = load_data(cfg)?;
    let methods: Vec<MethodSpec> = etas
        .iter()
        .map(|&eta| MethodSpec {
            selector: cfg.selector,
            eta,
        })
        .collect();
    let outcome = run_methods(cfg, &data, &methods)?;
    let out = &cfg.out;
    fs::create_dir_all(out)?;
    fs::write(out.join("sweep_stats.json"), outcome.stats.to_json()?)?;
    write_sweep_csv(fs::File::create(out.join("sweep.csv"))?, &outcome.stats)?;
    write_traces(out, &outcome.stats, &outcome.traces)?;
    Ok(outcome)
}

pub fn write_sweep_csv<W: Write>(writer: W, stats: &ExperimentStats) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["eta", "trial", "final_objective", "iters"])?;
    for m in &stats.methods {
        for r in &m.rows {
            out.write_record([
                m.eta.to_string(),
                r.trial.to_string(),
                r.final_objective.to_string(),
                r.iterations.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
