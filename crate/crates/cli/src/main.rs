//! `gmm-opt`: run G-MM experiments from a config file.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on runtime
//! failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gmm_core::data::{self, MixtureSpec};
use gmm_core::harness::{self, compare_report, ExperimentConfig, ExperimentStats, ProblemKind, SelectorKind};
use gmm_core::GmmError;

#[derive(Parser)]
#[command(
    name = "gmm-opt",
    version,
    about = "Generalized majorization-minimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// k-means clustering experiments.
    Cluster {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Latent structural SVM experiments on the latent-shift task.
    Lssvm {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Sweep the progress coefficient over shared initializations.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated progress coefficients, each in (0, 1].
        #[arg(long, value_delimiter = ',', required = true)]
        etas: Vec<f64>,
    },
    /// Generate a dataset and write it as CSV.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Latent-shift examples.
        #[arg(long, default_value_t = harness::config::DEFAULT_TASK_N)]
        task_n: usize,
        #[arg(long, default_value_t = harness::config::DEFAULT_TASK_LABELS)]
        task_labels: usize,
        #[arg(long, default_value_t = harness::config::DEFAULT_TASK_SHIFT)]
        task_shift: f64,
        #[arg(long, default_value_t = harness::config::DEFAULT_TASK_NOISE)]
        task_noise: f64,
    },
    /// Print a comparison table for several stats.json files of one dataset.
    Compare {
        #[arg(required = true)]
        stats: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum RunAction {
    /// Run the configured experiment.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    selector: Option<SelectorKind>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Skip the MM baseline.
    #[arg(long)]
    no_baseline: bool,
    /// Move dead clusters to the worst-served points instead of the origin.
    #[arg(long)]
    respawn_dead: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Gmm200,
    Gmm20,
    Norm25,
    LatentShift,
}

impl RunArgs {
    /// Reads the config file and applies flag overrides; flags win.
    fn load(&self, expected: Option<ProblemKind>) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(kind) = expected {
            if cfg.problem != kind {
                return Err(GmmError::InvalidConfig {
                    field: "problem".into(),
                    reason: format!(
                        "{} describes a {} experiment; use the matching subcommand",
                        self.config.display(),
                        cfg.problem.name()
                    ),
                }
                .into());
            }
        }
        if let Some(eta) = self.eta {
            cfg.eta = eta;
        }
        if let Some(selector) = self.selector {
            cfg.selector = selector;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(workers) = self.workers {
            cfg.workers = Some(workers);
        }
        if self.no_baseline {
            cfg.baseline = false;
        }
        if self.respawn_dead {
            cfg.respawn_dead = Some(true);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cluster {
            action: RunAction::Run(args),
        } => experiment(&args.load(Some(ProblemKind::Clustering))?),
        Command::Lssvm {
            action: RunAction::Run(args),
        } => experiment(&args.load(Some(ProblemKind::LatentSvm))?),
        Command::Sweep { run, etas } => {
            let cfg = run.load(None)?;
            let outcome = harness::sweep_eta(&cfg, &etas)?;
            print!("{}", compare_report(std::slice::from_ref(&outcome.stats))?.to_text());
            println!("wrote {}", cfg.out.join("sweep.csv").display());
            Ok(())
        }
        Command::Gen {
            kind,
            out,
            seed,
            task_n,
            task_labels,
            task_shift,
            task_noise,
        } => generate(kind, &out, seed, task_n, task_labels, task_shift, task_noise),
        Command::Compare { stats, csv } => {
            let loaded = stats
                .iter()
                .map(|p| ExperimentStats::load(p).with_context(|| format!("reading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let report = compare_report(&loaded)?;
            print!("{}", report.to_text());
            if let Some(path) = csv {
                report.write_csv(std::fs::File::create(&path)?)?;
            }
            Ok(())
        }
    }
}

fn experiment(cfg: &ExperimentConfig) -> Result<()> {
    let outcome = harness::run_experiment(cfg)?;
    print!("{}", compare_report(std::slice::from_ref(&outcome.stats))?.to_text());
    println!("wrote {}", cfg.out.join("stats.json").display());
    Ok(())
}

fn generate(
    kind: GenKind,
    out: &Path,
    seed: u64,
    task_n: usize,
    task_labels: usize,
    task_shift: f64,
    task_noise: f64,
) -> Result<()> {
    let spec = match kind {
        GenKind::Gmm200 => MixtureSpec::gmm200(seed),
        GenKind::Gmm20 => MixtureSpec::gmm20(seed),
        GenKind::Norm25 => MixtureSpec::norm25_like(seed),
        GenKind::LatentShift => {
            let task = data::gen_latent_shift_task(task_n, task_labels, task_shift, task_noise, seed)?;
            task.write_csv(std::fs::File::create(out)?)?;
            println!("wrote {} examples to {}", task.n(), out.display());
            return Ok(());
        }
    };
    let mixture = data::gen_mixture(&spec)?;
    data::write_points_csv(out, &mixture.data, Some(&mixture.labels))?;
    println!("wrote {} points to {}", mixture.data.n(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config_error = err
                .chain()
                .find_map(|e| e.downcast_ref::<GmmError>())
                .is_some_and(GmmError::is_config_error);
            ExitCode::from(if config_error { 2 } else { 3 })
        }
    }
}
