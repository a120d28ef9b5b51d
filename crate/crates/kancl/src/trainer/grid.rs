//! Hyperparameter grid runner.
//!
//! Every grid cell is an independent run with its own network, optimizer,
//! and RNG; only the immutable datasets are shared. Results are merged by
//! grid index, so the outcome is identical at any parallelism level.

use crate::data::{ClTask, LabeledImages};
use crate::network::NetworkSpec;
use crate::tensor::Rng;
use crate::trainer::{run_cl, ClSchedule, OptKind, RunMetrics};
use serde::{Deserialize, Serialize};

/// The cartesian grid: every (lr, decay, epochs, seed) combination runs once.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub lrs: Vec<f64>,
    pub decays: Vec<f64>,
    pub epoch_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub batch_size: usize,
    pub optimizer: OptKind,
}

impl GridSpec {
    pub fn run_count(&self) -> usize {
        self.lrs.len() * self.decays.len() * self.epoch_counts.len() * self.seeds.len()
    }

    /// All cells in deterministic order: lr-major, then decay, epochs, seed.
    pub fn configs(&self) -> Vec<RunConfig> {
        let mut out = Vec::with_capacity(self.run_count());
        for &lr in &self.lrs {
            for &decay in &self.decays {
                for &epochs in &self.epoch_counts {
                    for &seed in &self.seeds {
                        out.push(RunConfig {
                            lr,
                            decay,
                            epochs_per_task: epochs,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub lr: f64,
    pub decay: f64,
    pub epochs_per_task: usize,
    pub seed: u64,
}

/// One grid cell's outcome; failures are recorded, not fatal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridRunResult {
    pub index: usize,
    pub config: RunConfig,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

impl GridRunResult {
    pub fn best_final_task(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.best_final_task())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridOutcome {
    pub runs: Vec<GridRunResult>,
    /// Index of the run with the highest final-task accuracy, failures
    /// excluded; ties resolve to the lowest grid index.
    pub best: Option<usize>,
}

impl GridOutcome {
    pub fn best_run(&self) -> Option<&GridRunResult> {
        self.best.map(|i| &self.runs[i])
    }
}

fn run_one(
    spec: &NetworkSpec,
    config: &RunConfig,
    batch_size: usize,
    optimizer: OptKind,
    train: &LabeledImages,
    tasks: &[ClTask],
    test: &LabeledImages,
    test_indices: &[usize],
) -> Result<RunMetrics, String> {
    let mut net = spec
        .build(&mut Rng::new(config.seed))
        .map_err(|e| e.to_string())?;
    let schedule = ClSchedule {
        epochs_per_task: config.epochs_per_task,
        lr0: config.lr,
        decay: config.decay,
        seed: config.seed,
        batch_size,
        optimizer,
    };
    run_cl(&mut net, &schedule, train, tasks, test, test_indices).map_err(|e| e.to_string())
}

/// Executes the whole grid on a bounded worker pool (`jobs` threads;
/// `jobs <= 1` runs inline). Individual run failures are recorded in the
/// results table and the grid continues.
#[allow(clippy::too_many_arguments)]
pub fn run_grid(
    spec: &NetworkSpec,
    grid: &GridSpec,
    train: &LabeledImages,
    tasks: &[ClTask],
    test: &LabeledImages,
    test_indices: &[usize],
    jobs: usize,
) -> crate::error::Result<GridOutcome> {
    let configs = grid.configs();
    let execute = |(index, config): (usize, &RunConfig)| -> GridRunResult {
        match run_one(
            spec,
            config,
            grid.batch_size,
            grid.optimizer,
            train,
            tasks,
            test,
            test_indices,
        ) {
            Ok(metrics) => GridRunResult {
                index,
                config: *config,
                metrics: Some(metrics),
                error: None,
            },
            Err(e) => GridRunResult {
                index,
                config: *config,
                metrics: None,
                error: Some(e),
            },
        }
    };

    let mut runs: Vec<GridRunResult> = if jobs <= 1 {
        configs.iter().enumerate().map(execute).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| crate::error::KanError::InvalidConfig(format!("worker pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            configs.par_iter().enumerate().map(execute).collect()
        })
    };
    runs.sort_by_key(|r| r.index);

    let mut best: Option<usize> = None;
    for run in &runs {
        if let Some(acc) = run.best_final_task() {
            let better = match best {
                None => true,
                Some(b) => acc > runs[b].best_final_task().unwrap_or(f64::NEG_INFINITY),
            };
            if better {
                best = Some(run.index);
            }
        }
    }
    Ok(GridOutcome { runs, best })
}
