//! Parallel execution of experiments. Replications are independent work units
//! keyed by index; results are merged by index, so output does not depend on
//! scheduling or the worker count.

use log::info;
use rayon::prelude::*;
use sysrisk_core::simharness::{ExperimentResult, ScenarioConfig, Table1Experiment};

use crate::{Error, Result};

/// Thread pool capped at `workers` threads (`None`: one per core).
pub fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::Config("--workers must be positive".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Build the frozen experiment state, constructing per-risk tables concurrently.
pub fn prepare_table1(cfg: &ScenarioConfig, pool: &rayon::ThreadPool) -> Result<Table1Experiment> {
    let start = std::time::Instant::now();
    let exp = pool.install(|| Table1Experiment::new_with(cfg.clone(), |n, f| (0..n).into_par_iter().map(f).collect()))?;
    info!("setting {} prepared in {:.1?}", cfg.setting.tag(), start.elapsed());
    Ok(exp)
}

/// Run every replication of a prepared experiment.
pub fn run_prepared(exp: &Table1Experiment, pool: &rayon::ThreadPool) -> Result<ExperimentResult> {
    let cfg = exp.config();
    let start = std::time::Instant::now();
    let outcomes = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                exp.run_replication(r)
                    .map_err(|source| Error::Replication { replication: r, seed: cfg.seed, source })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    info!("{} replications in {:.1?}", cfg.replications, start.elapsed());
    Ok(exp.summarize(outcomes))
}

/// Table 1 experiment with a worker cap.
pub fn run_table1(cfg: &ScenarioConfig, workers: Option<usize>) -> Result<ExperimentResult> {
    let pool = pool(workers)?;
    let exp = prepare_table1(cfg, &pool)?;
    run_prepared(&exp, &pool)
}
