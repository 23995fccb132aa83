//! Config loading, dataset resolution and parallel sweeps.

use std::fs;
use std::path::Path;
use std::time::Instant;

use coreset_core::data::DatasetSpec;
use coreset_core::{run, Clock, Dataset, Method, MetricsRecord, RunConfig, RunResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::io::load_csv;

/// Seconds elapsed since construction, from the OS monotonic clock.
#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock(Instant);

impl MonotonicClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Generates or loads the dataset named by `spec`.
pub fn resolve_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    match spec {
        DatasetSpec::Csv { path } => load_csv(Path::new(path)),
        other => Ok(other.generate().expect("generator spec")?),
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
}

/// Parses a run configuration tree. A `seed` key in the tree wins over
/// `default_seed`, which in turn replaces the built-in default of 0.
pub fn parse_run_config(mut tree: serde_json::Value, default_seed: Option<u64>) -> Result<RunConfig> {
    if let (Some(seed), Some(obj)) = (default_seed, tree.as_object_mut()) {
        obj.entry("seed").or_insert(seed.into());
    }
    serde_json::from_value(tree).map_err(|e| BenchError::Config(e.to_string()))
}

pub fn load_run_config(path: &Path, default_seed: Option<u64>) -> Result<RunConfig> {
    parse_run_config(read_json(path)?, default_seed)
}

/// A grid of runs sharing one base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub methods: Vec<Method>,
    pub edpe: Vec<f64>,
    pub ssi: Vec<usize>,
    /// Defaults to the base configuration's seed.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

impl SweepConfig {
    pub fn load(path: &Path, default_seed: Option<u64>) -> Result<Self> {
        let mut tree = read_json(path)?;
        if let (Some(seed), Some(base)) = (default_seed, tree.get_mut("base").and_then(|b| b.as_object_mut())) {
            base.entry("seed").or_insert(seed.into());
        }
        serde_json::from_value(tree).map_err(|e| BenchError::Config(e.to_string()))
    }

    /// Every combination in canonical (method, edpe, ssi, seed) order,
    /// each validated.
    pub fn combinations(&self) -> Result<Vec<RunConfig>> {
        let seeds = self.seeds.clone().unwrap_or_else(|| vec![self.base.seed]);
        for (name, empty) in [
            ("methods", self.methods.is_empty()),
            ("edpe", self.edpe.is_empty()),
            ("ssi", self.ssi.is_empty()),
            ("seeds", seeds.is_empty()),
        ] {
            if empty {
                return Err(BenchError::Config(format!("{name}: list must not be empty")));
            }
        }
        let mut out = Vec::new();
        for &method in &self.methods {
            for &edpe in &self.edpe {
                for &ssi in &self.ssi {
                    for &seed in &seeds {
                        let cfg = RunConfig {
                            method,
                            edpe,
                            ssi,
                            seed,
                            ..self.base.clone()
                        };
                        cfg.validate().map_err(|e| {
                            BenchError::Config(format!("combination {}: {e}", describe(&cfg)))
                        })?;
                        out.push(cfg);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Short human-readable name of one sweep combination.
pub fn describe(cfg: &RunConfig) -> String {
    format!(
        "method={} edpe={} ssi={} seed={}",
        cfg.method, cfg.edpe, cfg.ssi, cfg.seed
    )
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub config: RunConfig,
    pub result: RunResult,
}

#[derive(Debug, Default)]
pub struct SweepOutcome {
    /// Successful runs in canonical order.
    pub rows: Vec<SweepRow>,
    /// Failed combinations with their error, in canonical order.
    pub failures: Vec<(RunConfig, String)>,
}

impl SweepOutcome {
    pub fn records(&self) -> Vec<MetricsRecord> {
        self.rows.iter().map(|r| r.result.to_record(&r.config)).collect()
    }
}

/// Runs every combination on `data` with `jobs` workers. Each run owns its
/// state and clock; results come back in canonical order whatever the
/// scheduling.
pub fn run_sweep(sweep: &SweepConfig, data: &Dataset, jobs: usize) -> Result<SweepOutcome> {
    let combos = sweep.combinations()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("jobs: {e}")))?;
    let results: Vec<_> = pool.install(|| {
        combos
            .par_iter()
            .map(|cfg| run(cfg, data, &MonotonicClock::new()))
            .collect()
    });
    let mut outcome = SweepOutcome::default();
    for (config, result) in combos.into_iter().zip(results) {
        match result {
            Ok(result) => outcome.rows.push(SweepRow { config, result }),
            Err(e) => outcome.failures.push((config, e.to_string())),
        }
    }
    Ok(outcome)
}
