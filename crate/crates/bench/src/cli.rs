//! Command-line interface.
//!
//! Seeds resolve as: `--seed` flag, then the `seed` key of a config file,
//! then `CORESET_BENCH_SEED`, then 0. Other flags likewise override the
//! matching config keys.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coreset_core::data::CompositeSumParams;
use coreset_core::{churn_analysis, generate_blobs, run, BudgetPolicy, Method, RunConfig};

use crate::error::{BenchError, Result};
use crate::io::{self, StoredHistory};
use crate::sweep::{describe, load_run_config, resolve_dataset, run_sweep, MonotonicClock, SweepConfig};

pub const SEED_ENV: &str = "CORESET_BENCH_SEED";

#[derive(Debug, Parser)]
#[command(name = "coreset-bench", version, about = "Coreset-selection benchmark driver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset CSV.
    Gen(GenArgs),
    /// Execute one configured run and append its row to a results file.
    Run(RunArgs),
    /// Execute the method × edpe × ssi × seed grid of a sweep config.
    Sweep(SweepArgs),
    /// Summarise a results file per (method, edpe, ssi).
    Report(ReportArgs),
    /// Print the combination churn of one class across a stored run.
    Churn(ChurnArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    Blobs,
    CompositeSum,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: DatasetKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Composite-sum: number of samples.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    /// Composite-sum: fewest digits per sample.
    #[arg(long, default_value_t = 3)]
    pub min_digits: usize,
    /// Composite-sum: most digits per sample.
    #[arg(long, default_value_t = 5)]
    pub max_digits: usize,
    /// Composite-sum: largest label.
    #[arg(long, default_value_t = 27)]
    pub max_sum: usize,
    /// Composite-sum: standard deviation of the feature noise.
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    /// Composite-sum: number of pure-noise feature columns.
    #[arg(long, default_value_t = 4)]
    pub noise_dims: usize,
    /// Blobs: samples per class.
    #[arg(long, default_value_t = 200)]
    pub n_per_class: usize,
    /// Blobs: number of classes.
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    /// Blobs: feature dimension.
    #[arg(long, default_value_t = 20)]
    pub dim: usize,
    /// Blobs: within-class standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Uniform,
    Adaptive,
}

impl From<PolicyArg> for BudgetPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Uniform => BudgetPolicy::Uniform,
            PolicyArg::Adaptive => BudgetPolicy::Adaptive,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Results file; `.json` selects JSON, anything else CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory to store the training split and coreset history in.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub edpe: Option<f64>,
    #[arg(long)]
    pub ssi: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_enum)]
    pub budget_policy: Option<PolicyArg>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; rows are written in canonical order regardless.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Results file to summarise.
    #[arg(long)]
    pub results: PathBuf,
    /// Also convert the rows into this file (format by extension).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChurnArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long = "class")]
    pub class_label: usize,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| BenchError::Config(format!("{SEED_ENV}: `{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn print(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<()> {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| BenchError::io(std::path::Path::new("<stdout>"), e))
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Run(a) => cmd_run(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Report(a) => cmd_report(a, out),
        Command::Churn(a) => cmd_churn(a, out),
    }
}

pub fn cmd_gen(args: GenArgs, out: &mut dyn Write) -> Result<()> {
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let config_err = |e: coreset_core::Error| BenchError::Config(e.to_string());
    let ds = match args.kind {
        DatasetKind::Blobs => {
            generate_blobs(args.n_per_class, args.classes, args.dim, args.spread, seed).map_err(config_err)?
        }
        DatasetKind::CompositeSum => CompositeSumParams {
            n_samples: args.n,
            digit_count_min: args.min_digits,
            digit_count_max: args.max_digits,
            max_sum: args.max_sum,
            noise: args.noise,
            noise_dims: args.noise_dims,
            seed,
        }
        .generate()
        .map_err(config_err)?,
    };
    io::save_csv(&ds, &args.out)?;
    print(
        out,
        format_args!("n={} d={} C={} -> {}", ds.len(), ds.dim(), ds.class_count(), args.out.display()),
    )
}

/// The run configuration after applying flag overrides.
pub fn resolve_run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = load_run_config(&args.config, env_seed()?)?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.method {
        cfg.method = v;
    }
    if let Some(v) = args.edpe {
        cfg.edpe = v;
    }
    if let Some(v) = args.ssi {
        cfg.ssi = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.budget_policy {
        cfg.budget_policy = v.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_run(args: RunArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = resolve_run_config(&args)?;
    let data = resolve_dataset(&cfg.dataset)?;
    let result = run(&cfg, &data, &MonotonicClock::new())?;
    let record = result.to_record(&cfg);
    io::append_results(std::slice::from_ref(&record), &args.out)?;
    if let Some(dir) = &args.run_dir {
        let history = StoredHistory {
            train_indices: result.train_indices.clone(),
            coresets: result.coreset_history.clone(),
        };
        io::save_run_dir(dir, &data.subset(&result.train_indices), &history)?;
    }
    print(
        out,
        format_args!(
            "{}: accuracy={:.4} edpe={:.4} train_time_s={:.3} selection_time_s={:.3} total_time_s={:.3}",
            describe(&cfg),
            record.accuracy,
            record.edpe,
            record.training_time_s,
            record.selection_time_s,
            record.total_time_s
        ),
    )
}

pub fn cmd_sweep(args: SweepArgs, out: &mut dyn Write) -> Result<()> {
    let sweep = SweepConfig::load(&args.config, env_seed()?)?;
    // validate the grid before touching the dataset
    let total = sweep.combinations()?.len();
    let data = resolve_dataset(&sweep.base.dataset)?;
    let outcome = run_sweep(&sweep, &data, args.jobs as usize)?;
    io::append_results(&outcome.records(), &args.out)?;
    print(
        out,
        format_args!(
            "{} of {total} runs succeeded -> {}",
            outcome.rows.len(),
            args.out.display()
        ),
    )?;
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(BenchError::SweepFailures {
            total,
            failures: outcome
                .failures
                .iter()
                .map(|(cfg, e)| format!("  {}: {e}", describe(cfg)))
                .collect(),
        })
    }
}

pub fn cmd_report(args: ReportArgs, out: &mut dyn Write) -> Result<()> {
    let records = io::read_results(&args.results)?;
    if let Some(path) = &args.out {
        io::write_results(&records, path, io::ResultFormat::from_path(path))?;
    }
    // key on the textual edpe so grouping is exact and ordering stable
    let mut groups: BTreeMap<(Method, String, usize), Vec<&coreset_core::MetricsRecord>> = BTreeMap::new();
    for r in &records {
        groups.entry((r.method, format!("{:.6}", r.edpe), r.ssi)).or_default().push(r);
    }
    print(
        out,
        format_args!(
            "{:<10} {:>8} {:>5} {:>5} {:>9} {:>12} {:>12} {:>12}",
            "method", "edpe", "ssi", "runs", "accuracy", "train_s", "select_s", "total_s"
        ),
    )?;
    for ((method, edpe, ssi), rows) in groups {
        let mean = |f: fn(&coreset_core::MetricsRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
        print(
            out,
            format_args!(
                "{:<10} {:>8} {:>5} {:>5} {:>9.4} {:>12.3} {:>12.3} {:>12.3}",
                method.as_str(),
                edpe,
                ssi,
                rows.len(),
                mean(|r| r.accuracy),
                mean(|r| r.training_time_s),
                mean(|r| r.selection_time_s),
                mean(|r| r.total_time_s)
            ),
        )?;
    }
    Ok(())
}

pub fn cmd_churn(args: ChurnArgs, out: &mut dyn Write) -> Result<()> {
    let (train, history) = io::load_run_dir(&args.run_dir)?;
    let report = churn_analysis(&history.coresets, &train, args.class_label).map_err(|e| match e {
        coreset_core::Error::MissingComboKeys => BenchError::Config(format!(
            "{}: the stored dataset has no `combo` column; churn needs a composite-sum dataset",
            args.run_dir.join(io::RUN_TRAIN_FILE).display()
        )),
        other => other.into(),
    })?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match &args.out {
        Some(path) => std::fs::write(path, json + "\n").map_err(|e| BenchError::io(path, e)),
        None => print(out, format_args!("{json}")),
    }
}
