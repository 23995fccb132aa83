//! Gradient-based coreset selection for data-efficient training.
//!
//! This crate is `no_std` (it needs `alloc`). It holds the numerical side of
//! the benchmark kit: synthetic datasets, small differentiable classifiers
//! with exact gradients, the Random / CRAIG / GradMatch / GLISTER selectors,
//! the reselection-scheduled training loop and the benchmark metrics.
//! File formats, wall clocks and the command line live in `coreset-bench`.

#![no_std]
// `!(x >= 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// numeric kernels read more clearly with explicit index loops
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod selectors;
pub mod trainer;

pub use error::{Error, Result};

pub use data::{combination_count, generate_blobs, generate_composite_sum, split, Dataset, Split};
pub use linalg::Matrix;
pub use metrics::{
    aggregate_times, churn_analysis, compute_edpe, quadratic_kappa, ChurnReport, KappaScore,
    MetricsRecord,
};
pub use model::{GradientMatrix, GradientMode, Model, ModelKind, OptimizerState};
pub use selectors::{allocate_budgets, BudgetPolicy, BudgetSpec, Coreset, Method};
pub use trainer::{run, run_full_data, selection_epochs, Clock, FrozenClock, RunConfig, RunResult};
