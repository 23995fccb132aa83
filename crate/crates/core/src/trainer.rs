//! The reselection-scheduled training loop.
//!
//! Epoch 0 trains on a random coreset. Every `ssi` epochs the configured
//! selector replaces it using per-sample gradients at the current
//! parameters. Each epoch reshuffles the coreset and runs weighted
//! mini-batch SGD with momentum, cosine learning-rate decay and global-norm
//! clipping. Time spent selecting (gradient extraction included) is charged
//! to selection time; everything else in the loop is training time.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{self, combination_count, Dataset, DatasetSpec};
use crate::metrics::{quadratic_kappa, MetricsRecord};
use crate::model::{
    cosine_lr, loss_and_grad, mean_loss_and_grad, per_sample_gradients, GradientMode, Model,
    ModelKind, OptimizerState, SoftmaxHead,
};
use crate::rng;
use crate::selectors::{
    allocate_for_populations, select_craig, select_glister, select_gradmatch, select_random,
    BudgetPolicy, BudgetSpec, Coreset, GlisterConfig, GradMatchConfig, Method,
};
use crate::{Error, Result};

/// Monotonic time source, in seconds from an arbitrary origin.
pub trait Clock {
    fn now(&self) -> f64;
}

impl<F: Fn() -> f64> Clock for F {
    fn now(&self) -> f64 {
        self()
    }
}

/// A clock that never advances; all recorded times are zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub model: ModelKind,
    pub base_lr: f64,
    pub momentum: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub edpe: f64,
    pub ssi: usize,
    pub method: Method,
    pub budget_policy: BudgetPolicy,
    /// Per-class complexity scores for adaptive budgets. Composite-sum
    /// datasets default to their combination counts.
    pub class_scores: Option<Vec<f64>>,
    pub val_fraction: f64,
    /// Held-out share used for the accuracy series; 0 evaluates on train.
    pub test_fraction: f64,
    pub lambda: f64,
    pub gradmatch_tol: f64,
    /// GLISTER inner step; defaults to 0.1 × the current learning rate.
    pub eta: Option<f64>,
    pub gradient_mode: GradientMode,
    /// Also report quadratic kappa on the evaluation set.
    pub ordinal: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            model: ModelKind::Logistic,
            base_lr: 0.05,
            momentum: 0.9,
            clip_norm: 1.0,
            epochs: 30,
            batch_size: 32,
            edpe: 0.1,
            ssi: 10,
            method: Method::Random,
            budget_policy: BudgetPolicy::Uniform,
            class_scores: None,
            val_fraction: 0.1,
            test_fraction: 0.2,
            lambda: 0.5,
            gradmatch_tol: 1e-6,
            eta: None,
            gradient_mode: GradientMode::LastLayer,
            ordinal: false,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Checks everything that does not depend on the dataset contents.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be >= 1"));
        }
        if self.ssi == 0 || self.ssi > self.epochs {
            return Err(Error::config(
                "ssi",
                format!("must be in [1, epochs = {}], got {}", self.epochs, self.ssi),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if !(self.edpe > 0.0 && self.edpe <= 1.0) {
            return Err(Error::config("edpe", format!("must be in (0, 1], got {}", self.edpe)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum", "must be in [0, 1)"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::config("clip_norm", "must be > 0"));
        }
        if !(self.base_lr > 0.0) || !self.base_lr.is_finite() {
            return Err(Error::config("base_lr", "must be finite and > 0"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::config("val_fraction", "must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::config("test_fraction", "must be in [0, 1)"));
        }
        if self.method == Method::Glister && self.val_fraction == 0.0 && self.edpe < 1.0 {
            return Err(Error::config("val_fraction", "glister needs a validation split (> 0)"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::config("lambda", "must be finite and >= 0"));
        }
        if !(self.gradmatch_tol >= 0.0) {
            return Err(Error::config("gradmatch_tol", "must be >= 0"));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(Error::config("eta", "must be finite and > 0"));
            }
        }
        if let ModelKind::Mlp { hidden: 0 } = self.model {
            return Err(Error::config("model.hidden", "must be >= 1"));
        }
        if let Some(scores) = &self.class_scores {
            if scores.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
                return Err(Error::config("class_scores", "entries must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Scores that drive adaptive budgets, if any are available.
    pub fn resolve_class_scores(&self, classes: usize) -> Option<Vec<f64>> {
        if let Some(scores) = &self.class_scores {
            return Some(scores.clone());
        }
        match &self.dataset {
            DatasetSpec::CompositeSum(p) => Some(
                (0..classes)
                    .map(|c| combination_count(c, p.digit_count_min, p.digit_count_max) as f64)
                    .collect(),
            ),
            _ => None,
        }
    }
}

/// Epochs at which the configured selector runs: positive multiples of
/// `ssi` strictly below `total_epochs`.
pub fn selection_epochs(total_epochs: usize, ssi: usize) -> Vec<usize> {
    if ssi == 0 {
        return Vec::new();
    }
    (1..total_epochs).filter(|e| e % ssi == 0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// Accuracy on the evaluation set after each epoch.
    pub accuracy_per_epoch: Vec<f64>,
    pub final_accuracy: f64,
    pub best_accuracy: f64,
    pub best_epoch: usize,
    pub kappa: Option<f64>,
    pub training_time_s: f64,
    pub selection_time_s: f64,
    pub total_time_s: f64,
    /// Effective data per epoch of the final coreset.
    pub edpe: f64,
    pub train_size: usize,
    /// Source-dataset indices of the training split; coreset indices point
    /// into this list.
    pub train_indices: Vec<usize>,
    pub budget: BudgetSpec,
    pub coreset_history: Vec<Coreset>,
    /// Calls of the configured selector at reselection epochs.
    pub selector_invocations: usize,
}

impl RunResult {
    pub fn to_record(&self, cfg: &RunConfig) -> MetricsRecord {
        MetricsRecord {
            method: cfg.method,
            edpe: self.edpe,
            ssi: cfg.ssi,
            epochs: cfg.epochs,
            seed: cfg.seed,
            training_time_s: self.training_time_s,
            selection_time_s: self.selection_time_s,
            total_time_s: self.total_time_s,
            accuracy: self.final_accuracy,
            kappa: self.kappa,
        }
    }
}

/// Argmax-logit accuracy, ties to the lowest class.
pub fn evaluate_accuracy(model: &Model, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("accuracy needs a non-empty dataset".into()));
    }
    let predictions = model.predict(ds.features())?;
    let hits = predictions.iter().zip(ds.labels()).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / ds.len() as f64)
}

/// Quadratic-weighted kappa of the model's predictions on `ds`.
pub fn evaluate_quadratic_kappa(model: &Model, ds: &Dataset) -> Result<f64> {
    let predictions = model.predict(ds.features())?;
    Ok(quadratic_kappa(&predictions, ds.labels(), ds.class_count())?.value)
}

struct Prepared {
    train: Dataset,
    validation: Dataset,
    evaluation: Dataset,
    train_indices: Vec<usize>,
}

fn prepare(cfg: &RunConfig, data: &Dataset) -> Result<Prepared> {
    let outer = data::split(data, cfg.test_fraction, cfg.seed)?;
    let inner = data::split(&outer.train, cfg.val_fraction, cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15))?;
    let train_indices = inner.train_indices.iter().map(|&i| outer.train_indices[i]).collect();
    let evaluation = if outer.validation.is_empty() {
        inner.train.clone()
    } else {
        outer.validation
    };
    Ok(Prepared {
        train: inner.train,
        validation: inner.validation,
        evaluation,
        train_indices,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Coreset,
    FullData,
}

/// Runs one configured experiment on `data`.
pub fn run(cfg: &RunConfig, data: &Dataset, clock: &dyn Clock) -> Result<RunResult> {
    run_with_mode(cfg, data, clock, Mode::Coreset)
}

/// Plain full-data training under the same split, initialisation, schedule
/// and shuffling as [`run`], without any coreset machinery.
pub fn run_full_data(cfg: &RunConfig, data: &Dataset, clock: &dyn Clock) -> Result<RunResult> {
    run_with_mode(cfg, data, clock, Mode::FullData)
}

fn run_with_mode(cfg: &RunConfig, data: &Dataset, clock: &dyn Clock, mode: Mode) -> Result<RunResult> {
    cfg.validate()?;
    let prepared = prepare(cfg, data)?;
    let Prepared {
        train,
        validation,
        evaluation,
        train_indices,
    } = prepared;
    let n = train.len();
    let classes = train.class_count();
    let populations = train.class_populations();

    let budget = match mode {
        Mode::FullData => BudgetSpec {
            total: n,
            per_class: populations.clone(),
        },
        Mode::Coreset => {
            let scores = match cfg.budget_policy {
                BudgetPolicy::Uniform => None,
                BudgetPolicy::Adaptive => Some(cfg.resolve_class_scores(classes).ok_or_else(|| {
                    Error::config("class_scores", "adaptive budgets need class_scores for this dataset")
                })?),
            };
            allocate_for_populations(&populations, cfg.edpe, cfg.budget_policy, scores.as_deref())
                .map_err(|e| match e {
                    Error::InfeasibleBudget(msg) => Error::InfeasibleBudget(format!(
                        "{msg} (edpe {} of {n} training samples)",
                        cfg.edpe
                    )),
                    other => other,
                })?
        }
    };
    let full_data = budget.per_class == populations;

    let mut model = Model::init(cfg.model, train.dim(), classes, cfg.seed)?;
    let mut optimizer = OptimizerState::new(model.params().len(), cfg.momentum, cfg.base_lr, cfg.clip_norm)?;
    let mut select_rng = rng::stream(cfg.seed, rng::STREAM_SELECT);
    let mut shuffle_rng = rng::stream(cfg.seed, rng::STREAM_SHUFFLE);

    let mut training_time = 0.0;
    let mut selection_time = 0.0;
    let mut invocations = 0;

    let mut coreset = if full_data {
        Coreset::full(n, cfg.method)
    } else {
        let t0 = clock.now();
        let c = select_random(train.labels(), &budget, &mut select_rng)?;
        selection_time += clock.now() - t0;
        c
    };
    let mut history = alloc::vec![coreset.clone()];
    let reselect: Vec<usize> = selection_epochs(cfg.epochs, cfg.ssi);

    let mut accuracy_per_epoch = Vec::with_capacity(cfg.epochs);
    let (mut best_accuracy, mut best_epoch) = (f64::NEG_INFINITY, 0);
    let mut order: Vec<usize> = Vec::new();

    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(epoch, cfg.epochs, cfg.base_lr);
        if reselect.binary_search(&epoch).is_ok() {
            if full_data {
                coreset = coreset.clone().at_epoch(epoch);
            } else {
                let t0 = clock.now();
                let fresh = select(cfg, &model, &train, &validation, &budget, lr, &mut select_rng)?;
                selection_time += clock.now() - t0;
                invocations += 1;
                // An empty selection (all weights pruned) keeps the previous coreset.
                coreset = if fresh.is_empty() { coreset.clone() } else { fresh }.at_epoch(epoch);
            }
            history.push(coreset.clone());
        }

        let t0 = clock.now();
        order.clear();
        order.extend(0..coreset.len());
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let indices: Vec<usize> = chunk.iter().map(|&p| coreset.indices[p]).collect();
            let x = train.features().select_rows(&indices);
            let labels: Vec<usize> = indices.iter().map(|&i| train.labels()[i]).collect();
            let (_, grad) = match mode {
                Mode::FullData => mean_loss_and_grad(&model, &x, &labels)?,
                Mode::Coreset => {
                    let weights: Vec<f64> = chunk.iter().map(|&p| coreset.weights[p]).collect();
                    loss_and_grad(&model, &x, &labels, &weights)?
                }
            };
            optimizer.step(&mut model, &grad, lr)?;
        }
        let accuracy = evaluate_accuracy(&model, &evaluation)?;
        training_time += clock.now() - t0;
        if accuracy > best_accuracy {
            best_accuracy = accuracy;
            best_epoch = epoch;
        }
        accuracy_per_epoch.push(accuracy);
    }

    let kappa = if cfg.ordinal {
        Some(evaluate_quadratic_kappa(&model, &evaluation)?)
    } else {
        None
    };
    let final_accuracy = *accuracy_per_epoch.last().expect("epochs >= 1");
    let edpe = crate::metrics::compute_edpe(coreset.len(), n)?;
    Ok(RunResult {
        accuracy_per_epoch,
        final_accuracy,
        best_accuracy,
        best_epoch,
        kappa,
        training_time_s: training_time,
        selection_time_s: selection_time,
        total_time_s: training_time + selection_time,
        edpe,
        train_size: n,
        train_indices,
        budget,
        coreset_history: history,
        selector_invocations: invocations,
    })
}

fn select(
    cfg: &RunConfig,
    model: &Model,
    train: &Dataset,
    validation: &Dataset,
    budget: &BudgetSpec,
    lr: f64,
    rng: &mut rng::Rng,
) -> Result<Coreset> {
    let labels = train.labels();
    match cfg.method {
        Method::Random => select_random(labels, budget, rng),
        Method::Craig => {
            let grads = per_sample_gradients(model, train.features(), labels, cfg.gradient_mode)?;
            select_craig(&grads, budget, labels)
        }
        Method::GradMatch => {
            let grads = per_sample_gradients(model, train.features(), labels, cfg.gradient_mode)?;
            let gm = GradMatchConfig {
                lambda: cfg.lambda,
                tol: cfg.gradmatch_tol,
            };
            select_gradmatch(&grads, budget, labels, gm)
        }
        Method::Glister => {
            if validation.is_empty() {
                return Err(Error::EmptyValidation);
            }
            let head = SoftmaxHead::new(model, train.features(), labels, validation.features(), validation.labels())?;
            let snapshot = &model.params()[model.last_layer_range()];
            let eta = cfg.eta.unwrap_or(0.1 * lr);
            select_glister(&head, snapshot, budget, labels, GlisterConfig { eta })
        }
    }
}
