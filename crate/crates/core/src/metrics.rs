//! Benchmark metrics: effective data per epoch, time aggregation, coreset
//! churn and quadratic-weighted kappa.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::selectors::{Coreset, Method};
use crate::{Error, Result};

/// One benchmark row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub method: Method,
    pub edpe: f64,
    pub ssi: usize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(rename = "train_time_s")]
    pub training_time_s: f64,
    pub selection_time_s: f64,
    pub total_time_s: f64,
    pub accuracy: f64,
    pub kappa: Option<f64>,
}

/// Fraction of the training set used per epoch.
pub fn compute_edpe(coreset_size: usize, train_size: usize) -> Result<f64> {
    if coreset_size == 0 || coreset_size > train_size {
        return Err(Error::Domain(format!(
            "edpe needs 0 < coreset size <= train size, got {coreset_size}/{train_size}"
        )));
    }
    Ok(coreset_size as f64 / train_size as f64)
}

/// Recomputes `total_time_s` as training plus selection time.
pub fn aggregate_times(mut record: MetricsRecord) -> Result<MetricsRecord> {
    for (name, v) in [
        ("train_time_s", record.training_time_s),
        ("selection_time_s", record.selection_time_s),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    record.total_time_s = record.training_time_s + record.selection_time_s;
    Ok(record)
}

/// Histogram of combination keys within one coreset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChurnSnapshot {
    pub selected_at_epoch: usize,
    /// Every key seen in any coreset of the history, zero when absent here.
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChurnReport {
    pub class_label: usize,
    pub coresets: Vec<ChurnSnapshot>,
    /// `dropped_keys[t]`: keys present in coreset `t` and absent in `t + 1`.
    pub dropped_keys: Vec<Vec<String>>,
}

impl ChurnReport {
    pub fn total_dropped(&self) -> usize {
        self.dropped_keys.iter().map(Vec::len).sum()
    }
}

/// Tracks which combination keys of `class_label` each coreset in the
/// history covers, and which keys disappear between consecutive coresets.
pub fn churn_analysis(history: &[Coreset], ds: &Dataset, class_label: usize) -> Result<ChurnReport> {
    let keys = ds.combo_keys().ok_or(Error::MissingComboKeys)?;
    if class_label >= ds.class_count() {
        return Err(Error::InvalidArgument(format!(
            "class {class_label} outside [0, {})",
            ds.class_count()
        )));
    }
    let labels = ds.labels();
    let mut raw: Vec<BTreeMap<String, usize>> = Vec::with_capacity(history.len());
    let mut universe = BTreeSet::new();
    for coreset in history {
        let mut counts = BTreeMap::new();
        for &i in &coreset.indices {
            if i >= labels.len() {
                return Err(Error::InvalidArgument(format!("coreset index {i} out of range")));
            }
            if labels[i] == class_label {
                *counts.entry(keys[i].clone()).or_insert(0) += 1;
                universe.insert(keys[i].clone());
            }
        }
        raw.push(counts);
    }
    let dropped_keys = raw
        .windows(2)
        .map(|pair| {
            pair[0]
                .keys()
                .filter(|k| !pair[1].contains_key(*k))
                .cloned()
                .collect()
        })
        .collect();
    let coresets = history
        .iter()
        .zip(raw)
        .map(|(coreset, present)| ChurnSnapshot {
            selected_at_epoch: coreset.selected_at_epoch,
            counts: universe
                .iter()
                .map(|k| (k.clone(), present.get(k).copied().unwrap_or(0)))
                .collect(),
        })
        .collect();
    Ok(ChurnReport {
        class_label,
        coresets,
        dropped_keys,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaScore {
    pub value: f64,
    /// Set when the expected disagreement is zero and `value` is the
    /// conventional 0.
    pub degenerate: bool,
}

/// Cohen's kappa with quadratic weights `(i − j)² / (C − 1)²`.
pub fn quadratic_kappa(predictions: &[usize], labels: &[usize], classes: usize) -> Result<KappaScore> {
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "kappa inputs",
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("kappa needs at least one sample".into()));
    }
    if let Some(&bad) = predictions.iter().chain(labels).find(|&&v| v >= classes) {
        return Err(Error::InvalidArgument(format!("class {bad} outside [0, {classes})")));
    }
    if classes < 2 {
        return Ok(KappaScore { value: 0.0, degenerate: true });
    }
    let n = labels.len() as f64;
    let mut observed = vec![0.0; classes * classes];
    let mut true_hist = vec![0.0; classes];
    let mut pred_hist = vec![0.0; classes];
    for (&y, &p) in labels.iter().zip(predictions) {
        observed[y * classes + p] += 1.0;
        true_hist[y] += 1.0;
        pred_hist[p] += 1.0;
    }
    let denom = ((classes - 1) * (classes - 1)) as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..classes {
        for j in 0..classes {
            let d = i as f64 - j as f64;
            let w = d * d / denom;
            num += w * observed[i * classes + j];
            den += w * true_hist[i] * pred_hist[j] / n;
        }
    }
    if den == 0.0 {
        return Ok(KappaScore { value: 0.0, degenerate: true });
    }
    Ok(KappaScore {
        value: 1.0 - num / den,
        degenerate: false,
    })
}
