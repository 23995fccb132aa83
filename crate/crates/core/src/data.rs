//! Datasets, synthetic generators and stratified splitting.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::rng;
use crate::{Error, Result};

/// Dense feature matrix with integer labels in `[0, class_count)`.
///
/// `combo_keys`, when present, names the latent combination that generated
/// each sample (see [`generate_composite_sum`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    combo_keys: Option<Vec<String>>,
    class_count: usize,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        combo_keys: Option<Vec<String>>,
        class_count: usize,
    ) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one sample".into()));
        }
        if features.cols() == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one feature".into()));
        }
        Self::new_unchecked_size(features, labels, combo_keys, class_count)
    }

    fn new_unchecked_size(
        features: Matrix,
        labels: Vec<usize>,
        combo_keys: Option<Vec<String>>,
        class_count: usize,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::ShapeMismatch {
                context: "dataset labels",
                expected: features.rows(),
                got: labels.len(),
            });
        }
        if let Some(keys) = &combo_keys {
            if keys.len() != labels.len() {
                return Err(Error::ShapeMismatch {
                    context: "dataset combo keys",
                    expected: labels.len(),
                    got: keys.len(),
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside [0, {class_count})"
            )));
        }
        Ok(Self {
            features,
            labels,
            combo_keys,
            class_count,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    #[inline]
    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn combo_keys(&self) -> Option<&[String]> {
        self.combo_keys.as_deref()
    }

    /// Sample counts per class.
    pub fn class_populations(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Sample indices grouped by class, ascending within each class.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        class_members(&self.labels, self.class_count)
    }

    /// Rows at `indices`, in that order. The result may be empty.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            combo_keys: self
                .combo_keys
                .as_ref()
                .map(|keys| indices.iter().map(|&i| keys[i].clone()).collect()),
            class_count: self.class_count,
        }
    }
}

pub(crate) fn class_members(labels: &[usize], class_count: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); class_count];
    for (i, &y) in labels.iter().enumerate() {
        members[y].push(i);
    }
    members
}

/// Isotropic Gaussian blobs around seeded standard-normal class centers.
pub fn generate_blobs(
    n_per_class: usize,
    classes: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::InvalidArgument("blobs need at least 2 classes".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("blobs need dim >= 1".into()));
    }
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("blobs need n_per_class >= 1".into()));
    }
    if !(spread >= 0.0) || !spread.is_finite() {
        return Err(Error::InvalidArgument("spread must be finite and >= 0".into()));
    }
    let mut rng = rng::stream(seed, rng::STREAM_DATA);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| unit.sample(&mut rng)).collect())
        .collect();
    let n = n_per_class * classes;
    let mut features = Matrix::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for k in 0..n_per_class {
            let row = features.row_mut(c * n_per_class + k);
            for (x, mu) in row.iter_mut().zip(center) {
                *x = mu + spread * unit.sample(&mut rng);
            }
            labels.push(c);
        }
    }
    Dataset::new(features, labels, None, classes)
}

/// Parameters of the composite-sum generator: each sample is a multiset of
/// `k` digits whose sum is its label, featurised as a digit-count histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositeSumParams {
    pub n_samples: usize,
    pub digit_count_min: usize,
    pub digit_count_max: usize,
    /// Largest admissible digit sum; labels live in `[0, max_sum]`.
    pub max_sum: usize,
    /// Standard deviation of the padding noise dimensions.
    pub noise: f64,
    pub noise_dims: usize,
    pub seed: u64,
}

impl Default for CompositeSumParams {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            digit_count_min: 3,
            digit_count_max: 5,
            max_sum: 27,
            noise: 0.5,
            noise_dims: 4,
            seed: 0,
        }
    }
}

impl CompositeSumParams {
    pub fn class_count(&self) -> usize {
        (9 * self.digit_count_max).min(self.max_sum) + 1
    }

    pub fn generate(&self) -> Result<Dataset> {
        let (kmin, kmax) = (self.digit_count_min, self.digit_count_max);
        if kmin == 0 || kmin > kmax {
            return Err(Error::InvalidArgument(format!(
                "digit counts need 1 <= min <= max, got [{kmin}, {kmax}]"
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::InvalidArgument("noise must be finite and >= 0".into()));
        }
        let top_label = self.class_count() - 1;
        let dim = 10 + self.noise_dims;
        let table = MultisetTable::new(kmax, top_label);
        let mut rng = rng::stream(self.seed, rng::STREAM_DATA);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");

        let mut features = Matrix::zeros(self.n_samples, dim);
        let mut labels = Vec::with_capacity(self.n_samples);
        let mut keys = Vec::with_capacity(self.n_samples);
        for i in 0..self.n_samples {
            let label = rng.random_range(0..=top_label);
            let feasible: Vec<usize> = (kmin..=kmax)
                .filter(|&k| table.count(k, label, 9) > 0)
                .collect();
            let k = feasible[rng.random_range(0..feasible.len())];
            let digits = table.sample(k, label, &mut rng);
            let row = features.row_mut(i);
            for &d in &digits {
                row[d] += 1.0;
            }
            for x in &mut row[10..] {
                *x = self.noise * unit.sample(&mut rng);
            }
            labels.push(label);
            keys.push(combo_key(&digits));
        }
        Dataset::new(features, labels, Some(keys), top_label + 1)
    }
}

/// Composite-sum dataset with the default cap (`max_sum = 27`) and four noise
/// dimensions.
pub fn generate_composite_sum(
    n_samples: usize,
    digit_count_min: usize,
    digit_count_max: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    CompositeSumParams {
        n_samples,
        digit_count_min,
        digit_count_max,
        noise,
        seed,
        ..CompositeSumParams::default()
    }
    .generate()
}

/// Canonical key of a digit multiset: ascending digits joined by `-`.
pub fn combo_key(digits: &[usize]) -> String {
    let mut sorted = digits.to_vec();
    sorted.sort_unstable();
    let mut key = String::new();
    for (i, d) in sorted.iter().enumerate() {
        if i > 0 {
            key.push('-');
        }
        key.push_str(&d.to_string());
    }
    key
}

/// Parses a combo key back into its digits.
pub fn parse_combo_key(key: &str) -> Option<Vec<usize>> {
    key.split('-')
        .map(|part| part.parse::<usize>().ok().filter(|&d| d <= 9))
        .collect()
}

/// Number of digit multisets (digits 0–9, size in `[min, max]`) that sum to
/// `label`.
pub fn combination_count(label: usize, digit_count_min: usize, digit_count_max: usize) -> u64 {
    if digit_count_min > digit_count_max {
        return 0;
    }
    let table = MultisetTable::new(digit_count_max, label);
    (digit_count_min..=digit_count_max)
        .map(|k| table.count(k, label, 9))
        .sum()
}

/// `count(k, s, d)`: multisets of `k` digits, each at most `d`, summing to `s`.
struct MultisetTable {
    max_sum: usize,
    counts: Vec<u64>,
}

impl MultisetTable {
    fn new(max_k: usize, max_sum: usize) -> Self {
        let stride_d = 10;
        let stride_s = (max_sum + 1) * stride_d;
        let mut counts = vec![0u64; (max_k + 1) * stride_s];
        let idx = |k: usize, s: usize, d: usize| k * stride_s + s * stride_d + d;
        for d in 0..10 {
            counts[idx(0, 0, d)] = 1;
        }
        for k in 1..=max_k {
            for s in 0..=max_sum {
                for d in 0..10 {
                    // largest digit is exactly `top`, remaining k-1 digits are <= top
                    let mut total = 0;
                    for top in 0..=d.min(s) {
                        total += counts[idx(k - 1, s - top, top)];
                    }
                    counts[idx(k, s, d)] = total;
                }
            }
        }
        Self { max_sum, counts }
    }

    fn count(&self, k: usize, s: usize, d: usize) -> u64 {
        if s > self.max_sum {
            return 0;
        }
        let stride_s = (self.max_sum + 1) * 10;
        self.counts
            .get(k * stride_s + s * 10 + d)
            .copied()
            .unwrap_or(0)
    }

    /// Uniform draw among the multisets counted by `count(k, s, 9)`, as a
    /// non-increasing digit list.
    fn sample(&self, k: usize, s: usize, rng: &mut rng::Rng) -> Vec<usize> {
        let mut digits = Vec::with_capacity(k);
        let (mut remaining, mut sum, mut cap) = (k, s, 9usize);
        while remaining > 0 {
            let total = self.count(remaining, sum, cap);
            let mut pick = rng.random_range(0..total);
            let mut chosen = 0;
            for top in (0..=cap.min(sum)).rev() {
                let c = self.count(remaining - 1, sum - top, top);
                if pick < c {
                    chosen = top;
                    break;
                }
                pick -= c;
            }
            digits.push(chosen);
            remaining -= 1;
            sum -= chosen;
            cap = chosen;
        }
        digits
    }
}

/// Train/validation partition of a source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    /// Empty when the split was made with `val_fraction = 0`.
    pub validation: Dataset,
    /// Source indices of `train`, ascending.
    pub train_indices: Vec<usize>,
    /// Source indices of `validation`, ascending.
    pub validation_indices: Vec<usize>,
}

/// Stratified split: every class with samples contributes
/// `round(val_fraction · n_c)` (clamped to `[1, n_c − 1]`) samples to the
/// validation side.
pub fn split(ds: &Dataset, val_fraction: f64, seed: u64) -> Result<Split> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::InvalidArgument(format!(
            "val_fraction must be in [0, 1), got {val_fraction}"
        )));
    }
    if val_fraction == 0.0 {
        return Ok(Split {
            train: ds.clone(),
            validation: ds.subset(&[]),
            train_indices: (0..ds.len()).collect(),
            validation_indices: Vec::new(),
        });
    }
    let mut rng = rng::stream(seed, rng::STREAM_SPLIT);
    let mut train_indices = Vec::new();
    let mut validation_indices = Vec::new();
    for (class, mut members) in ds.class_members().into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "class {class} has {} sample(s); stratified split needs at least one per side",
                members.len()
            )));
        }
        let n_val = libm::round(val_fraction * members.len() as f64) as usize;
        let n_val = n_val.clamp(1, members.len() - 1);
        members.shuffle(&mut rng);
        validation_indices.extend_from_slice(&members[..n_val]);
        train_indices.extend_from_slice(&members[n_val..]);
    }
    train_indices.sort_unstable();
    validation_indices.sort_unstable();
    Ok(Split {
        train: ds.subset(&train_indices),
        validation: ds.subset(&validation_indices),
        train_indices,
        validation_indices,
    })
}

/// Dataset source named in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    Blobs {
        n_per_class: usize,
        classes: usize,
        dim: usize,
        spread: f64,
        #[serde(default)]
        seed: u64,
    },
    CompositeSum(CompositeSumParams),
    /// A dataset CSV on disk; resolved by the IO layer.
    Csv { path: String },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Blobs {
            n_per_class: 200,
            classes: 10,
            dim: 20,
            spread: 1.0,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    /// Builds the dataset for generator specs; `None` for file-backed specs.
    pub fn generate(&self) -> Option<Result<Dataset>> {
        match self {
            DatasetSpec::Blobs {
                n_per_class,
                classes,
                dim,
                spread,
                seed,
            } => Some(generate_blobs(*n_per_class, *classes, *dim, *spread, *seed)),
            DatasetSpec::CompositeSum(params) => Some(params.generate()),
            DatasetSpec::Csv { .. } => None,
        }
    }
}
