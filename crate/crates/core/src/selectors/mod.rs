//! Coreset selectors and the per-class budget policies that drive them.
//!
//! Every selector works class by class: a [`BudgetSpec`] fixes how many
//! samples each class contributes, and the selector picks that many (or, for
//! GradMatch, at most that many) from the class's members. All argmax scans
//! break ties toward the lowest index.

mod craig;
mod glister;
mod gradmatch;
mod random;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::{Error, Result};

pub use craig::{facility_location_greedy, facility_location_value, select_craig, FacilityLocation};
pub use glister::{select_glister, GlisterConfig};
pub use gradmatch::{omp_nonnegative, select_gradmatch, GradMatchConfig, OmpTrace};
pub use random::select_random;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Random,
    Craig,
    #[serde(alias = "grad-match")]
    GradMatch,
    Glister,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Random, Method::Craig, Method::GradMatch, Method::Glister];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Craig => "craig",
            Method::GradMatch => "gradmatch",
            Method::Glister => "glister",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Method::Random),
            "craig" => Ok(Method::Craig),
            "gradmatch" | "grad-match" => Ok(Method::GradMatch),
            "glister" => Ok(Method::Glister),
            other => Err(Error::InvalidArgument(format!(
                "unknown method `{other}` (expected random, craig, gradmatch or glister)"
            ))),
        }
    }
}

/// Selected training indices (ascending) with their positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coreset {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub selected_at_epoch: usize,
    pub method: Method,
}

impl Coreset {
    /// Builds a coreset from `(index, weight)` pairs, sorting by index.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>, method: Method) -> Self {
        pairs.sort_unstable_by_key(|&(i, _)| i);
        let (indices, weights) = pairs.into_iter().unzip();
        Self {
            indices,
            weights,
            selected_at_epoch: 0,
            method,
        }
    }

    /// The whole training set with unit weights.
    pub fn full(n: usize, method: Method) -> Self {
        Self {
            indices: (0..n).collect(),
            weights: vec![1.0; n],
            selected_at_epoch: 0,
            method,
        }
    }

    pub fn at_epoch(mut self, epoch: usize) -> Self {
        self.selected_at_epoch = epoch;
        self
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Checks the structural invariants against a training set and budget.
    pub fn validate(&self, labels: &[usize], budget: &BudgetSpec) -> Result<()> {
        if self.indices.len() != self.weights.len() {
            return Err(Error::ShapeMismatch {
                context: "coreset weights",
                expected: self.indices.len(),
                got: self.weights.len(),
            });
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("coreset indices must be strictly ascending".into()));
        }
        if let Some(&i) = self.indices.iter().find(|&&i| i >= labels.len()) {
            return Err(Error::InvalidArgument(format!("coreset index {i} out of range")));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument("coreset weights must be positive".into()));
        }
        let mut per_class = vec![0usize; budget.per_class.len()];
        for &i in &self.indices {
            let y = labels[i];
            if y >= per_class.len() {
                return Err(Error::InvalidArgument(format!("label {y} has no budget entry")));
            }
            per_class[y] += 1;
        }
        for (c, (&got, &cap)) in per_class.iter().zip(&budget.per_class).enumerate() {
            if got > cap {
                return Err(Error::InvalidArgument(format!(
                    "class {c} holds {got} samples, budget {cap}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetPolicy {
    #[default]
    Uniform,
    Adaptive,
}

/// Total budget `K` and its split across classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub total: usize,
    pub per_class: Vec<usize>,
}

/// Splits `round(edpe · n)` slots across classes.
///
/// Uniform gives every non-empty class an equal share; adaptive shares are
/// proportional to `scores` with at least one slot per non-empty class.
/// Fractional shares are resolved by largest remainder (ties to the lower
/// class), and no class receives more than its population: any excess is
/// re-apportioned among the remaining classes by the same rule.
pub fn allocate_budgets(
    ds: &Dataset,
    edpe: f64,
    policy: BudgetPolicy,
    scores: Option<&[f64]>,
) -> Result<BudgetSpec> {
    allocate_for_populations(&ds.class_populations(), edpe, policy, scores)
}

pub fn allocate_for_populations(
    populations: &[usize],
    edpe: f64,
    policy: BudgetPolicy,
    scores: Option<&[f64]>,
) -> Result<BudgetSpec> {
    if !(edpe > 0.0 && edpe <= 1.0) {
        return Err(Error::InvalidArgument(format!("edpe must be in (0, 1], got {edpe}")));
    }
    let n: usize = populations.iter().sum();
    let total = libm::round(edpe * n as f64) as usize;
    let weights: Vec<f64> = match policy {
        BudgetPolicy::Uniform => vec![1.0; populations.len()],
        BudgetPolicy::Adaptive => {
            let scores = scores.ok_or_else(|| {
                Error::InvalidArgument("adaptive budgets need per-class scores".into())
            })?;
            if scores.len() != populations.len() {
                return Err(Error::ShapeMismatch {
                    context: "class scores",
                    expected: populations.len(),
                    got: scores.len(),
                });
            }
            if scores.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
                return Err(Error::InvalidArgument("class scores must be finite and >= 0".into()));
            }
            scores.to_vec()
        }
    };
    apportion(total, populations, &weights).map(|per_class| BudgetSpec { total, per_class })
}

fn apportion(total: usize, caps: &[usize], weights: &[f64]) -> Result<Vec<usize>> {
    let present = caps.iter().filter(|&&c| c > 0).count();
    if total < present {
        return Err(Error::InfeasibleBudget(format!(
            "total budget {total} is below the {present} non-empty classes"
        )));
    }
    let mut alloc = vec![0usize; caps.len()];
    let mut fixed = vec![false; caps.len()];
    for (c, &cap) in caps.iter().enumerate() {
        if cap == 0 {
            fixed[c] = true;
        }
    }
    // A zero score would starve a class that must still get its floor of one.
    let weight = |c: usize| if weights[c] > 0.0 { weights[c] } else { 0.0 };

    loop {
        let remaining = total - alloc.iter().zip(&fixed).filter(|(_, &f)| f).map(|(a, _)| a).sum::<usize>();
        let free: Vec<usize> = (0..caps.len()).filter(|&c| !fixed[c]).collect();
        if free.is_empty() {
            break;
        }
        let mass: f64 = free.iter().map(|&c| weight(c)).sum();
        let quota = |c: usize| {
            if mass > 0.0 {
                remaining as f64 * weight(c) / mass
            } else {
                remaining as f64 / free.len() as f64
            }
        };
        // Classes whose proportional share reaches their population are
        // pinned at the cap and the rest is re-apportioned.
        let saturated: Vec<usize> = free
            .iter()
            .copied()
            .filter(|&c| quota(c) >= caps[c] as f64)
            .collect();
        if !saturated.is_empty() {
            for c in saturated {
                alloc[c] = caps[c];
                fixed[c] = true;
            }
            continue;
        }
        for &c in &free {
            alloc[c] = (libm::floor(quota(c)) as usize).max(1).min(caps[c]);
        }
        let mut assigned: usize = free.iter().map(|&c| alloc[c]).sum();
        // Floors of one may overshoot; take back from the largest surplus.
        while assigned > remaining {
            let c = free
                .iter()
                .copied()
                .filter(|&c| alloc[c] > 1)
                .max_by(|&a, &b| {
                    let sa = alloc[a] as f64 - quota(a);
                    let sb = alloc[b] as f64 - quota(b);
                    sa.partial_cmp(&sb).unwrap().then(b.cmp(&a))
                })
                .ok_or_else(|| Error::InfeasibleBudget("cannot honour the per-class floor".into()))?;
            alloc[c] -= 1;
            assigned -= 1;
        }
        while assigned < remaining {
            let c = free
                .iter()
                .copied()
                .filter(|&c| alloc[c] < caps[c])
                .max_by(|&a, &b| {
                    let ra = quota(a) - alloc[a] as f64;
                    let rb = quota(b) - alloc[b] as f64;
                    ra.partial_cmp(&rb).unwrap().then(b.cmp(&a))
                })
                .ok_or_else(|| {
                    Error::InfeasibleBudget(format!("budget {total} exceeds the dataset size"))
                })?;
            alloc[c] += 1;
            assigned += 1;
        }
        break;
    }
    let sum: usize = alloc.iter().sum();
    if sum != total {
        return Err(Error::InfeasibleBudget(format!(
            "budget {total} exceeds the dataset size {}",
            caps.iter().sum::<usize>()
        )));
    }
    Ok(alloc)
}

/// Members of each class among `labels`, with a budget check.
pub(crate) fn class_partition(labels: &[usize], budget: &BudgetSpec) -> Result<Vec<Vec<usize>>> {
    let classes = budget.per_class.len();
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::InvalidArgument(format!("label {bad} has no budget entry")));
    }
    let members = crate::data::class_members(labels, classes);
    for (c, (m, &k)) in members.iter().zip(&budget.per_class).enumerate() {
        if k > m.len() {
            return Err(Error::InfeasibleBudget(format!(
                "class {c} has {} samples but budget {k}",
                m.len()
            )));
        }
    }
    Ok(members)
}

/// Index of the maximum, ties to the lowest position. `None` when empty or
/// every value is NaN.
pub(crate) fn argmax_lowest(values: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values {
        if v.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}
