//! CRAIG: greedy facility-location maximisation over gradient distances.

use alloc::vec;
use alloc::vec::Vec;

use super::{argmax_lowest, class_partition, BudgetSpec, Coreset, Method};
use crate::linalg::{self, Matrix};
use crate::model::GradientMatrix;
use crate::{Error, Result};

/// Added to the largest in-class distance so every similarity is positive.
const DMAX_SHIFT: f64 = 1e-12;

/// Facility-location instance on `m` points with similarities
/// `s_ij = d_max − ‖g_i − g_j‖`.
#[derive(Debug, Clone)]
pub struct FacilityLocation {
    distances: Matrix,
    d_max: f64,
}

impl FacilityLocation {
    pub fn from_points(points: &[&[f64]]) -> Self {
        let m = points.len();
        let mut distances = Matrix::zeros(m, m);
        let mut d_max = 0.0f64;
        for i in 0..m {
            for j in i + 1..m {
                let d = linalg::distance(points[i], points[j]);
                distances.set(i, j, d);
                distances.set(j, i, d);
                d_max = d_max.max(d);
            }
        }
        Self {
            distances,
            d_max: d_max + DMAX_SHIFT,
        }
    }

    pub fn len(&self) -> usize {
        self.distances.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        self.d_max - self.distances.get(i, j)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances.get(i, j)
    }
}

/// `F(S) = Σ_i max_{j∈S} s_ij`, zero for the empty set.
pub fn facility_location_value(fl: &FacilityLocation, selected: &[usize]) -> f64 {
    (0..fl.len())
        .map(|i| {
            selected
                .iter()
                .map(|&j| fl.similarity(i, j))
                .fold(0.0f64, f64::max)
        })
        .sum()
}

/// Plain greedy: `k` rounds, each adding the element with the largest
/// marginal gain. Returns the picks in order and `F` after each pick.
pub fn facility_location_greedy(fl: &FacilityLocation, k: usize) -> (Vec<usize>, Vec<f64>) {
    let m = fl.len();
    let k = k.min(m);
    let mut coverage = vec![0.0f64; m];
    let mut chosen = vec![false; m];
    let mut picks = Vec::with_capacity(k);
    let mut trace = Vec::with_capacity(k);
    let mut value = 0.0;
    for _ in 0..k {
        let gains = (0..m).filter(|&j| !chosen[j]).map(|j| {
            let gain: f64 = (0..m)
                .map(|i| (fl.similarity(i, j) - coverage[i]).max(0.0))
                .sum();
            (j, gain)
        });
        let (best, gain) = argmax_lowest(gains).expect("unselected candidates remain");
        chosen[best] = true;
        picks.push(best);
        for (i, c) in coverage.iter_mut().enumerate() {
            *c = c.max(fl.similarity(i, best));
        }
        value += gain;
        trace.push(value);
    }
    (picks, trace)
}

/// Each point votes for its nearest selected element (ties to the lowest
/// selected index; a selected element always votes for itself).
fn medoid_weights(fl: &FacilityLocation, picks: &[usize]) -> Vec<usize> {
    let mut sorted = picks.to_vec();
    sorted.sort_unstable();
    let mut counts = vec![0usize; sorted.len()];
    for i in 0..fl.len() {
        let slot = match sorted.binary_search(&i) {
            Ok(own) => own,
            Err(_) => {
                let mut best = 0;
                for (s, &j) in sorted.iter().enumerate().skip(1) {
                    if fl.distance(i, j) < fl.distance(i, sorted[best]) {
                        best = s;
                    }
                }
                best
            }
        };
        counts[slot] += 1;
    }
    // keep the order of `picks`
    picks
        .iter()
        .map(|j| counts[sorted.binary_search(j).expect("pick present")])
        .collect()
}

/// Per-class CRAIG selection. Weights are the sizes of the clusters each
/// selected gradient represents, so they sum to the class population.
pub fn select_craig(grads: &GradientMatrix, budget: &BudgetSpec, labels: &[usize]) -> Result<Coreset> {
    if grads.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "craig gradients",
            expected: labels.len(),
            got: grads.len(),
        });
    }
    let members = class_partition(labels, budget)?;
    let mut pairs = Vec::with_capacity(budget.total);
    for (class, &k) in members.iter().zip(&budget.per_class) {
        if k == 0 {
            continue;
        }
        let points: Vec<&[f64]> = class.iter().map(|&i| grads.row(i)).collect();
        let fl = FacilityLocation::from_points(&points);
        let (picks, _) = facility_location_greedy(&fl, k);
        let weights = medoid_weights(&fl, &picks);
        for (&local, w) in picks.iter().zip(weights) {
            pairs.push((class[local], w as f64));
        }
    }
    Ok(Coreset::from_pairs(pairs, Method::Craig))
}
