//! GradMatch: orthogonal matching pursuit toward the class gradient sum with
//! non-negative ridge-regularised weights.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{argmax_lowest, class_partition, BudgetSpec, Coreset, Method};
use crate::linalg::{self, nnls_gram_warm};
use crate::model::GradientMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradMatchConfig {
    /// Ridge penalty on the weights.
    pub lambda: f64,
    /// Stop once the residual norm falls to this value.
    pub tol: f64,
}

impl Default for GradMatchConfig {
    fn default() -> Self {
        Self { lambda: 0.5, tol: 1e-6 }
    }
}

/// Result of one OMP run over a set of atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpTrace {
    /// Atoms in the order they were added.
    pub support: Vec<usize>,
    /// Final weights aligned with `support`; zero entries are possible.
    pub weights: Vec<f64>,
    /// `‖b − G_S w‖` before the first pick and after every pick.
    pub residual_norms: Vec<f64>,
}

/// OMP on `atoms` toward `target`:
/// pick the unselected atom with the largest `|g_i · r|`, refit
/// `w = argmin_{w ≥ 0} ‖G_S w − b‖² + λ‖w‖²`, update the residual, and repeat
/// while `|S| < budget` and `‖r‖ > tol`.
pub fn omp_nonnegative(atoms: &[&[f64]], target: &[f64], budget: usize, cfg: GradMatchConfig) -> OmpTrace {
    let m = atoms.len();
    let mut residual = target.to_vec();
    let mut support: Vec<usize> = Vec::new();
    let mut in_support = vec![false; m];
    let mut weights: Vec<f64> = Vec::new();
    let mut residual_norms = vec![linalg::norm2(&residual)];
    // Gram entries and correlations with the target, grown as atoms arrive
    let mut gram: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();

    while support.len() < budget.min(m) && *residual_norms.last().unwrap() > cfg.tol {
        let scores = (0..m)
            .filter(|&i| !in_support[i])
            .map(|i| (i, linalg::dot(atoms[i], &residual).abs()));
        let Some((pick, _)) = argmax_lowest(scores) else { break };
        in_support[pick] = true;
        let row: Vec<f64> = support.iter().map(|&j| linalg::dot(atoms[pick], atoms[j])).collect();
        for (g, &v) in gram.iter_mut().zip(&row) {
            g.push(v);
        }
        let mut new_row = row;
        new_row.push(linalg::dot(atoms[pick], atoms[pick]));
        gram.push(new_row);
        rhs.push(linalg::dot(atoms[pick], target));
        support.push(pick);

        let k = support.len();
        let mut q = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                q[a * k + b] = gram[a][b];
            }
            q[a * k + a] += cfg.lambda;
        }
        // the previous optimum, padded with zero, is a valid starting state
        weights.push(0.0);
        weights = nnls_gram_warm(&q, &rhs, &weights);

        residual.copy_from_slice(target);
        for (&j, &w) in support.iter().zip(&weights) {
            if w != 0.0 {
                linalg::axpy(-w, atoms[j], &mut residual);
            }
        }
        residual_norms.push(linalg::norm2(&residual));
    }
    OmpTrace {
        support,
        weights,
        residual_norms,
    }
}

/// Per-class GradMatch: the target for class `c` is the sum of its members'
/// gradients. Atoms that end with zero weight are dropped, so a class may
/// contribute fewer samples than its budget.
pub fn select_gradmatch(
    grads: &GradientMatrix,
    budget: &BudgetSpec,
    labels: &[usize],
    cfg: GradMatchConfig,
) -> Result<Coreset> {
    if grads.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "gradmatch gradients",
            expected: labels.len(),
            got: grads.len(),
        });
    }
    if !(cfg.lambda >= 0.0) || !cfg.lambda.is_finite() {
        return Err(Error::InvalidArgument("gradmatch lambda must be finite and >= 0".into()));
    }
    let members = class_partition(labels, budget)?;
    let mut pairs = Vec::with_capacity(budget.total);
    for (class, &k) in members.iter().zip(&budget.per_class) {
        if k == 0 {
            continue;
        }
        let atoms: Vec<&[f64]> = class.iter().map(|&i| grads.row(i)).collect();
        let mut target = vec![0.0; grads.dim()];
        for a in &atoms {
            linalg::axpy(1.0, a, &mut target);
        }
        let trace = omp_nonnegative(&atoms, &target, k, cfg);
        for (&local, &w) in trace.support.iter().zip(&trace.weights) {
            if w > 0.0 {
                pairs.push((class[local], w));
            }
        }
    }
    Ok(Coreset::from_pairs(pairs, Method::GradMatch))
}
