//! GLISTER: greedy validation-loss reduction with one-step lookahead.
//!
//! The gain of adding candidate `i` is the first-order Taylor estimate of the
//! validation-loss drop after one step of size `η` on `i`:
//! `L_v(θ − η g_i) ≈ L_v(θ) − η ∇L_v(θ)·g_i`. After each pick the working
//! parameters take that step, so later gains see the updated model.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{argmax_lowest, class_partition, BudgetSpec, Coreset, Method};
use crate::linalg;
use crate::model::GradientProvider;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlisterConfig {
    /// Inner step size.
    pub eta: f64,
}

/// Per-class greedy selection; the working parameters restart from
/// `snapshot` for every class. All weights are 1.
pub fn select_glister<P: GradientProvider + ?Sized>(
    provider: &P,
    snapshot: &[f64],
    budget: &BudgetSpec,
    labels: &[usize],
    cfg: GlisterConfig,
) -> Result<Coreset> {
    if provider.validation_len() == 0 {
        return Err(Error::EmptyValidation);
    }
    if !(cfg.eta > 0.0) || !cfg.eta.is_finite() {
        return Err(Error::InvalidArgument("glister eta must be > 0".into()));
    }
    let p = provider.param_len();
    if snapshot.len() != p {
        return Err(Error::ShapeMismatch {
            context: "glister snapshot",
            expected: p,
            got: snapshot.len(),
        });
    }
    let members = class_partition(labels, budget)?;
    let mut pairs = Vec::with_capacity(budget.total);
    let mut val_grad = vec![0.0; p];
    let mut grads: Vec<f64> = Vec::new();
    for (class, &k) in members.iter().zip(&budget.per_class) {
        if k == 0 {
            continue;
        }
        if k == class.len() {
            pairs.extend(class.iter().map(|&i| (i, 1.0)));
            continue;
        }
        let mut theta = snapshot.to_vec();
        let mut chosen = vec![false; class.len()];
        grads.resize(class.len() * p, 0.0);
        for _ in 0..k {
            provider.validation_gradient(&theta, &mut val_grad);
            for (local, &i) in class.iter().enumerate() {
                if !chosen[local] {
                    provider.candidate_gradient(&theta, i, &mut grads[local * p..(local + 1) * p]);
                }
            }
            let gains = (0..class.len())
                .filter(|&l| !chosen[l])
                .map(|l| (l, linalg::dot(&val_grad, &grads[l * p..(l + 1) * p])));
            let (best, _) = argmax_lowest(gains).expect("unselected candidates remain");
            chosen[best] = true;
            linalg::axpy(-cfg.eta, &grads[best * p..(best + 1) * p], &mut theta);
            pairs.push((class[best], 1.0));
        }
    }
    Ok(Coreset::from_pairs(pairs, Method::Glister))
}
