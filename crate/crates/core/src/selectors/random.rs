use alloc::vec::Vec;

use rand::seq::index;

use super::{class_partition, BudgetSpec, Coreset, Method};
use crate::rng::Rng;
use crate::Result;

/// Uniform sampling without replacement inside each class; unit weights.
pub fn select_random(labels: &[usize], budget: &BudgetSpec, rng: &mut Rng) -> Result<Coreset> {
    let members = class_partition(labels, budget)?;
    let mut pairs = Vec::with_capacity(budget.total);
    for (class, &k) in members.iter().zip(&budget.per_class) {
        for pos in index::sample(rng, class.len(), k) {
            pairs.push((class[pos], 1.0));
        }
    }
    Ok(Coreset::from_pairs(pairs, Method::Random))
}
