//! Independent reference computations for tests. Nothing here calls into the
//! code paths it is used to check.

#![allow(dead_code, clippy::needless_range_loop)]

/// Central finite-difference gradient of `f` at `x`.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            let orig = probe[k];
            probe[k] = orig + h;
            let up = f(&probe);
            probe[k] = orig - h;
            let down = f(&probe);
            probe[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let diff: f64 = got.iter().zip(want).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let scale: f64 = want.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / scale.max(1e-8)
}

/// Scalar-by-scalar logits for the flat parameter layouts
/// `[W (d×C), b]` (hidden = None) and `[W1 (d×h), b1, W2 (h×C), b2]`.
pub fn scalar_logits(params: &[f64], x: &[f64], classes: usize, hidden: Option<usize>) -> Vec<f64> {
    let d = x.len();
    let (phi, offset): (Vec<f64>, usize) = match hidden {
        None => (x.to_vec(), 0),
        Some(h) => {
            let mut a = vec![0.0; h];
            for j in 0..h {
                let mut z = params[d * h + j];
                for i in 0..d {
                    z += x[i] * params[i * h + j];
                }
                a[j] = if z > 0.0 { z } else { 0.0 };
            }
            (a, d * h + h)
        }
    };
    let m = phi.len();
    let mut out = vec![0.0; classes];
    for c in 0..classes {
        let mut z = params[offset + m * classes + c];
        for k in 0..m {
            z += phi[k] * params[offset + k * classes + c];
        }
        out[c] = z;
    }
    out
}

/// `−log softmax(logits)[label]`, computed without shifting by the max
/// (inputs in tests are small).
pub fn scalar_xent(logits: &[f64], label: usize) -> f64 {
    let z: f64 = logits.iter().map(|v| v.exp()).sum();
    z.ln() - logits[label]
}

/// Weighted mean loss over a batch using the scalar forward pass.
pub fn scalar_weighted_loss(
    params: &[f64],
    xs: &[Vec<f64>],
    labels: &[usize],
    weights: &[f64],
    classes: usize,
    hidden: Option<usize>,
) -> f64 {
    let total: f64 = weights.iter().sum();
    xs.iter()
        .zip(labels)
        .zip(weights)
        .map(|((x, &y), &w)| w * scalar_xent(&scalar_logits(params, x, classes, hidden), y))
        .sum::<f64>()
        / total
}

/// Every multiset of digits 0–9 with size in `[kmin, kmax]`, as
/// non-decreasing vectors.
pub fn enumerate_digit_multisets(kmin: usize, kmax: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for d in start..10 {
            cur.push(d);
            rec(d, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for k in kmin..=kmax {
        rec(0, k, &mut Vec::new(), &mut out);
    }
    out
}

pub fn brute_combination_count(label: usize, kmin: usize, kmax: usize) -> u64 {
    enumerate_digit_multisets(kmin, kmax)
        .iter()
        .filter(|m| m.iter().sum::<usize>() == label)
        .count() as u64
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Facility-location value with `s_ij = d_max − ‖p_i − p_j‖`, where `d_max`
/// is the largest pairwise distance plus `1e-12`.
pub fn facility_value(points: &[Vec<f64>], subset: &[usize]) -> f64 {
    let mut d_max: f64 = 0.0;
    for i in 0..points.len() {
        for j in 0..points.len() {
            d_max = d_max.max(euclid(&points[i], &points[j]));
        }
    }
    d_max += 1e-12;
    points
        .iter()
        .map(|p| {
            subset
                .iter()
                .map(|&j| d_max - euclid(p, &points[j]))
                .fold(0.0f64, f64::max)
        })
        .sum()
}

/// Best facility-location value over all `k`-subsets.
pub fn exhaustive_facility_optimum(points: &[Vec<f64>], k: usize) -> f64 {
    fn rec(points: &[Vec<f64>], k: usize, start: usize, cur: &mut Vec<usize>, best: &mut f64) {
        if cur.len() == k {
            *best = best.max(facility_value(points, cur));
            return;
        }
        for j in start..points.len() {
            cur.push(j);
            rec(points, k, j + 1, cur, best);
            cur.pop();
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(points, k, 0, &mut Vec::new(), &mut best);
    best
}

/// Ridge least squares `argmin ‖G w − b‖² + λ‖w‖²` over the given columns,
/// by Gaussian elimination with partial pivoting on the normal equations.
pub fn dense_ridge(atoms: &[Vec<f64>], target: &[f64], lambda: f64) -> Vec<f64> {
    let k = atoms.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = atoms[i].iter().zip(&atoms[j]).map(|(x, y)| x * y).sum();
        }
        a[i][i] += lambda;
        a[i][k] = atoms[i].iter().zip(target).map(|(x, y)| x * y).sum();
    }
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&r, &s| a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..k).map(|i| a[i][k] / a[i][i]).collect()
}

/// Mean softmax cross-entropy of a final layer `[W (m×C), b]` on fixed
/// features.
pub fn head_loss(params: &[f64], feats: &[Vec<f64>], labels: &[usize], classes: usize) -> f64 {
    feats
        .iter()
        .zip(labels)
        .map(|(phi, &y)| scalar_xent(&scalar_logits(params, phi, classes, None), y))
        .sum::<f64>()
        / feats.len() as f64
}

/// Quadratic kappa through the pairwise form
/// `1 − mean_n w(y_n, p_n) / mean_{n,m} w(y_n, p_m)`.
pub fn pairwise_kappa(pred: &[usize], truth: &[usize], classes: usize) -> f64 {
    let w = |i: usize, j: usize| ((i as f64 - j as f64).powi(2)) / (((classes - 1) * (classes - 1)) as f64);
    let n = truth.len() as f64;
    let observed: f64 = truth.iter().zip(pred).map(|(&y, &p)| w(y, p)).sum::<f64>() / n;
    let mut chance = 0.0;
    for &y in truth {
        for &p in pred {
            chance += w(y, p);
        }
    }
    chance /= n * n;
    1.0 - observed / chance
}

/// Quadratic kappa from explicit observed and expected confusion matrices.
pub fn confusion_kappa(pred: &[usize], truth: &[usize], classes: usize) -> f64 {
    let n = truth.len() as f64;
    let mut observed = vec![vec![0.0; classes]; classes];
    for (&y, &p) in truth.iter().zip(pred) {
        observed[y][p] += 1.0;
    }
    let row: Vec<f64> = observed.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<f64> = (0..classes).map(|j| observed.iter().map(|r| r[j]).sum()).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..classes {
        for j in 0..classes {
            let w = ((i as f64 - j as f64).powi(2)) / (((classes - 1) * (classes - 1)) as f64);
            num += w * observed[i][j];
            den += w * row[i] * col[j] / n;
        }
    }
    1.0 - num / den
}
