//! Error metrics for the two studies.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::models::BoltzmannParams;
use crate::sampling::require_invertible;

/// Squared distance between two Boltzmann parameter sets over the upper
/// triangle of `M`, `b` and `c`.
pub fn param_error_boltzmann(theta_hat: &BoltzmannParams, theta_star: &BoltzmannParams) -> Result<f64> {
    if theta_hat.dim() != theta_star.dim() {
        return Err(invalid(format!(
            "dimension mismatch: {} vs {}",
            theta_hat.dim(),
            theta_star.dim()
        )));
    }
    Ok(theta_hat
        .to_vec()
        .iter()
        .zip(theta_star.to_vec())
        .map(|(a, b)| (a - b).powi(2))
        .sum())
}

/// Result of aligning estimated experts with the true ones.
#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    /// Frobenius distance of the aligned `R` from `[I; 0]`.
    pub error: f64,
    /// `matched[j]` is the estimated expert assigned to true expert `j`.
    pub matched: Vec<usize>,
}

/// Aligns estimated experts `b̂_k` (rows of `b_hat`, K×n) with the columns of
/// the true mixing matrix `b_star` (n×n).
///
/// Row `k` of `R` is `b̂_kᵀ (B*ᵀ)⁻¹`, which is a signed unit vector exactly when
/// `b̂_k = ±b*_j`. The minimum over injective assignments of true experts to
/// rows and per-row signs of `‖aligned rows − I‖² + ‖other rows‖²` is found
/// by dynamic programming over subsets of true experts.
pub fn poe_alignment(b_hat: &[Vec<f64>], b_star: &DMatrix<f64>) -> Result<Alignment> {
    require_invertible(b_star)?;
    let n = b_star.nrows();
    let k = b_hat.len();
    if k < n {
        return Err(invalid(format!("need at least {n} estimated experts, got {k}")));
    }
    if n > 20 {
        return Err(invalid("alignment supports at most 20 true experts"));
    }
    if b_hat.iter().any(|b| b.len() != n) {
        return Err(invalid("estimated experts have the wrong dimension"));
    }
    let inv_t = b_star
        .transpose()
        .try_inverse()
        .ok_or_else(|| invalid("true mixing matrix is singular"))?;
    let rows: Vec<Vec<f64>> = b_hat
        .iter()
        .map(|b| (0..n).map(|j| (0..n).map(|i| b[i] * inv_t[(i, j)]).sum()).collect())
        .collect();

    // Assigning row r to column j changes the cost by 1 − 2|R_rj| relative to
    // leaving r unassigned.
    let total: f64 = rows.iter().flatten().map(|v| v * v).sum();
    let full = (1usize << n) - 1;
    // layers[r][mask]: best cost using rows < r with true experts `mask` assigned
    let mut layers = vec![vec![f64::INFINITY; 1 << n]];
    layers[0][0] = 0.0;
    let mut choice = vec![vec![None; 1 << n]; k + 1];
    for (r, row) in rows.iter().enumerate() {
        let prev = &layers[r];
        let mut next = prev.clone();
        for (mask, &base) in prev.iter().enumerate() {
            if !base.is_finite() {
                continue;
            }
            for (j, v) in row.iter().enumerate() {
                if mask & (1 << j) == 0 {
                    let m2 = mask | (1 << j);
                    let c = base + 1.0 - 2.0 * v.abs();
                    if c < next[m2] {
                        next[m2] = c;
                        choice[r + 1][m2] = Some((j, mask));
                    }
                }
            }
        }
        layers.push(next);
    }
    let min = total + layers[k][full];
    let mut matched = vec![0; n];
    let mut mask = full;
    for r in (1..=k).rev() {
        if let Some((j, prev)) = choice[r][mask] {
            matched[j] = r - 1;
            mask = prev;
        }
    }
    Ok(Alignment {
        error: min.max(0.0).sqrt(),
        matched,
    })
}

/// [`poe_alignment`] reduced to the error value.
pub fn poe_alignment_error(b_hat: &[Vec<f64>], b_star: &DMatrix<f64>) -> Result<f64> {
    poe_alignment(b_hat, b_star).map(|a| a.error)
}

/// `max ‖b̂_k‖` over unmatched experts divided by `min ‖b̂_k‖` over matched
/// ones; below 1 when every spurious expert is shorter than every matched one.
pub fn spurious_norm_ratio(b_hat: &[Vec<f64>], alignment: &Alignment) -> f64 {
    let norm = |b: &Vec<f64>| b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let min_matched = alignment
        .matched
        .iter()
        .map(|&k| norm(&b_hat[k]))
        .fold(f64::INFINITY, f64::min);
    let max_spurious = b_hat
        .iter()
        .enumerate()
        .filter(|(k, _)| !alignment.matched.contains(k))
        .map(|(_, b)| norm(b))
        .fold(0.0, f64::max);
    max_spurious / min_matched
}
