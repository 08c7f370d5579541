//! Product of Laplacian experts: `ln p_m(x) = Σ_k −√2 φ(b_kᵀx) + c`.
//!
//! `φ(u) = √(u² + ε)` smooths the absolute value so the objective is
//! differentiable; `ε = 0` gives `|u|` exactly.

use std::f64::consts::{LN_2, SQRT_2};

use nalgebra::DMatrix;

use super::{DomainKind, UnnormalizedModel};
use crate::error::{invalid, Result};
use crate::numeric::dot;
use crate::sampling::require_invertible;

/// Default smoothing of `|u|` used during optimization.
pub const DEFAULT_SMOOTHING: f64 = 1e-8;

#[inline]
fn phi(u: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        u.abs()
    } else {
        (u * u + eps).sqrt()
    }
}

#[inline]
fn phi_deriv(u: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        u.signum()
    } else {
        u / (u * u + eps).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcaPoeParams {
    pub experts: Vec<Vec<f64>>,
    pub c: f64,
    pub smoothing_eps: f64,
}

impl IcaPoeParams {
    pub fn new(experts: Vec<Vec<f64>>, c: f64, smoothing_eps: f64) -> Result<Self> {
        let n = experts.first().map(Vec::len).ok_or_else(|| invalid("need at least one expert"))?;
        if n == 0 || experts.iter().any(|b| b.len() != n) {
            return Err(invalid("experts must share one positive dimension"));
        }
        if experts.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("expert entries must be finite"));
        }
        if !(smoothing_eps >= 0.0) {
            return Err(invalid("smoothing must be nonnegative"));
        }
        Ok(Self { experts, c, smoothing_eps })
    }

    pub fn dim(&self) -> usize {
        self.experts[0].len()
    }

    pub fn num_experts(&self) -> usize {
        self.experts.len()
    }

    pub fn log_unnorm(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(invalid(format!("point has {} coordinates, expected {}", x.len(), self.dim())));
        }
        Ok(expert_sum(&self.experts, x, self.smoothing_eps) + self.c)
    }

    pub fn norms(&self) -> Vec<f64> {
        self.experts.iter().map(|b| dot(b, b).sqrt()).collect()
    }
}

fn expert_sum(experts: &[Vec<f64>], x: &[f64], eps: f64) -> f64 {
    experts.iter().map(|b| -SQRT_2 * phi(dot(b, x), eps)).sum()
}

/// `Σ_k −√2 φ(b_kᵀx) + c`.
pub fn ica_poe_log_unnorm(x: &[f64], params: &IcaPoeParams) -> Result<f64> {
    params.log_unnorm(x)
}

/// Normalized log pdf of the ICA model whose experts are the columns of
/// `mixing`: `Σ_k −√2 |b_kᵀx| + ln|det B| − (n/2) ln 2`.
pub fn ica_true_log_pdf(x: &[f64], mixing: &DMatrix<f64>) -> Result<f64> {
    require_invertible(mixing)?;
    let n = mixing.nrows();
    if x.len() != n {
        return Err(invalid(format!("point has {} coordinates, expected {n}", x.len())));
    }
    let experts: f64 = (0..n)
        .map(|k| {
            let col = mixing.column(k);
            -SQRT_2 * col.iter().zip(x).map(|(b, v)| b * v).sum::<f64>().abs()
        })
        .sum();
    Ok(experts + mixing.determinant().abs().ln() - 0.5 * n as f64 * LN_2)
}

/// Product-of-experts model with some experts frozen.
///
/// θ = (free experts, flattened in order, then `c`). Frozen experts add a
/// fixed term to the log density, which is how stagewise fitting keeps
/// earlier experts unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct IcaPoeModel {
    n: usize,
    frozen: Vec<Vec<f64>>,
    free: usize,
    smoothing_eps: f64,
}

impl IcaPoeModel {
    pub fn new(n: usize, free: usize, smoothing_eps: f64) -> Self {
        Self::with_frozen(n, Vec::new(), free, smoothing_eps)
    }

    pub fn with_frozen(n: usize, frozen: Vec<Vec<f64>>, free: usize, smoothing_eps: f64) -> Self {
        debug_assert!(frozen.iter().all(|b| b.len() == n));
        Self {
            n,
            frozen,
            free,
            smoothing_eps,
        }
    }

    pub fn frozen(&self) -> &[Vec<f64>] {
        &self.frozen
    }

    pub fn free_experts(&self) -> usize {
        self.free
    }

    /// All experts (frozen first) and `c` for the parameter vector `theta`.
    pub fn to_params(&self, theta: &[f64]) -> IcaPoeParams {
        let mut experts = self.frozen.clone();
        experts.extend(theta[..self.free * self.n].chunks_exact(self.n).map(<[f64]>::to_vec));
        IcaPoeParams {
            experts,
            c: theta[self.free * self.n],
            smoothing_eps: self.smoothing_eps,
        }
    }
}

impl UnnormalizedModel for IcaPoeModel {
    fn input_dim(&self) -> usize {
        self.n
    }

    fn param_dim(&self) -> usize {
        self.free * self.n + 1
    }

    fn domain(&self) -> DomainKind {
        DomainKind::Real
    }

    fn log_unnorm(&self, x: &[f64], theta: &[f64]) -> f64 {
        let eps = self.smoothing_eps;
        let mut v = expert_sum(&self.frozen, x, eps);
        for b in theta[..self.free * self.n].chunks_exact(self.n) {
            v -= SQRT_2 * phi(dot(b, x), eps);
        }
        v + theta[self.free * self.n]
    }

    fn add_grad_theta(&self, x: &[f64], theta: &[f64], scale: f64, grad: &mut [f64]) {
        let n = self.n;
        for (k, b) in theta[..self.free * n].chunks_exact(n).enumerate() {
            let coef = -scale * SQRT_2 * phi_deriv(dot(b, x), self.smoothing_eps);
            for (g, xi) in grad[k * n..(k + 1) * n].iter_mut().zip(x) {
                *g += coef * xi;
            }
        }
        grad[self.free * n] += scale;
    }

    fn describe(&self) -> String {
        format!(
            "ica_poe(n={}, frozen={}, free={}, eps={:e})",
            self.n,
            self.frozen.len(),
            self.free,
            self.smoothing_eps
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_ica, RngStream};

    #[test]
    fn log_unnorm_examples() {
        let p = IcaPoeParams::new(vec![vec![0.3, -1.0, 2.0, 0.5]; 3], 0.0, 0.0).unwrap();
        assert_eq!(p.log_unnorm(&[0.0; 4]).unwrap(), 0.0);
        let single = IcaPoeParams::new(vec![vec![1.0, 0.0, 0.0, 0.0]], 0.0, 0.0).unwrap();
        let v = single.log_unnorm(&[2.0, 5.0, -1.0, 3.0]).unwrap();
        assert!((v + 2.0 * SQRT_2).abs() < 1e-15);
        assert!((v + 2.8284).abs() < 1e-4);
        assert!(single.log_unnorm(&[1.0]).is_err());
        assert!(IcaPoeParams::new(vec![], 0.0, 0.0).is_err());
        assert!(IcaPoeParams::new(vec![vec![f64::NAN]], 0.0, 0.0).is_err());
    }

    #[test]
    fn model_matches_params() {
        let frozen = vec![vec![1.0, 0.5], vec![-0.2, 0.3]];
        let model = IcaPoeModel::with_frozen(2, frozen, 2, 1e-8);
        let theta = [0.4, -0.1, 2.0, 1.0, 0.7];
        let params = model.to_params(&theta);
        assert_eq!(params.num_experts(), 4);
        let x = [0.3, -1.7];
        assert!((model.log_unnorm(&x, &theta) - params.log_unnorm(&x).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn true_pdf_examples() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert!((ica_true_log_pdf(&[0.0; 4], &id).unwrap() + 2.0 * LN_2).abs() < 1e-15);

        let mut rng = RngStream::new(1, 1);
        let b = DMatrix::from_fn(4, 4, |_, _| rng.standard_normal());
        let x = [0.3, -0.2, 1.1, 0.4];
        let doubled = &b * 2.0;
        let lhs = ica_true_log_pdf(&x, &doubled).unwrap();
        let experts_b: f64 = (0..4).map(|k| -SQRT_2 * b.column(k).dot(&nalgebra::DVector::from_row_slice(&x)).abs()).sum();
        let norm_b = ica_true_log_pdf(&x, &b).unwrap() - experts_b;
        // normalizer gains ln 16 and each expert term doubles
        assert!((lhs - (2.0 * experts_b + norm_b + 16f64.ln())).abs() < 1e-12);

        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(ica_true_log_pdf(&[0.0, 0.0], &singular).is_err());
    }

    #[test]
    fn true_pdf_self_normalizes() {
        // E_p[1 / p(x) · q(x)] = 1 for a normalized proposal q evaluated under samples of p:
        // here q is a wide Gaussian, so the mean of q(x)/p(x) over draws of p is ∫ q = 1.
        let mut rng = RngStream::new(17, 3);
        let b = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, -0.4, 0.9]);
        let t = 200_000;
        let s = sample_ica(&b, &mut rng, t).unwrap();
        let sd: f64 = 1.5;
        let log_q = |x: &[f64]| -> f64 {
            x.iter().map(|v| -0.5 * (v / sd).powi(2) - (sd * (2.0 * std::f64::consts::PI).sqrt()).ln()).sum()
        };
        let w: Vec<f64> = s
            .iter()
            .map(|(_, x)| (log_q(x) - ica_true_log_pdf(x, &b).unwrap()).exp())
            .collect();
        let mean = w.iter().sum::<f64>() / t as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1) as f64;
        let se = (var / t as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se + 1e-3, "mean {mean} se {se}");
    }
}
