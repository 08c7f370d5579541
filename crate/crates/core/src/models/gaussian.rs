//! Gaussian toy model (for score matching) and the Gaussian noise distribution.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{DomainKind, InputDerivatives, NoiseModel, UnnormalizedModel};
use crate::error::{invalid, Error, Result};
use crate::sample::Sample;
use crate::sampling::{condition_number, RngStream};

/// `ln p_m(x) = −Σᵢ xᵢ² / (2 λᵢ) + c` with θ = (λ₁, …, λₙ, c).
///
/// Unnormalized for every θ; the variances `λᵢ` are the quantities score
/// matching recovers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiagonalGaussianModel {
    n: usize,
}

impl DiagonalGaussianModel {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl UnnormalizedModel for DiagonalGaussianModel {
    fn input_dim(&self) -> usize {
        self.n
    }

    fn param_dim(&self) -> usize {
        self.n + 1
    }

    fn domain(&self) -> DomainKind {
        DomainKind::Real
    }

    fn log_unnorm(&self, x: &[f64], theta: &[f64]) -> f64 {
        x.iter().zip(theta).map(|(v, l)| -v * v / (2.0 * l)).sum::<f64>() + theta[self.n]
    }

    fn add_grad_theta(&self, x: &[f64], theta: &[f64], scale: f64, grad: &mut [f64]) {
        for i in 0..self.n {
            grad[i] += scale * x[i] * x[i] / (2.0 * theta[i] * theta[i]);
        }
        grad[self.n] += scale;
    }

    fn input_derivatives(&self, x: &[f64], theta: &[f64]) -> Option<InputDerivatives> {
        let (n, p) = (self.n, self.n + 1);
        let mut d = InputDerivatives {
            score: vec![0.0; n],
            curvature: vec![0.0; n],
            score_grad: vec![0.0; n * p],
            curvature_grad: vec![0.0; n * p],
        };
        for i in 0..n {
            let l = theta[i];
            d.score[i] = -x[i] / l;
            d.curvature[i] = -1.0 / l;
            d.score_grad[i * p + i] = x[i] / (l * l);
            d.curvature_grad[i * p + i] = 1.0 / (l * l);
        }
        Some(d)
    }

    fn describe(&self) -> String {
        format!("diagonal_gaussian(n={})", self.n)
    }
}

/// Zero-mean Gaussian noise with full covariance.
#[derive(Clone, Debug)]
pub struct GaussianNoise {
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl GaussianNoise {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        if !covariance.is_square() || covariance.nrows() == 0 {
            return Err(invalid("covariance must be a nonempty square matrix"));
        }
        let cond = condition_number(&covariance);
        if !(cond < 1e12) {
            return Err(Error::Singular { condition: cond });
        }
        let n = covariance.nrows();
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or(Error::Singular { condition: cond })?;
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let log_norm = -0.5 * (n as f64 * (2.0 * PI).ln() + log_det);
        Ok(Self {
            covariance,
            chol,
            log_norm,
        })
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
}

impl NoiseModel for GaussianNoise {
    fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    fn domain(&self) -> DomainKind {
        DomainKind::Real
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        let v = DVector::from_column_slice(u);
        let w = self.chol.l().solve_lower_triangular(&v).expect("nonsingular factor");
        self.log_norm - 0.5 * w.norm_squared()
    }

    fn sample(&self, rng: &mut RngStream, count: usize) -> Sample {
        let n = self.dim();
        let l = self.chol.l();
        let mut data = Vec::with_capacity(n * count);
        for _ in 0..count {
            let z = DVector::from_fn(n, |_, _| rng.standard_normal());
            data.extend((&l * z).iter());
        }
        Sample::from_flat(n, data).expect("finite draws")
    }

    fn describe(&self) -> String {
        format!("gaussian(n={})", self.dim())
    }
}

/// Zero-mean Gaussian whose covariance is the sample second moment
/// `(1/T) Σ x xᵀ` of the data.
pub fn gaussian_noise_from_sample(data: &Sample) -> Result<GaussianNoise> {
    let n = data.dim();
    let count = data.count().unwrap_or(data.len());
    if count <= n {
        return Err(invalid(format!("need more than {n} points, got {count}")));
    }
    let mut cov = DMatrix::zeros(n, n);
    for (w, x) in data.iter() {
        for i in 0..n {
            for j in 0..=i {
                cov[(i, j)] += w * x[i] * x[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    GaussianNoise::new(cov)
}
