//! Parametric unnormalized models and normalized noise distributions.

mod bernoulli;
mod boltzmann;
mod gaussian;
mod ica;

pub use bernoulli::{fit_bernoulli_mixture, BernoulliMixture, BernoulliNoise, EmConfig, MixtureFit};
pub use boltzmann::{
    boltzmann_exact_log_partition, boltzmann_log_unnorm, pseudolikelihood_objective, BoltzmannModel,
    BoltzmannParams, PseudolikelihoodObjective,
};
pub use gaussian::{gaussian_noise_from_sample, DiagonalGaussianModel, GaussianNoise};
pub use ica::{ica_poe_log_unnorm, ica_true_log_pdf, IcaPoeModel, IcaPoeParams, DEFAULT_SMOOTHING};

use crate::sample::Sample;
use crate::sampling::RngStream;

/// Support of a model or noise distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    /// `{−1, +1}ⁿ`
    BinaryHypercube,
    /// `ℝⁿ`
    Real,
}

/// Input derivatives of `L(x; θ) = ln p_m(x; θ)` and their parameter gradients.
///
/// Matrices are row-major with one row per input coordinate and one column
/// per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct InputDerivatives {
    /// `∂L/∂xᵢ`
    pub score: Vec<f64>,
    /// `∂²L/∂xᵢ²`
    pub curvature: Vec<f64>,
    /// `∂/∂θⱼ ∂L/∂xᵢ`
    pub score_grad: Vec<f64>,
    /// `∂/∂θⱼ ∂²L/∂xᵢ²`
    pub curvature_grad: Vec<f64>,
}

impl InputDerivatives {
    pub fn laplacian(&self) -> f64 {
        self.curvature.iter().sum()
    }
}

/// Log of an unnormalized density or mass function with parameter gradients.
pub trait UnnormalizedModel: Send + Sync {
    fn input_dim(&self) -> usize;

    fn param_dim(&self) -> usize;

    fn domain(&self) -> DomainKind;

    fn log_unnorm(&self, x: &[f64], theta: &[f64]) -> f64;

    /// Adds `scale · ∇_θ L(x; θ)` to `grad`.
    fn add_grad_theta(&self, x: &[f64], theta: &[f64], scale: f64, grad: &mut [f64]);

    fn grad_theta(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.param_dim()];
        self.add_grad_theta(x, theta, 1.0, &mut g);
        g
    }

    /// Input derivatives, when the model is differentiable in `x`.
    fn input_derivatives(&self, _x: &[f64], _theta: &[f64]) -> Option<InputDerivatives> {
        None
    }

    fn describe(&self) -> String;
}

/// Normalized auxiliary distribution with exact density and sampler.
pub trait NoiseModel: Send + Sync {
    fn dim(&self) -> usize;

    fn domain(&self) -> DomainKind;

    /// Exact normalized log density (or log mass).
    fn log_density(&self, u: &[f64]) -> f64;

    /// Draws `count` points. Panics if `count` is zero, since samples are never empty.
    fn sample(&self, rng: &mut RngStream, count: usize) -> Sample;

    fn describe(&self) -> String;
}
