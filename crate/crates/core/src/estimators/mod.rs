//! Cost functions derived from the separable Bregman divergence.
//!
//! Each constructor takes a model, samples, and (where applicable) an
//! [`SPair`](crate::bregman::SPair) and returns an [`Objective`]: a
//! deterministic map from the parameter vector to value and gradient.
//! Averages are weighted by the [`Sample`] weights, so passing an
//! enumerated distribution instead of draws turns every objective into its
//! exact population counterpart.

mod boosting;
mod data_dependent;
mod direct;
mod nce;
mod ratio;
mod score;
mod small_noise;

pub use boosting::{boosting_fit, BoostingConfig, BoostingFit, StageReport};
pub use data_dependent::{data_dependent_noise_objective, DataDependentObjective, PerturbationSpec};
pub use direct::{direct_matching_objective, DirectMatchingObjective};
pub use nce::{nce_family_objective, noise_sample_size, NceObjective};
pub use ratio::{ratio_matching_objective, RatioMatchingObjective};
pub use score::{
    general_score_function_objective, score_matching_objective, GeneralScoreObjective, ScoreMatchingObjective,
};
pub use small_noise::{small_noise_expansion_check, SmallNoiseCheck};

use crate::error::{invalid, Result};
use crate::models::{DomainKind, UnnormalizedModel};
use crate::sample::Sample;

/// Differentiable scalar function of the parameter vector.
pub trait Objective: Send + Sync {
    fn param_dim(&self) -> usize;

    /// Writes the gradient into `grad` (overwriting it) and returns the value.
    fn evaluate(&self, theta: &[f64], grad: &mut [f64]) -> f64;

    fn value(&self, theta: &[f64]) -> f64 {
        let mut g = vec![0.0; self.param_dim()];
        self.evaluate(theta, &mut g)
    }

    /// Estimator, loss pair, and sample sizes this objective encodes.
    fn describe(&self) -> String;
}

type GradFn = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Objective from closures.
///
/// Without an explicit gradient the gradient is filled by central
/// differences, which makes this type suitable for tests and toy problems.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
    grad: Option<GradFn>,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f, grad: None }
    }

    pub fn with_gradient(dim: usize, f: F, grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self {
            dim,
            f,
            grad: Some(Box::new(grad)),
        }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Objective for FnObjective<F> {
    fn param_dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        match &self.grad {
            Some(g) => g(theta, grad),
            None => {
                let fd = crate::optimize::finite_diff_grad_fn(&self.f, theta, 1e-6);
                grad.copy_from_slice(&fd);
            }
        }
        (self.f)(theta)
    }

    fn value(&self, theta: &[f64]) -> f64 {
        (self.f)(theta)
    }

    fn describe(&self) -> String {
        format!("closure(dim={})", self.dim)
    }
}

pub(crate) fn check_sample<M: UnnormalizedModel + ?Sized>(model: &M, sample: &Sample, which: &str) -> Result<()> {
    if sample.dim() != model.input_dim() {
        return Err(invalid(format!(
            "{which} sample has dimension {}, model expects {}",
            sample.dim(),
            model.input_dim()
        )));
    }
    if model.domain() == DomainKind::BinaryHypercube && !sample.is_binary() {
        return Err(invalid(format!("{which} sample must contain only ±1 values")));
    }
    Ok(())
}
