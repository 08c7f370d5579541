//! Estimation with noise built from the data itself.
//!
//! The auxiliary distribution mixes the data with a transformed copy
//! `Bx + v`, so the objective needs only the data sample:
//!
//! `L̃ = mean_X[α S₀(g(Bᵀ(x − v))) + β S₀(g(x)) − S₁(g(x))]`,
//! `g(u) = p_m(u) / (α p_m(Bu + v) + β p_m(u))`.

use nalgebra::{DMatrix, DVector};

use super::{check_sample, Objective};
use crate::bregman::{logit_boost_transform, LogSPair, SPair};
use crate::error::{invalid, Result};
use crate::models::UnnormalizedModel;
use crate::numeric::{log_add_exp, sigmoid};
use crate::sample::Sample;

/// Orthonormal transform `B`, shift `v`, and mixing weights `α + β = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSpec {
    b: DMatrix<f64>,
    v: Vec<f64>,
    alpha: f64,
    beta: f64,
}

impl PerturbationSpec {
    pub fn new(b: DMatrix<f64>, v: Vec<f64>, alpha: f64, beta: f64) -> Result<Self> {
        let n = b.nrows();
        if !b.is_square() || n == 0 || v.len() != n {
            return Err(invalid("B must be square and match the length of v"));
        }
        let dev = (b.transpose() * &b - DMatrix::identity(n, n)).abs().max();
        if !(dev <= 1e-10) {
            return Err(invalid(format!("B is not orthonormal: max |BᵀB − I| = {dev:e}")));
        }
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) || (alpha + beta - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("need α, β in [0, 1] with α + β = 1, got {alpha}, {beta}")));
        }
        if beta == 1.0 {
            return Err(invalid("β = 1 leaves no perturbed component"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(invalid("v must be finite"));
        }
        Ok(Self { b, v, alpha, beta })
    }

    /// Sign flip of coordinate `i`, `v = 0`.
    pub fn bit_flip(n: usize, i: usize, alpha: f64) -> Result<Self> {
        if i >= n {
            return Err(invalid(format!("bit {i} out of range for n = {n}")));
        }
        let mut b = DMatrix::identity(n, n);
        b[(i, i)] = -1.0;
        Self::new(b, vec![0.0; n], alpha, 1.0 - alpha)
    }

    /// Pure shift: `B = I`.
    pub fn shift(v: Vec<f64>, alpha: f64) -> Result<Self> {
        let n = v.len();
        Self::new(DMatrix::identity(n, n), v, alpha, 1.0 - alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    fn forward(&self, u: &[f64]) -> Vec<f64> {
        let r = &self.b * DVector::from_column_slice(u);
        r.iter().zip(&self.v).map(|(a, b)| a + b).collect()
    }

    fn inverse(&self, x: &[f64]) -> Vec<f64> {
        let d = DVector::from_iterator(x.len(), x.iter().zip(&self.v).map(|(a, b)| a - b));
        (self.b.transpose() * d).iter().copied().collect()
    }
}

pub struct DataDependentObjective<M> {
    model: M,
    data: Sample,
    /// `Bx + v` and `Bᵀ(x − v)` per data point.
    forward: Vec<Vec<f64>>,
    inverse: Vec<Vec<f64>>,
    spec: PerturbationSpec,
    pair: LogSPair,
    pair_name: String,
}

pub fn data_dependent_noise_objective<M: UnnormalizedModel>(
    model: M,
    data: &Sample,
    spec: &PerturbationSpec,
    pair: &SPair,
) -> Result<DataDependentObjective<M>> {
    check_sample(&model, data, "data")?;
    if spec.b.nrows() != model.input_dim() {
        return Err(invalid("perturbation and model dimensions differ"));
    }
    let forward = data.iter().map(|(_, x)| spec.forward(x)).collect();
    let inverse = data.iter().map(|(_, x)| spec.inverse(x)).collect();
    Ok(DataDependentObjective {
        model,
        data: data.clone(),
        forward,
        inverse,
        spec: spec.clone(),
        pair: logit_boost_transform(pair),
        pair_name: pair.name().to_string(),
    })
}

impl<M: UnnormalizedModel> DataDependentObjective<M> {
    /// `(ln g(u), weight)` where `d ln g = weight · (∇L(u) − ∇L(Bu + v))`.
    fn log_g(&self, l_u: f64, l_shift: f64) -> (f64, f64) {
        let ln_alpha = self.spec.alpha.ln();
        let ln_beta = self.spec.beta.ln();
        let delta = ln_alpha + l_shift - l_u;
        let lg = -log_add_exp(delta, ln_beta);
        let weight = if self.spec.beta == 0.0 { 1.0 } else { sigmoid(delta - ln_beta) };
        (lg, weight)
    }
}

impl<M: UnnormalizedModel> Objective for DataDependentObjective<M> {
    fn param_dim(&self) -> usize {
        self.model.param_dim()
    }

    fn evaluate(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let (alpha, beta) = (self.spec.alpha, self.spec.beta);
        let mut value = 0.0;
        for (k, (w, x)) in self.data.iter().enumerate() {
            let z = &self.inverse[k];
            let bx = &self.forward[k];
            let l_x = self.model.log_unnorm(x, theta);
            let l_z = self.model.log_unnorm(z, theta);
            let l_bx = self.model.log_unnorm(bx, theta);
            // B z + v = x
            let (lg_z, wt_z) = self.log_g(l_z, l_x);
            let (lg_x, wt_x) = self.log_g(l_x, l_bx);
            value += w * (alpha * self.pair.ls0(lg_z) + beta * self.pair.ls0(lg_x) + self.pair.ls1(-lg_x));

            let coef_z = w * alpha * self.pair.ls0_deriv(lg_z) * wt_z;
            let coef_x = w * (beta * self.pair.ls0_deriv(lg_x) - self.pair.ls1_deriv(-lg_x)) * wt_x;
            self.model.add_grad_theta(z, theta, coef_z, grad);
            self.model.add_grad_theta(x, theta, coef_x - coef_z, grad);
            self.model.add_grad_theta(bx, theta, -coef_x, grad);
        }
        value
    }

    fn describe(&self) -> String {
        format!(
            "data_dependent_noise(model={}, pair={}, alpha={}, beta={}, T_d={})",
            self.model.describe(),
            self.pair_name,
            self.spec.alpha,
            self.spec.beta,
            self.data.len()
        )
    }
}
