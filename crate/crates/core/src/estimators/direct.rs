//! Direct matching of the data distribution with importance-weighted noise.
//!
//! `J(θ) = mean_Y[S₀(g(y)) / p_n(y)] − mean_X[S₁(g(x))]` with
//! `g = p_m(·; θ)`. Both terms are evaluated through the log-domain pair:
//! `S₀(g) = S̃₀(ln g)` and `−S₁(g) = S̃₁(−ln g)`.

use super::{check_sample, Objective};
use crate::bregman::{logit_boost_transform, LogSPair, SPair};
use crate::error::{invalid, Error, Result};
use crate::models::{NoiseModel, UnnormalizedModel};
use crate::sample::Sample;

pub struct DirectMatchingObjective<M> {
    model: M,
    data: Sample,
    noise_sample: Sample,
    /// `−ln p_n(y)` per noise point.
    neg_log_noise: Vec<f64>,
    pair: LogSPair,
    pair_name: String,
}

pub fn direct_matching_objective<M: UnnormalizedModel, N: NoiseModel + ?Sized>(
    model: M,
    noise: &N,
    data: &Sample,
    noise_sample: &Sample,
    pair: &SPair,
) -> Result<DirectMatchingObjective<M>> {
    check_sample(&model, data, "data")?;
    check_sample(&model, noise_sample, "noise")?;
    if noise.dim() != model.input_dim() {
        return Err(invalid("noise and model dimensions differ"));
    }
    let mut neg_log_noise = Vec::with_capacity(noise_sample.len());
    for (i, (_, y)) in noise_sample.iter().enumerate() {
        let lp = noise.log_density(y);
        if !lp.is_finite() {
            return Err(Error::SupportViolation { which: "noise", index: i });
        }
        neg_log_noise.push(-lp);
    }
    Ok(DirectMatchingObjective {
        model,
        data: data.clone(),
        noise_sample: noise_sample.clone(),
        neg_log_noise,
        pair: logit_boost_transform(pair),
        pair_name: pair.name().to_string(),
    })
}

impl<M: UnnormalizedModel> Objective for DirectMatchingObjective<M> {
    fn param_dim(&self) -> usize {
        self.model.param_dim()
    }

    fn evaluate(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut value = 0.0;
        for ((w, y), nlp) in self.noise_sample.iter().zip(&self.neg_log_noise) {
            let l = self.model.log_unnorm(y, theta);
            let iw = nlp.exp();
            value += w * iw * self.pair.ls0(l);
            self.model
                .add_grad_theta(y, theta, w * iw * self.pair.ls0_deriv(l), grad);
        }
        for (w, x) in self.data.iter() {
            let l = self.model.log_unnorm(x, theta);
            value += w * self.pair.ls1(-l);
            self.model.add_grad_theta(x, theta, -w * self.pair.ls1_deriv(-l), grad);
        }
        value
    }

    fn describe(&self) -> String {
        format!(
            "direct_matching(model={}, pair={}, T_d={}, T_n={})",
            self.model.describe(),
            self.pair_name,
            self.data.len(),
            self.noise_sample.len()
        )
    }
}
