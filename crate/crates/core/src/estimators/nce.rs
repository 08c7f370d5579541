//! Noise-contrastive family: `J = ν E_Y[S₀(g)] − E_X[S₁(g)]` with
//! `g = p_m / (ν p_n)`, evaluated through `G = ln p_m − ln(ν p_n)`.

use super::{check_sample, Objective};
use crate::bregman::{logit_boost_transform, LogSPair, SPair};
use crate::error::{invalid, Error, Result};
use crate::models::{NoiseModel, UnnormalizedModel};
use crate::sample::Sample;

/// `round(ν · T_d)`.
pub fn noise_sample_size(nu: f64, data_size: usize) -> usize {
    (nu * data_size as f64).round() as usize
}

pub struct NceObjective<M> {
    model: M,
    data: Sample,
    noise_sample: Sample,
    nu: f64,
    /// `ln(ν p_n)` at each data point and each noise point.
    offset_data: Vec<f64>,
    offset_noise: Vec<f64>,
    pair: LogSPair,
    pair_name: String,
}

fn offsets<N: NoiseModel + ?Sized>(noise: &N, sample: &Sample, ln_nu: f64, which: &'static str) -> Result<Vec<f64>> {
    sample
        .iter()
        .enumerate()
        .map(|(index, (_, u))| {
            let lp = noise.log_density(u);
            if lp.is_finite() {
                Ok(ln_nu + lp)
            } else {
                Err(Error::SupportViolation { which, index })
            }
        })
        .collect()
}

pub fn nce_family_objective<M: UnnormalizedModel, N: NoiseModel + ?Sized>(
    model: M,
    noise: &N,
    data: &Sample,
    noise_sample: &Sample,
    pair: &SPair,
    nu: f64,
) -> Result<NceObjective<M>> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(invalid(format!("nu must be positive and finite, got {nu}")));
    }
    check_sample(&model, data, "data")?;
    check_sample(&model, noise_sample, "noise")?;
    if noise.dim() != model.input_dim() {
        return Err(invalid("noise and model dimensions differ"));
    }
    if let (Some(td), Some(tn)) = (data.count(), noise_sample.count()) {
        let expected = noise_sample_size(nu, td);
        if tn != expected {
            return Err(invalid(format!(
                "noise sample has {tn} points, expected round({nu} * {td}) = {expected}"
            )));
        }
    }
    let ln_nu = nu.ln();
    Ok(NceObjective {
        offset_data: offsets(noise, data, ln_nu, "data")?,
        offset_noise: offsets(noise, noise_sample, ln_nu, "noise")?,
        model,
        data: data.clone(),
        noise_sample: noise_sample.clone(),
        nu,
        pair: logit_boost_transform(pair),
        pair_name: pair.name().to_string(),
    })
}

impl<M: UnnormalizedModel> NceObjective<M> {
    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

impl<M: UnnormalizedModel> Objective for NceObjective<M> {
    fn param_dim(&self) -> usize {
        self.model.param_dim()
    }

    fn evaluate(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut noise_term = 0.0;
        for ((w, y), off) in self.noise_sample.iter().zip(&self.offset_noise) {
            let g = self.model.log_unnorm(y, theta) - off;
            noise_term += w * self.pair.ls0(g);
            self.model
                .add_grad_theta(y, theta, self.nu * w * self.pair.ls0_deriv(g), grad);
        }
        let mut data_term = 0.0;
        for ((w, x), off) in self.data.iter().zip(&self.offset_data) {
            let g = self.model.log_unnorm(x, theta) - off;
            data_term += w * self.pair.ls1(-g);
            self.model.add_grad_theta(x, theta, -w * self.pair.ls1_deriv(-g), grad);
        }
        self.nu * noise_term + data_term
    }

    fn describe(&self) -> String {
        format!(
            "nce_family(model={}, pair={}, nu={}, T_d={}, T_n={})",
            self.model.describe(),
            self.pair_name,
            self.nu,
            self.data.len(),
            self.noise_sample.len()
        )
    }
}
